#pragma once

// Random precondition formulas as text, plus rewrites that keep or break
// their meaning.

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace termeval::testgen {

class ExprGenerator {
 public:
  ExprGenerator(std::uint64_t seed, std::vector<std::string> vars)
      : rng_(seed), vars_(std::move(vars)) {}

  std::string formula() { return print(gen_formula(2)); }

  /// About half the pairs are equivalent by construction.
  std::pair<std::string, std::string> pair() {
    NodeP a = gen_formula(2);
    int mode = pick(0, 3);
    NodeP b = mode <= 1 ? rewrite(a) : mode == 2 ? perturb(rewrite(a)) : gen_formula(2);
    history_.emplace_back(print(b), b);
    return {print(a), print(b)};
  }

  /// A further rewrite of a previously generated formula, reparsed from
  /// the generator's own printing.
  std::string variant_of(const std::string& text) {
    for (auto& [t, n] : history_)
      if (t == text) return print(pick(0, 3) == 0 ? perturb(rewrite(n)) : rewrite(n));
    return text;
  }

 private:
  struct Node;
  using NodeP = std::shared_ptr<const Node>;
  struct Node {
    std::string op;  // "var", "lit", "neg", + - * / %, comparisons, "and", "or", "not"
    std::string name;
    long long value = 0;
    NodeP l, r;
  };

  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
  std::vector<std::pair<std::string, NodeP>> history_;

  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  static NodeP mk(std::string op, NodeP l = nullptr, NodeP r = nullptr) {
    return std::make_shared<const Node>(Node{std::move(op), "", 0, std::move(l), std::move(r)});
  }
  static NodeP lit(long long v) { return std::make_shared<const Node>(Node{"lit", "", v, {}, {}}); }
  NodeP var() {
    return std::make_shared<const Node>(Node{"var", vars_[pick(0, (int)vars_.size() - 1)], 0, {}, {}});
  }

  NodeP gen_term(int depth) {
    int k = pick(0, depth > 0 ? 9 : 2);
    if (k <= 1) return var();
    if (k == 2) return lit(pick(-10, 10));
    if (k == 3) return mk("neg", gen_term(depth - 1));
    static const char* ops[] = {"+", "-", "*", "/", "%", "+"};
    std::string op = ops[pick(0, 5)];
    NodeP l = gen_term(depth - 1);
    NodeP r = (op == "*" || op == "/" || op == "%") && pick(0, 3) > 0 ? lit(pick(1, 7))
                                                                      : gen_term(depth - 1);
    return mk(op, l, r);
  }

  NodeP gen_cmp() {
    static const char* ops[] = {"<", "<=", ">", ">=", "==", "!="};
    NodeP l = gen_term(pick(0, 2));
    NodeP r = pick(0, 2) ? lit(pick(-20, 20)) : gen_term(1);
    return mk(ops[pick(0, 5)], l, r);
  }

  NodeP gen_formula(int depth) {
    NodeP out;
    int k = depth > 0 ? pick(0, 5) : 0;
    if (k <= 2) out = gen_cmp();
    else if (k == 3) out = mk("and", gen_formula(depth - 1), gen_formula(depth - 1));
    else if (k == 4) out = mk("or", gen_formula(depth - 1), gen_formula(depth - 1));
    else out = mk("not", gen_formula(depth - 1));
    history_.emplace_back(print(out), out);
    return out;
  }

  static bool is_cmp(const std::string& op) {
    return op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "!=";
  }
  static std::string mirror(const std::string& op) {
    if (op == "<") return ">";
    if (op == ">") return "<";
    if (op == "<=") return ">=";
    if (op == ">=") return "<=";
    return op;
  }
  static std::string negate(const std::string& op) {
    if (op == "<") return ">=";
    if (op == ">=") return "<";
    if (op == ">") return "<=";
    if (op == "<=") return ">";
    if (op == "==") return "!=";
    return "==";
  }

  // Meaning-preserving under wraparound C semantics.
  NodeP rewrite(const NodeP& n) {
    if (n->op == "and" || n->op == "or") {
      NodeP l = rewrite(n->l), r = rewrite(n->r);
      int k = pick(0, 2);
      if (k == 0) return mk(n->op, r, l);
      if (k == 1) return mk("not", mk(n->op == "and" ? "or" : "and", mk("not", l), mk("not", r)));
      return mk(n->op, l, r);
    }
    if (n->op == "not") {
      if (is_cmp(n->l->op) && pick(0, 1)) return mk(negate(n->l->op), n->l->l, n->l->r);
      return mk("not", rewrite(n->l));
    }
    if (is_cmp(n->op)) {
      int k = pick(0, 3);
      if (k == 0) return mk(mirror(n->op), n->r, n->l);
      if (k == 1) return mk("not", mk(negate(n->op), n->l, n->r));
      if (k == 2 && n->r->op == "lit" && (n->op == "<" || n->op == ">="))
        return mk(n->op == "<" ? "<=" : ">", n->l, lit(n->r->value - 1));
      if (k == 2 && n->r->op == "lit" && (n->op == "<=" || n->op == ">"))
        return mk(n->op == "<=" ? "<" : ">=", n->l, lit(n->r->value + 1));
      return mk(n->op, commute(n->l), commute(n->r));
    }
    return n;
  }

  NodeP commute(const NodeP& t) {
    if ((t->op == "+" || t->op == "*") && pick(0, 1)) return mk(t->op, t->r, t->l);
    return t;
  }

  // Nudges one literal, which usually changes the meaning.
  NodeP perturb(const NodeP& n) {
    if (n->op == "lit") return lit(n->value + (pick(0, 1) ? 1 : -1));
    if (!n->l) return n;
    if (!n->r || pick(0, 1)) return std::make_shared<const Node>(Node{n->op, n->name, n->value, perturb(n->l), n->r});
    return std::make_shared<const Node>(Node{n->op, n->name, n->value, n->l, perturb(n->r)});
  }

  static std::string print(const NodeP& n) {
    if (n->op == "var") return n->name;
    if (n->op == "lit") return std::to_string(n->value);
    if (n->op == "neg") return "-(" + print(n->l) + ")";
    if (n->op == "not") return "not (" + print(n->l) + ")";
    if (n->op == "and" || n->op == "or")
      return "(" + print(n->l) + ") " + n->op + " (" + print(n->r) + ")";
    return "(" + print(n->l) + ") " + n->op + " (" + print(n->r) + ")";
  }
};

}  // namespace termeval::testgen
