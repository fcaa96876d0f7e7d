#include <algorithm>

#include "termeval/cparse.hpp"

namespace termeval::cparse {

namespace {

std::string literal_text(const IntLit& lit) {
  if (!lit.spelling.empty()) return lit.spelling;
  std::string s = cint::to_string(lit.value);
  if (!lit.value.type.is_signed) s += "U";
  if (lit.value.type.width == 64) s += "L";
  return s;
}

class Emitter {
 public:
  void at(int line) {
    while (cur_ < line) {
      out_ += '\n';
      ++cur_;
    }
  }
  void put(const std::string& s) {
    if (!out_.empty() && out_.back() != '\n' && out_.back() != ' ') out_ += ' ';
    out_ += s;
  }
  std::string finish() {
    if (!out_.empty() && out_.back() != '\n') out_ += '\n';
    return out_;
  }

 private:
  std::string out_;
  int cur_ = 1;
};

std::string assign_text(const Assign& a) {
  if (a.op == "=") return a.lhs.name + " = " + print_expr(*a.rhs);
  if (a.op == "++" || a.op == "--") return a.lhs.name + a.op;
  const auto& b = std::get<Binary>(a.rhs->node);
  return a.lhs.name + " " + a.op + " " + print_expr(*b.rhs);
}

class Printer {
 public:
  explicit Printer(const Program& p) : prog_(p) {}

  std::string run() {
    struct Item {
      int line;
      const GlobalVar* g;
      const FunctionDef* f;
    };
    std::vector<Item> items;
    for (const auto& g : prog_.globals) items.push_back({g.line, &g, nullptr});
    for (const auto& [name, fn] : prog_.functions) items.push_back({fn.line, nullptr, &fn});
    std::stable_sort(items.begin(), items.end(),
                     [](const Item& a, const Item& b) { return a.line < b.line; });

    // Prototypes first, so every call is preceded by a declaration.
    for (const auto& [name, fn] : prog_.functions) em_.put(signature(fn) + ";");
    for (const Item& it : items) {
      em_.at(it.line);
      if (it.g) {
        std::string s = cint::type_name(it.g->var.type) + " " + it.g->var.name;
        if (it.g->init) s += " = " + print_expr(*it.g->init);
        em_.put(s + ";");
      } else {
        em_.put(signature(*it.f) + " {");
        stmts(it.f->body);
        em_.at(it.f->close_line);
        em_.put("}");
      }
    }
    return em_.finish();
  }

 private:
  const Program& prog_;
  Emitter em_;

  static std::string signature(const FunctionDef& fn) {
    std::string s = fn.returns_void ? "void" : cint::type_name(fn.return_type);
    s += " " + fn.name + "(";
    if (fn.params.empty()) s += "void";
    for (std::size_t i = 0; i < fn.params.size(); ++i) {
      if (i) s += ", ";
      s += cint::type_name(fn.params[i].type) + " " + fn.params[i].name;
    }
    return s + ")";
  }

  void stmts(const StmtList& list) {
    for (const auto& s : list) stmt(s);
  }

  // Declarations and simple statements without the trailing ';'.
  std::string simple(const Stmt& s) {
    return std::visit(
        [&](const auto& n) -> std::string {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Decl>) {
            std::string r = cint::type_name(n.var.type) + " " + n.var.name;
            if (n.init) r += " = " + print_expr(*n.init);
            return r;
          } else if constexpr (std::is_same_v<N, NondetAssign>) {
            std::string r = n.lhs.name + " = " + n.func + "()";
            if (n.is_decl) r = cint::type_name(n.lhs.type) + " " + r;
            return r;
          } else if constexpr (std::is_same_v<N, Assign>) {
            return assign_text(n);
          } else if constexpr (std::is_same_v<N, ExprStmt>) {
            return print_expr(*n.expr);
          } else if constexpr (std::is_same_v<N, Assume>) {
            return "__VERIFIER_assume(" + print_expr(*n.cond) + ")";
          } else if constexpr (std::is_same_v<N, Halt>) {
            return n.func + (n.func == "exit" || n.func == "_Exit" ? "(0)" : "()");
          } else if constexpr (std::is_same_v<N, Break>) {
            return "break";
          } else if constexpr (std::is_same_v<N, Continue>) {
            return "continue";
          } else if constexpr (std::is_same_v<N, Return>) {
            return n.value ? "return " + print_expr(*n.value) : "return";
          } else {
            return "";
          }
        },
        s.node);
  }

  void header_list(const StmtList& list, bool decls) {
    // `for (int a = 0, b = 1; ...)` shares one type specifier.
    for (std::size_t i = 0; i < list.size(); ++i) {
      em_.at(list[i].line);
      std::string text = simple(list[i]);
      if (decls && i > 0) {
        std::string type;
        if (auto* d = std::get_if<Decl>(&list[i].node)) type = cint::type_name(d->var.type);
        if (auto* n = std::get_if<NondetAssign>(&list[i].node)) type = cint::type_name(n->lhs.type);
        text = text.substr(type.size() + 1);
      }
      em_.put(text + (i + 1 < list.size() ? "," : ""));
    }
  }

  void stmt(const Stmt& s) {
    em_.at(s.line);
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, If>) {
            em_.put("if (" + print_expr(*n.cond) + ")");
            stmts(n.then_body);
            if (n.has_else) {
              em_.at(n.else_line);
              em_.put("else");
              stmts(n.else_body);
            }
          } else if constexpr (std::is_same_v<N, While>) {
            em_.put("while (" + print_expr(*n.cond) + ")");
            stmts(n.body);
          } else if constexpr (std::is_same_v<N, DoWhile>) {
            em_.put("do");
            stmts(n.body);
            em_.at(n.cond_line);
            em_.put("while (" + print_expr(*n.cond) + ");");
          } else if constexpr (std::is_same_v<N, For>) {
            em_.put("for (");
            bool decls = !n.init.empty() && (std::holds_alternative<Decl>(n.init[0].node) ||
                                             (std::holds_alternative<NondetAssign>(n.init[0].node) &&
                                              std::get<NondetAssign>(n.init[0].node).is_decl));
            header_list(n.init, decls);
            em_.put(";");
            if (n.cond) em_.put(print_expr(*n.cond));
            em_.put(";");
            header_list(n.step, false);
            em_.put(")");
            stmts(n.body);
          } else if constexpr (std::is_same_v<N, Block>) {
            em_.put("{");
            stmts(n.body);
            em_.at(n.close_line);
            em_.put("}");
          } else {
            em_.put(simple(s) + ";");
          }
        },
        s.node);
  }
};

bool same_ref(const VarRef& a, const VarRef& b) {
  return a.global == b.global && a.slot == b.slot && a.type == b.type;
}

bool same_ptr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return structurally_equal(*a, *b);
}

bool same_list(const StmtList& a, const StmtList& b);

bool same_stmt(const Stmt& a, const Stmt& b) {
  if (a.line != b.line || a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using N = std::decay_t<decltype(x)>;
        const N& y = std::get<N>(b.node);
        if constexpr (std::is_same_v<N, Decl>) {
          return same_ref(x.var, y.var) && same_ptr(x.init, y.init);
        } else if constexpr (std::is_same_v<N, Assign>) {
          return same_ref(x.lhs, y.lhs) && same_ptr(x.rhs, y.rhs);
        } else if constexpr (std::is_same_v<N, NondetAssign>) {
          return same_ref(x.lhs, y.lhs) && x.ctype == y.ctype && x.func == y.func &&
                 x.site == y.site && x.is_decl == y.is_decl;
        } else if constexpr (std::is_same_v<N, If>) {
          return same_ptr(x.cond, y.cond) && same_list(x.then_body, y.then_body) &&
                 x.has_else == y.has_else && same_list(x.else_body, y.else_body) &&
                 (!x.has_else || x.else_line == y.else_line);
        } else if constexpr (std::is_same_v<N, While>) {
          return same_ptr(x.cond, y.cond) && same_list(x.body, y.body);
        } else if constexpr (std::is_same_v<N, DoWhile>) {
          return same_ptr(x.cond, y.cond) && same_list(x.body, y.body) &&
                 x.cond_line == y.cond_line;
        } else if constexpr (std::is_same_v<N, For>) {
          return same_list(x.init, y.init) && same_ptr(x.cond, y.cond) &&
                 same_list(x.step, y.step) && same_list(x.body, y.body);
        } else if constexpr (std::is_same_v<N, Return>) {
          return same_ptr(x.value, y.value);
        } else if constexpr (std::is_same_v<N, Block>) {
          return same_list(x.body, y.body) && x.close_line == y.close_line;
        } else if constexpr (std::is_same_v<N, ExprStmt>) {
          return same_ptr(x.expr, y.expr);
        } else if constexpr (std::is_same_v<N, Assume>) {
          return same_ptr(x.cond, y.cond);
        } else if constexpr (std::is_same_v<N, Halt>) {
          return x.func == y.func;
        } else {
          return true;
        }
      },
      a.node);
}

bool same_list(const StmtList& a, const StmtList& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_stmt(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

std::string print_expr(const Expr& e) {
  return std::visit(
      [](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, IntLit>) {
          return literal_text(n);
        } else if constexpr (std::is_same_v<N, Var>) {
          return n.ref.name;
        } else if constexpr (std::is_same_v<N, Unary>) {
          return "(" + std::string(cint::spelling(n.op)) + print_expr(*n.operand) + ")";
        } else if constexpr (std::is_same_v<N, Binary>) {
          return "(" + print_expr(*n.lhs) + " " + std::string(cint::spelling(n.op)) + " " +
                 print_expr(*n.rhs) + ")";
        } else if constexpr (std::is_same_v<N, Cast>) {
          return "((" + cint::type_name(n.to) + ") " + print_expr(*n.operand) + ")";
        } else if constexpr (std::is_same_v<N, Nondet>) {
          return n.func + "()";
        } else {
          std::string s = n.callee + "(";
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) s += ", ";
            s += print_expr(*n.args[i]);
          }
          return s + ")";
        }
      },
      e.node);
}

std::string print_program(const Program& program) { return Printer(program).run(); }

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index() || !(a.type == b.type)) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using N = std::decay_t<decltype(x)>;
        const N& y = std::get<N>(b.node);
        if constexpr (std::is_same_v<N, IntLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<N, Var>) {
          return same_ref(x.ref, y.ref);
        } else if constexpr (std::is_same_v<N, Unary>) {
          return x.op == y.op && same_ptr(x.operand, y.operand);
        } else if constexpr (std::is_same_v<N, Binary>) {
          return x.op == y.op && same_ptr(x.lhs, y.lhs) && same_ptr(x.rhs, y.rhs);
        } else if constexpr (std::is_same_v<N, Cast>) {
          return x.to == y.to && same_ptr(x.operand, y.operand);
        } else if constexpr (std::is_same_v<N, Nondet>) {
          return x.func == y.func && x.site == y.site;
        } else {
          if (x.callee != y.callee || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!same_ptr(x.args[i], y.args[i])) return false;
          }
          return true;
        }
      },
      a.node);
}

bool structurally_equal(const Program& a, const Program& b) {
  if (a.entry != b.entry || a.functions.size() != b.functions.size() ||
      a.globals.size() != b.globals.size() || a.nondet_vars.size() != b.nondet_vars.size()) {
    return false;
  }
  for (const auto& [name, fa] : a.functions) {
    auto it = b.functions.find(name);
    if (it == b.functions.end()) return false;
    const FunctionDef& fb = it->second;
    if (fa.returns_void != fb.returns_void || !(fa.return_type == fb.return_type) ||
        fa.line != fb.line || fa.close_line != fb.close_line || fa.num_slots != fb.num_slots ||
        fa.params.size() != fb.params.size()) {
      return false;
    }
    for (std::size_t i = 0; i < fa.params.size(); ++i) {
      if (!same_ref(fa.params[i], fb.params[i])) return false;
    }
    if (!same_list(fa.body, fb.body)) return false;
  }
  for (std::size_t i = 0; i < a.globals.size(); ++i) {
    if (!same_ref(a.globals[i].var, b.globals[i].var) || a.globals[i].line != b.globals[i].line ||
        !same_ptr(a.globals[i].init, b.globals[i].init)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.nondet_vars.size(); ++i) {
    const auto& x = a.nondet_vars[i];
    const auto& y = b.nondet_vars[i];
    if (!(x.type == y.type) || x.line != y.line || x.func != y.func) return false;
  }
  return true;
}

}  // namespace termeval::cparse
