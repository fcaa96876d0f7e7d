#include "termeval/lasso.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "termeval/subprocess.hpp"

namespace termeval::lasso {

using witness::WitnessAutomaton;
using witness::WitnessEdge;

// ---- lasso extraction ---------------------------------------------------------

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t i2 = i, j2 = j;
      while (i2 < a.size() && a[i2] == '0') ++i2;
      while (j2 < b.size() && b[j2] == '0') ++j2;
      std::size_t ie = i2, je = j2;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      if (ie - i2 != je - j2) return ie - i2 < je - j2;
      int c = a.substr(i2, ie - i2).compare(b.substr(j2, je - j2));
      if (c != 0) return c < 0;
      if (ie - i != je - j) return ie - i < je - j;  // fewer leading zeros first
      i = ie;
      j = je;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j];
    ++i;
    ++j;
  }
  return a.size() - i < b.size() - j;
}

namespace {

constexpr std::size_t kSearchLimit = 1'000'000;

struct Graph {
  const WitnessAutomaton& w;
  std::map<std::string, std::vector<std::size_t>> out;  // node -> edge indices, sorted

  explicit Graph(const WitnessAutomaton& aut) : w(aut) {
    for (std::size_t k = 0; k < w.edges.size(); ++k) {
      const auto& e = w.edges[k];
      if (e.id && e.source && e.target) out[*e.source].push_back(k);
    }
    for (auto& [node, edges] : out) {
      std::stable_sort(edges.begin(), edges.end(), [&](std::size_t x, std::size_t y) {
        return natural_less(*w.edges[x].id, *w.edges[y].id);
      });
    }
  }

  // Nodes from which `target` is reachable (in >= 0 steps).
  std::set<std::string> co_reachable(const std::string& target) const {
    std::map<std::string, std::vector<std::string>> pred;
    for (const auto& [node, edges] : out) {
      for (auto k : edges) pred[*w.edges[k].target].push_back(node);
    }
    std::set<std::string> seen{target};
    std::vector<std::string> stack{target};
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      for (const auto& p : pred[cur]) {
        if (seen.insert(p).second) stack.push_back(p);
      }
    }
    return seen;
  }

  // Smallest simple path from `from` to `to` by edge-id sequence. `to` may
  // occur only as the final node; `from == to` asks for a cycle.
  std::optional<std::vector<std::size_t>> smallest_path(const std::string& from,
                                                        const std::string& to,
                                                        std::size_t& budget) const {
    std::set<std::string> useful = co_reachable(to);
    std::set<std::string> on_path{from};
    std::vector<std::size_t> path;
    std::function<bool(const std::string&)> dfs = [&](const std::string& node) -> bool {
      auto it = out.find(node);
      if (it == out.end()) return false;
      for (auto k : it->second) {
        if (budget == 0) return false;
        --budget;
        const std::string& next = *w.edges[k].target;
        if (next == to) {
          path.push_back(k);
          return true;
        }
        if (on_path.count(next) || !useful.count(next)) continue;
        on_path.insert(next);
        path.push_back(k);
        if (dfs(next)) return true;
        path.pop_back();
        on_path.erase(next);
      }
      return false;
    };
    if (dfs(from)) return path;
    return std::nullopt;
  }
};

}  // namespace

std::variant<LassoPath, NoLasso> extract_lasso(const WitnessAutomaton& w) {
  const witness::WitnessNode* entry = nullptr;
  for (const auto& n : w.nodes) {
    if (n.id && n.entry.value_or(false)) {
      entry = &n;
      break;
    }
  }
  if (!entry) return NoLasso{"no entry node"};
  Graph g(w);
  std::size_t budget = kSearchLimit;
  for (const auto& n : w.nodes) {
    if (!n.id || !n.cyclehead.value_or(false)) continue;
    std::vector<std::size_t> stem;
    if (*n.id != *entry->id) {
      auto s = g.smallest_path(*entry->id, *n.id, budget);
      if (!s) continue;
      stem = std::move(*s);
    }
    auto c = g.smallest_path(*n.id, *n.id, budget);
    if (!c) continue;
    LassoPath out;
    out.entry = *entry->id;
    out.cyclehead = *n.id;
    for (auto k : stem) out.stem.push_back(w.edges[k]);
    for (auto k : *c) out.cycle.push_back(w.edges[k]);
    return out;
  }
  if (budget == 0) return NoLasso{"search limit reached"};
  return NoLasso{"no cycle through a reachable cyclehead"};
}

// ---- assignment enumeration ---------------------------------------------------

std::vector<std::int64_t> domain_sequence(std::int64_t lo, std::int64_t hi, cint::IntType t) {
  std::int64_t tlo = cint::min_value(t);
  std::uint64_t thi = cint::max_value(t);
  auto ok = [&](std::int64_t v) {
    if (v < lo || v > hi || v < tlo) return false;
    return v < 0 || static_cast<std::uint64_t>(v) <= thi;
  };
  std::vector<std::int64_t> out;
  if (ok(0)) out.push_back(0);
  // Magnitudes beyond the widest endpoint cannot contribute.
  std::uint64_t reach = std::max(lo < 0 ? static_cast<std::uint64_t>(-(lo + 1)) + 1 : 0,
                                 hi > 0 ? static_cast<std::uint64_t>(hi) : 0);
  for (std::uint64_t m = 1; m <= reach && m <= (1ULL << 62); ++m) {
    auto v = static_cast<std::int64_t>(m);
    if (ok(v)) out.push_back(v);
    if (ok(-v)) out.push_back(-v);
  }
  return out;
}

std::vector<std::vector<std::size_t>> shell_order(const std::vector<std::size_t>& sizes,
                                                  std::uint64_t cap) {
  std::vector<std::vector<std::size_t>> out;
  if (cap == 0) return out;
  if (sizes.empty()) {
    out.emplace_back();
    return out;
  }
  if (std::find(sizes.begin(), sizes.end(), 0) != sizes.end()) return out;
  std::size_t max_size = *std::max_element(sizes.begin(), sizes.end());
  const std::size_t k = sizes.size();
  for (std::size_t s = 0; s < max_size; ++s) {
    std::vector<std::size_t> bound(k);
    for (std::size_t i = 0; i < k; ++i) bound[i] = std::min(s, sizes[i] - 1);
    std::vector<std::size_t> idx(k, 0);
    while (true) {
      if (std::find(idx.begin(), idx.end(), s) != idx.end()) {
        out.push_back(idx);
        if (out.size() >= cap) return out;
      }
      std::size_t pos = k;
      while (pos > 0) {
        --pos;
        if (idx[pos] < bound[pos]) {
          ++idx[pos];
          std::fill(idx.begin() + static_cast<std::ptrdiff_t>(pos) + 1, idx.end(), 0);
          break;
        }
        if (pos == 0) {
          pos = k;  // exhausted
          break;
        }
      }
      if (pos == k) break;
    }
  }
  return out;
}

std::string Assignment::to_string() const {
  std::string s;
  for (const auto& [name, v] : values) {
    if (!s.empty()) s += ", ";
    s += name + "=" + std::to_string(v);
  }
  return s;
}

// ---- guided simulation --------------------------------------------------------

namespace {

struct Conjunct {
  cparse::ExprPtr expr;
  const cparse::FunctionDef* scope = nullptr;
};

struct PreparedEdge {
  const WitnessEdge* edge = nullptr;
  bool executable = false;
  std::optional<bool> control;  // required branch outcome
  std::vector<Conjunct> assumption;
};

std::vector<std::string> split_assumption(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ';') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  std::vector<std::string> out;
  for (auto& p : parts) {
    auto b = p.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    auto e = p.find_last_not_of(" \t\r\n");
    out.push_back(p.substr(b, e - b + 1));
  }
  return out;
}

std::vector<PreparedEdge> prepare(const cparse::CompiledProgram& cp, const LassoPath& lasso) {
  std::vector<PreparedEdge> out;
  auto add = [&](const WitnessEdge& e) {
    PreparedEdge pe;
    pe.edge = &e;
    int line = static_cast<int>(e.line.value_or(0));
    pe.executable = cp.executable_lines.count(line) > 0;
    if (e.control == "condition-true") pe.control = true;
    if (e.control == "condition-false") pe.control = false;
    if (e.assumption) {
      const cparse::FunctionDef* fn = cparse::function_at_line(*cp.program, line);
      for (const auto& text : split_assumption(*e.assumption)) {
        auto x = cparse::parse_expression(text, *cp.program, fn, line);
        if (!x) {
          throw std::invalid_argument(e.id.value_or("?") + ": cannot evaluate assumption '" +
                                      text + "'");
        }
        pe.assumption.push_back({*x, fn});
      }
    }
    out.push_back(std::move(pe));
  };
  for (const auto& e : lasso.stem) add(e);
  for (const auto& e : lasso.cycle) add(e);
  return out;
}

struct StateHash {
  std::size_t operator()(const cparse::MachineState& s) const { return cparse::hash_state(s); }
};

struct BranchKey {
  cparse::MachineState state;
  std::size_t ptr;
  friend bool operator==(const BranchKey&, const BranchKey&) = default;
};

struct BranchKeyHash {
  std::size_t operator()(const BranchKey& k) const {
    return cparse::hash_state(k.state) * 31 + k.ptr;
  }
};

bool holds(const PreparedEdge& pe, const cparse::MachineState& st) {
  for (const auto& c : pe.assumption) {
    auto lookup = [&](const cparse::VarRef& r) -> std::optional<cint::Value> {
      if (r.global) return cint::Value{st.globals[static_cast<std::size_t>(r.slot)], r.type};
      for (auto f = st.frames.rbegin(); f != st.frames.rend(); ++f) {
        if (f->fn->def == c.scope) return cint::Value{f->slots[static_cast<std::size_t>(r.slot)], r.type};
      }
      return std::nullopt;
    };
    auto v = cparse::evaluate_with(*c.expr, lookup);
    if (!v || !cint::truthy(*v)) return false;
  }
  return true;
}

RunOutcome follow(const cparse::CompiledProgram& cp, const std::vector<PreparedEdge>& edges,
                  std::size_t stem_len, const std::vector<std::int64_t>& site_values,
                  const CheckerConfig& cfg) {
  using K = RunOutcome::Kind;
  cparse::Machine m(cp, [&](int site, cint::IntType t) {
    return cint::make(site_values.at(static_cast<std::size_t>(site)), t);
  });
  const std::size_t total = edges.size();
  std::size_t ptr = 0;
  std::uint64_t cycles = 0, reads = 0, steps = 0;
  std::unordered_map<cparse::MachineState, std::pair<std::uint64_t, std::uint64_t>, StateHash>
      at_head;  // state -> (cycles, reads)
  std::unordered_set<BranchKey, BranchKeyHash> at_branch;

  auto violated = [&](std::size_t at) {
    return RunOutcome{K::Violated, *edges[at].edge->id, cycles, m.state()};
  };

  // Consume edge `ptr`; returns an outcome when the run is decided.
  auto advance = [&]() -> std::optional<RunOutcome> {
    ++ptr;
    if (ptr < total) return std::nullopt;
    ptr = stem_len;
    ++cycles;
    at_branch.clear();
    auto [it, fresh] = at_head.try_emplace(m.state(), cycles, reads);
    if (!fresh) {
      if (it->second.second == reads) return RunOutcome{K::Proven, "", cycles, m.state()};
      it->second = {cycles, reads};
    }
    if (cycles >= cfg.bounded_cycle_target) return RunOutcome{K::Bounded, "", cycles, m.state()};
    return std::nullopt;
  };

  // Pass over edges on lines without executable statements.
  auto skip = [&]() -> std::optional<RunOutcome> {
    std::size_t guard = 0;
    while (!edges[ptr].executable) {
      if (!holds(edges[ptr], m.state())) return violated(ptr);
      if (auto r = advance()) return r;
      if (++guard > total) return RunOutcome{K::Budget, "", cycles, m.state()};
    }
    return std::nullopt;
  };

  while (true) {
    if (auto r = skip()) return *r;
    if (steps++ >= cfg.max_steps) return RunOutcome{K::Budget, "", cycles, m.state()};
    cparse::Event ev = m.step();
    if (ev.kind != cparse::EventKind::Step) return violated(ptr);
    if (ev.read_nondet) ++reads;
    const PreparedEdge& pe = edges[ptr];
    if (ev.instr->line == static_cast<int>(*pe.edge->line) && (!pe.control || ev.branch)) {
      if (pe.control && *pe.control != *ev.branch) return violated(ptr);
      if (!holds(pe, m.state())) return violated(ptr);
      if (auto r = advance()) return *r;
    }
    if (ev.branch) {
      // Same state at the same edge with no cycle completed since: the run
      // loops forever without following the lasso.
      if (!at_branch.insert(BranchKey{m.state(), ptr}).second) return violated(ptr);
    }
  }
}

std::string render_state(const cparse::Program& p, const cparse::MachineState& s) {
  std::string out;
  auto add = [&](const std::string& name, std::int64_t v, cint::IntType t) {
    if (!out.empty()) out += ", ";
    out += name + "=" + cint::to_string(cint::Value{v, t});
  };
  if (!s.frames.empty()) {
    const auto& f = s.frames.back();
    const auto& locals = f.fn->def->locals;
    for (std::size_t i = 0; i < locals.size() && i < f.slots.size(); ++i) {
      add(locals[i].name, f.slots[i], locals[i].type);
    }
  }
  for (const auto& g : p.globals) add(g.var.name, s.globals[static_cast<std::size_t>(g.var.slot)], g.var.type);
  return out;
}

}  // namespace

RunOutcome follow_lasso(const cparse::CompiledProgram& cp, const LassoPath& lasso,
                        const std::vector<std::int64_t>& site_values, const CheckerConfig& cfg) {
  if (lasso.cycle.empty()) throw std::invalid_argument("lasso has an empty cycle");
  auto edges = prepare(cp, lasso);
  return follow(cp, edges, lasso.stem.size(), site_values, cfg);
}

FeasibilityResult check_feasibility(const cparse::ParseResult& p, const LassoPath& lasso,
                                    const CheckerConfig& cfg) {
  if (const auto* u = std::get_if<cparse::UnsupportedConstruct>(&p)) {
    return Unknown{Unknown::Reason::Unsupported,
                   "line " + std::to_string(u->line) + ": " + u->construct};
  }
  return check_feasibility(std::get<cparse::Program>(p), lasso, cfg);
}

FeasibilityResult check_feasibility(const cparse::Program& p, const LassoPath& lasso,
                                    const CheckerConfig& cfg) {
  using U = Unknown::Reason;
  if (lasso.cycle.empty()) return Unknown{U::EmptyCycle, "lasso has an empty cycle"};
  cparse::CompiledProgram cp = cparse::compile(p);
  std::vector<PreparedEdge> edges;
  try {
    edges = prepare(cp, lasso);
  } catch (const std::invalid_argument& e) {
    return Unknown{U::BadAssumption, e.what()};
  }
  if (std::none_of(edges.begin() + static_cast<std::ptrdiff_t>(lasso.stem.size()), edges.end(),
                   [](const PreparedEdge& e) { return e.executable; })) {
    return Unknown{U::EmptyCycle, "no cycle edge names an executable line"};
  }

  std::vector<std::vector<std::int64_t>> seqs;
  std::vector<std::size_t> sizes;
  for (const auto& nv : p.nondet_vars) {
    auto [lo, hi] = std::pair{cfg.domain_lo, cfg.domain_hi};
    if (auto it = cfg.domain_overrides.find(nv.variable); it != cfg.domain_overrides.end()) {
      std::tie(lo, hi) = it->second;
    }
    seqs.push_back(domain_sequence(lo, hi, nv.type));
    sizes.push_back(seqs.back().size());
  }
  if (std::find(sizes.begin(), sizes.end(), 0) != sizes.end()) {
    return Unknown{U::AssignmentCap, "a nondet domain is empty after clipping to its type"};
  }
  auto tuples = shell_order(sizes, cfg.max_assignments + 1);
  bool capped = tuples.size() > cfg.max_assignments;
  if (capped) tuples.resize(static_cast<std::size_t>(cfg.max_assignments));

  auto assignment_of = [&](const std::vector<std::int64_t>& vals) {
    Assignment a;
    for (std::size_t i = 0; i < vals.size(); ++i) a.values.emplace_back(p.nondet_vars[i].variable, vals[i]);
    return a;
  };

  std::optional<BoundedEvidence> bounded;
  std::optional<std::string> first_violation;
  bool budget_hit = false;
  for (const auto& t : tuples) {
    std::vector<std::int64_t> vals(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) vals[i] = seqs[i][t[i]];
    RunOutcome r = follow(cp, edges, lasso.stem.size(), vals, cfg);
    switch (r.kind) {
      case RunOutcome::Kind::Proven:
        return ProvenInfinite{r.state, render_state(p, r.state), assignment_of(vals), r.cycles};
      case RunOutcome::Kind::Bounded:
        if (!bounded) bounded = BoundedEvidence{r.cycles, assignment_of(vals)};
        break;
      case RunOutcome::Kind::Violated:
        if (!first_violation) first_violation = r.edge_id;
        break;
      case RunOutcome::Kind::Budget:
        budget_hit = true;
        break;
    }
  }
  if (bounded) return *bounded;
  if (budget_hit) return Unknown{U::BudgetExhausted, "step budget exhausted for some assignment"};
  if (capped) return Unknown{U::AssignmentCap, "assignment cap reached before exhausting the domain"};
  return Infeasible{*first_violation};
}

std::string_view to_string(Unknown::Reason r) {
  switch (r) {
    case Unknown::Reason::BudgetExhausted: return "budget exhausted";
    case Unknown::Reason::AssignmentCap: return "assignment cap";
    case Unknown::Reason::Unsupported: return "unsupported construct";
    case Unknown::Reason::BadAssumption: return "bad assumption";
    case Unknown::Reason::EmptyCycle: return "empty cycle";
  }
  return "?";
}

std::string describe(const FeasibilityResult& r) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ProvenInfinite>) {
          return "ProvenInfinite(state: " + x.rendered_state + "; inputs: " +
                 x.assignment.to_string() + "; after " + std::to_string(x.cycles) + " cycles)";
        } else if constexpr (std::is_same_v<T, BoundedEvidence>) {
          return "BoundedEvidence(" + std::to_string(x.cycles) + " cycles; inputs: " +
                 x.assignment.to_string() + ")";
        } else if constexpr (std::is_same_v<T, Infeasible>) {
          return "Infeasible(" + x.edge_id + ")";
        } else {
          return "Unknown(" + std::string(to_string(x.reason)) + ": " + x.detail + ")";
        }
      },
      r);
}

// ---- external validator -----------------------------------------------------

std::vector<std::string> validator_command(const std::string& program_path,
                                           const std::string& graphml_path,
                                           const ValidatorConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path program = fs::absolute(program_path);
  fs::path prp = cfg.property_path;
  // Relative property paths follow the benchmark layout: next to the task.
  if (prp.is_relative()) prp = (program.parent_path() / prp).lexically_normal();
  return {(fs::path(cfg.validator_root) / "Ultimate.py").string(),
          "--architecture", cfg.architecture,
          "--spec", prp.string(),
          "--file", program.string(),
          "--validate", fs::absolute(graphml_path).string()};
}

ValidatorResult interpret_validator_output(const std::string& output) {
  std::istringstream in(output);
  std::string line;
  bool after_result = false;
  std::optional<bool> verdict;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    std::string t = b == std::string::npos ? "" : line.substr(b);
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    if (t.rfind("Result:", 0) == 0) {
      after_result = true;
      t = t.substr(7);
      auto nb = t.find_first_not_of(" \t");
      t = nb == std::string::npos ? "" : t.substr(nb);
      if (t.empty()) continue;
    }
    if (!after_result && t != "TRUE" && t != "FALSE") continue;
    if (t.rfind("FALSE", 0) == 0) verdict = false;
    else if (t.rfind("TRUE", 0) == 0) verdict = true;
    else if (after_result && !t.empty()) return ToolError{output};
    if (verdict) break;
  }
  if (!verdict) return ToolError{output};
  if (!*verdict) return Validated{};
  return Rejected{};
}

ValidatorResult run_external_validator(const std::string& program_path,
                                       const std::string& graphml_path,
                                       const ValidatorConfig& cfg) {
  auto argv = validator_command(program_path, graphml_path, cfg);
  if (!std::filesystem::exists(argv[0])) return ToolError{"validator not found: " + argv[0]};
  ProcessResult r = run_process(argv, "", cfg.timeout, cfg.validator_root);
  if (!r.spawned) return ToolError{"cannot start validator: " + r.output};
  if (r.timed_out) return ToolError{"validator timed out\n" + r.output};
  return interpret_validator_output(r.output);
}

}  // namespace termeval::lasso
