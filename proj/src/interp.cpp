#include "termeval/interp.hpp"

#include <stdexcept>

namespace termeval::cparse {

namespace {

class Compiler {
 public:
  Compiler(const FunctionDef& def, CompiledFunction& out) : def_(def), out_(out) {
    out_.def = &def;
    out_.num_slots = def.num_slots;
  }

  void run() {
    list(def_.body);
    Instr ret;
    ret.kind = InstrKind::Return;
    ret.line = def_.close_line;
    emit(std::move(ret));
  }

 private:
  const FunctionDef& def_;
  CompiledFunction& out_;
  struct Loop {
    std::vector<int> breaks;
    std::vector<int> continues;
  };
  std::vector<Loop> loops_;

  int here() const { return static_cast<int>(out_.code.size()); }
  int emit(Instr i) {
    out_.code.push_back(std::move(i));
    return here() - 1;
  }
  int jump(int line, const Stmt* origin) {
    Instr j;
    j.kind = InstrKind::Jump;
    j.line = line;
    j.origin = origin;
    return emit(std::move(j));
  }

  static bool has_nondet(const Expr& e) {
    return std::visit(
        [](const auto& n) -> bool {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Nondet>) {
            return true;
          } else if constexpr (std::is_same_v<N, Unary> || std::is_same_v<N, Cast>) {
            return has_nondet(*n.operand);
          } else if constexpr (std::is_same_v<N, Binary>) {
            return has_nondet(*n.lhs) || has_nondet(*n.rhs);
          } else {
            return false;
          }
        },
        e.node);
  }

  VarRef temp(IntType t) {
    VarRef r{"$t" + std::to_string(out_.num_slots), false, out_.num_slots, t};
    ++out_.num_slots;
    return r;
  }

  // Replace calls with temporaries, emitting the calls first.
  ExprPtr hoist(const ExprPtr& e, int line, const Stmt* origin) {
    return std::visit(
        [&](const auto& n) -> ExprPtr {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Call>) {
            Instr c = call_instr(n, line, origin);
            VarRef t = temp(e->type);
            c.dest = t;
            emit(std::move(c));
            auto v = std::make_shared<Expr>();
            v->node = Var{t};
            v->type = t.type;
            v->line = e->line;
            return v;
          } else if constexpr (std::is_same_v<N, Unary>) {
            ExprPtr op = hoist(n.operand, line, origin);
            if (op == n.operand) return e;
            auto c = std::make_shared<Expr>(*e);
            c->node = Unary{n.op, op};
            return c;
          } else if constexpr (std::is_same_v<N, Cast>) {
            ExprPtr op = hoist(n.operand, line, origin);
            if (op == n.operand) return e;
            auto c = std::make_shared<Expr>(*e);
            c->node = Cast{n.to, op};
            return c;
          } else if constexpr (std::is_same_v<N, Binary>) {
            ExprPtr l = hoist(n.lhs, line, origin);
            ExprPtr r = hoist(n.rhs, line, origin);
            if (l == n.lhs && r == n.rhs) return e;
            auto c = std::make_shared<Expr>(*e);
            c->node = Binary{n.op, l, r};
            return c;
          } else {
            return e;
          }
        },
        e->node);
  }

  Instr call_instr(const Call& call, int line, const Stmt* origin) {
    Instr c;
    c.kind = InstrKind::Call;
    c.line = line;
    c.origin = origin;
    c.callee = call.callee;
    for (const auto& a : call.args) {
      ExprPtr h = hoist(a, line, origin);
      c.reads_nondet = c.reads_nondet || has_nondet(*h);
      c.args.push_back(h);
    }
    return c;
  }

  void assign(std::optional<VarRef> dest, const ExprPtr& rhs, int line, const Stmt* origin) {
    if (!dest && std::holds_alternative<Call>(rhs->node)) {
      emit(call_instr(std::get<Call>(rhs->node), line, origin));
      return;
    }
    if (dest && std::holds_alternative<Call>(rhs->node)) {
      Instr c = call_instr(std::get<Call>(rhs->node), line, origin);
      c.dest = dest;
      emit(std::move(c));
      return;
    }
    Instr a;
    a.kind = InstrKind::Assign;
    a.line = line;
    a.origin = origin;
    a.dest = std::move(dest);
    a.expr = hoist(rhs, line, origin);
    a.reads_nondet = has_nondet(*a.expr);
    emit(std::move(a));
  }

  int branch(const ExprPtr& cond, int line, const Stmt* origin) {
    Instr b;
    b.kind = InstrKind::Branch;
    b.line = line;
    b.origin = origin;
    b.expr = hoist(cond, line, origin);
    b.reads_nondet = has_nondet(*b.expr);
    return emit(std::move(b));
  }

  void list(const StmtList& l) {
    for (const auto& s : l) stmt(s);
  }

  void stmt(const Stmt& s) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Decl>) {
            if (n.init) assign(n.var, n.init, s.line, &s);
          } else if constexpr (std::is_same_v<N, Assign>) {
            assign(n.lhs, n.rhs, s.line, &s);
          } else if constexpr (std::is_same_v<N, NondetAssign>) {
            auto e = std::make_shared<Expr>();
            e->node = Nondet{n.func, n.ctype, n.site};
            e->type = n.ctype;
            e->line = s.line;
            assign(n.lhs, e, s.line, &s);
          } else if constexpr (std::is_same_v<N, If>) {
            int b = branch(n.cond, s.line, &s);
            out_.code[b].target = here();
            list(n.then_body);
            if (n.has_else) {
              int j = jump(s.line, &s);
              out_.code[b].target_false = here();
              list(n.else_body);
              out_.code[j].target = here();
            } else {
              out_.code[b].target_false = here();
            }
          } else if constexpr (std::is_same_v<N, While>) {
            int head = here();
            int b = branch(n.cond, s.line, &s);
            out_.code[b].target = here();
            loops_.emplace_back();
            list(n.body);
            jump(s.line, &s);
            out_.code.back().target = head;
            close_loop(head, here());
            out_.code[b].target_false = here();
          } else if constexpr (std::is_same_v<N, DoWhile>) {
            int head = here();
            loops_.emplace_back();
            list(n.body);
            int cond_at = here();
            int b = branch(n.cond, n.cond_line, &s);
            out_.code[b].target = head;
            out_.code[b].target_false = here();
            close_loop(cond_at, here());
          } else if constexpr (std::is_same_v<N, For>) {
            list(n.init);
            int head = here();
            // `for (;;)` still gets a branch, so every loop iteration
            // produces at least one event.
            ExprPtr cond = n.cond;
            if (!cond) {
              auto one = std::make_shared<Expr>();
              one->node = IntLit{cint::Value{1, cint::kInt}, "1"};
              one->line = s.line;
              cond = one;
            }
            int b = branch(cond, s.line, &s);
            out_.code[b].target = here();
            loops_.emplace_back();
            list(n.body);
            int step_at = here();
            list(n.step);
            jump(s.line, &s);
            out_.code.back().target = head;
            close_loop(step_at, here());
            out_.code[b].target_false = here();
          } else if constexpr (std::is_same_v<N, Return>) {
            Instr r;
            r.kind = InstrKind::Return;
            r.line = s.line;
            r.origin = &s;
            if (n.value) {
              r.expr = hoist(n.value, s.line, &s);
              r.reads_nondet = has_nondet(*r.expr);
            }
            emit(std::move(r));
          } else if constexpr (std::is_same_v<N, Block>) {
            list(n.body);
          } else if constexpr (std::is_same_v<N, ExprStmt>) {
            assign(std::nullopt, n.expr, s.line, &s);
          } else if constexpr (std::is_same_v<N, Assume>) {
            Instr a;
            a.kind = InstrKind::Assume;
            a.line = s.line;
            a.origin = &s;
            a.expr = hoist(n.cond, s.line, &s);
            a.reads_nondet = has_nondet(*a.expr);
            emit(std::move(a));
          } else if constexpr (std::is_same_v<N, Halt>) {
            Instr h;
            h.kind = InstrKind::Halt;
            h.line = s.line;
            h.origin = &s;
            emit(std::move(h));
          } else if constexpr (std::is_same_v<N, Break>) {
            loops_.back().breaks.push_back(jump(s.line, &s));
          } else if constexpr (std::is_same_v<N, Continue>) {
            loops_.back().continues.push_back(jump(s.line, &s));
          }
        },
        s.node);
  }

  void close_loop(int continue_target, int break_target) {
    Loop l = std::move(loops_.back());
    loops_.pop_back();
    for (int j : l.breaks) out_.code[j].target = break_target;
    for (int j : l.continues) out_.code[j].target = continue_target;
  }
};

std::optional<cint::Value> eval_expr(
    const Expr& e, const std::function<std::optional<cint::Value>(const VarRef&)>& lookup,
    const std::function<std::optional<cint::Value>(const Nondet&)>& nondet) {
  return std::visit(
      [&](const auto& n) -> std::optional<cint::Value> {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, IntLit>) {
          return n.value;
        } else if constexpr (std::is_same_v<N, Var>) {
          return lookup(n.ref);
        } else if constexpr (std::is_same_v<N, Unary>) {
          auto v = eval_expr(*n.operand, lookup, nondet);
          if (!v) return std::nullopt;
          return cint::apply(n.op, *v);
        } else if constexpr (std::is_same_v<N, Cast>) {
          auto v = eval_expr(*n.operand, lookup, nondet);
          if (!v) return std::nullopt;
          return cint::convert(*v, n.to);
        } else if constexpr (std::is_same_v<N, Binary>) {
          auto l = eval_expr(*n.lhs, lookup, nondet);
          if (!l) return std::nullopt;
          if (n.op == BinOp::LogAnd && !cint::truthy(*l)) return cint::Value{0, cint::kInt};
          if (n.op == BinOp::LogOr && cint::truthy(*l)) return cint::Value{1, cint::kInt};
          auto r = eval_expr(*n.rhs, lookup, nondet);
          if (!r) return std::nullopt;
          return cint::apply(n.op, *l, *r);
        } else if constexpr (std::is_same_v<N, Nondet>) {
          return nondet(n);
        } else {
          return std::nullopt;  // calls are hoisted before evaluation
        }
      },
      e.node);
}

}  // namespace

CompiledProgram compile(const Program& program) {
  CompiledProgram cp;
  cp.program = &program;
  for (const auto& [name, fn] : program.functions) {
    CompiledFunction& out = cp.functions[name];
    Compiler(fn, out).run();
  }
  for (const auto& [name, fn] : cp.functions) {
    for (const auto& i : fn.code) {
      if (i.kind != InstrKind::Jump) cp.executable_lines.insert(i.line);
    }
  }
  return cp;
}

std::size_t hash_state(const MachineState& s) {
  std::size_t h = 1469598103934665603ULL;
  auto mix = [&](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (auto g : s.globals) mix(static_cast<std::uint64_t>(g));
  for (const auto& f : s.frames) {
    mix(reinterpret_cast<std::uintptr_t>(f.fn));
    mix(static_cast<std::uint64_t>(f.pc));
    for (auto v : f.slots) mix(static_cast<std::uint64_t>(v));
  }
  return h;
}

Machine::Machine(const CompiledProgram& prog, NondetSource nondet, std::size_t max_depth)
    : prog_(prog), nondet_(std::move(nondet)), max_depth_(max_depth) {
  const Program& p = *prog.program;
  state_.globals.assign(p.globals.size(), 0);
  for (const auto& g : p.globals) {
    if (!g.init) continue;
    auto v = eval_expr(
        *g.init,
        [&](const VarRef& r) -> std::optional<cint::Value> {
          return cint::Value{state_.globals[static_cast<std::size_t>(r.slot)], r.type};
        },
        [](const Nondet&) -> std::optional<cint::Value> { return std::nullopt; });
    if (!v) throw std::runtime_error("global initializer of " + g.var.name + " faults");
    state_.globals[static_cast<std::size_t>(g.var.slot)] = cint::convert(*v, g.var.type).bits;
  }
  push_frame(prog_.functions.at(p.entry), {}, std::nullopt);
}

void Machine::push_frame(const CompiledFunction& fn, const std::vector<cint::Value>& args,
                         std::optional<VarRef> dest) {
  Frame f;
  f.fn = &fn;
  f.pc = 0;
  f.slots.assign(static_cast<std::size_t>(fn.num_slots), 0);
  for (std::size_t i = 0; i < args.size() && i < fn.def->params.size(); ++i) {
    const VarRef& p = fn.def->params[i];
    f.slots[static_cast<std::size_t>(p.slot)] = cint::convert(args[i], p.type).bits;
  }
  f.ret_dest = std::move(dest);
  state_.frames.push_back(std::move(f));
}

cint::Value Machine::read(const VarRef& v) const {
  if (v.global) return cint::Value{state_.globals[static_cast<std::size_t>(v.slot)], v.type};
  const Frame& f = state_.frames.back();
  return cint::Value{f.slots[static_cast<std::size_t>(v.slot)], v.type};
}

void Machine::store(Frame& f, const VarRef& v, cint::Value value) {
  std::int64_t bits = cint::convert(value, v.type).bits;
  if (v.global) {
    state_.globals[static_cast<std::size_t>(v.slot)] = bits;
  } else {
    f.slots[static_cast<std::size_t>(v.slot)] = bits;
  }
}

std::optional<cint::Value> Machine::eval(const Expr& e, bool* read_nondet) const {
  return eval_expr(
      e, [&](const VarRef& r) -> std::optional<cint::Value> { return read(r); },
      [&](const Nondet& n) -> std::optional<cint::Value> {
        *read_nondet = true;
        return cint::convert(nondet_(n.site, n.type), n.type);
      });
}

std::optional<cint::Value> Machine::evaluate(const Expr& e) const {
  if (state_.frames.empty()) return std::nullopt;
  return eval_expr(
      e, [&](const VarRef& r) -> std::optional<cint::Value> { return read(r); },
      [](const Nondet&) -> std::optional<cint::Value> { return std::nullopt; });
}

Event Machine::finish(EventKind k, const Instr* at) {
  finished_ = k;
  Event ev;
  ev.kind = k;
  ev.instr = at;
  return ev;
}

Event Machine::step() {
  if (finished_) return finish(*finished_, nullptr);
  while (true) {
    Frame& f = state_.frames.back();
    const Instr& in = f.fn->code[static_cast<std::size_t>(f.pc)];
    if (in.kind == InstrKind::Jump) {
      f.pc = in.target;
      continue;
    }
    Event ev;
    ev.instr = &in;
    bool nd = false;
    switch (in.kind) {
      case InstrKind::Assign: {
        auto v = eval(*in.expr, &nd);
        ev.read_nondet = nd;
        if (!v) return finish(EventKind::Fault, &in);
        if (in.dest) store(f, *in.dest, *v);
        ++f.pc;
        return ev;
      }
      case InstrKind::Branch: {
        auto v = eval(*in.expr, &nd);
        ev.read_nondet = nd;
        if (!v) return finish(EventKind::Fault, &in);
        bool taken = cint::truthy(*v);
        ev.branch = taken;
        f.pc = taken ? in.target : in.target_false;
        return ev;
      }
      case InstrKind::Assume: {
        auto v = eval(*in.expr, &nd);
        ev.read_nondet = nd;
        if (!v) return finish(EventKind::Fault, &in);
        if (!cint::truthy(*v)) return finish(EventKind::AssumeFailed, &in);
        ++f.pc;
        return ev;
      }
      case InstrKind::Halt:
        return finish(EventKind::Halted, &in);
      case InstrKind::Call: {
        std::vector<cint::Value> args;
        for (const auto& a : in.args) {
          auto v = eval(*a, &nd);
          if (!v) return finish(EventKind::Fault, &in);
          args.push_back(*v);
        }
        ev.read_nondet = nd;
        if (state_.frames.size() >= max_depth_) return finish(EventKind::StackOverflow, &in);
        ++f.pc;
        push_frame(prog_.functions.at(in.callee), args, in.dest);
        return ev;
      }
      case InstrKind::Return: {
        std::optional<cint::Value> value;
        if (in.expr) {
          value = eval(*in.expr, &nd);
          ev.read_nondet = nd;
          if (!value) return finish(EventKind::Fault, &in);
          value = cint::convert(*value, f.fn->def->return_type);
        }
        std::optional<VarRef> dest = f.ret_dest;
        state_.frames.pop_back();
        if (state_.frames.empty()) return finish(EventKind::Terminated, &in);
        if (dest) store(state_.frames.back(), *dest, value.value_or(cint::Value{0, cint::kInt}));
        return ev;
      }
      case InstrKind::Jump:
        break;
    }
  }
}

std::optional<cint::Value> evaluate_with(
    const Expr& e, const std::function<std::optional<cint::Value>(const VarRef&)>& lookup) {
  return eval_expr(e, lookup,
                   [](const Nondet&) -> std::optional<cint::Value> { return std::nullopt; });
}

}  // namespace termeval::cparse
