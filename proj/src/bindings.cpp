#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "termeval/cli.hpp"
#include "termeval/evalcore.hpp"
#include "termeval/lasso.hpp"
#include "termeval/oracle.hpp"
#include "termeval/precond.hpp"
#include "termeval/witness.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace termeval;

namespace {

witness::Verdict verdict_arg(const std::string& s) {
  auto v = witness::verdict_from_string(s);
  if (!v) throw py::value_error("verdict must be T, NT or UNK, got '" + s + "'");
  return *v;
}

eval::WitnessStatus status_arg(const std::string& s) {
  if (s == "valid") return eval::WitnessStatus::Valid;
  if (s == "invalid") return eval::WitnessStatus::Invalid;
  if (s == "absent") return eval::WitnessStatus::Absent;
  throw py::value_error("witness status must be valid, invalid or absent");
}

witness::WitnessAutomaton automaton_arg(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw py::value_error("witness is not valid JSON");
  if (j.is_object() && j.contains("witness")) j = j["witness"];
  std::vector<std::string> errors;
  auto w = witness::witness_from_json(j, errors);
  if (!errors.empty()) throw py::value_error("ill-typed witness: " + errors.front());
  return w;
}

std::string feasibility_kind(const lasso::FeasibilityResult& r) {
  if (std::holds_alternative<lasso::ProvenInfinite>(r)) return "proven_infinite";
  if (std::holds_alternative<lasso::BoundedEvidence>(r)) return "bounded_evidence";
  if (std::holds_alternative<lasso::Infeasible>(r)) return "infeasible";
  return "unknown";
}

precond::Backend backend_arg(const std::string& s) {
  if (s == "brute") return precond::Backend::Brute;
  if (s == "smt") return precond::Backend::Smt;
  if (s == "both") return precond::Backend::Both;
  throw py::value_error("backend must be brute, smt or both");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Scoring, witness checking and precondition equivalence for termination oracles";

  m.def(
      "classify",
      [](const std::string& expected, const std::string& predicted, const std::string& witness_status) {
        auto o = eval::classify_sample(verdict_arg(expected), verdict_arg(predicted), status_arg(witness_status));
        return py::make_tuple(std::string(eval::to_string(o)), eval::score_sample(o));
      },
      py::arg("expected"), py::arg("predicted"), py::arg("witness_status") = "absent");

  m.def(
      "svcomp_score",
      [](const std::vector<std::tuple<std::string, std::int64_t, std::uint64_t>>& aggregates) {
        std::vector<eval::CategoryAggregate> a;
        for (const auto& [c, s, n] : aggregates) a.push_back({c, s, n});
        return eval::svcomp_score(a);
      },
      py::arg("aggregates"));

  m.def("pass_at_k", &eval::pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def(
      "pass_at_k_exact",
      [](std::uint64_t n, std::uint64_t c, std::uint64_t k) {
        auto f = eval::pass_at_k_exact(n, c, k);
        return py::make_tuple(f.num, f.den);
      },
      py::arg("n"), py::arg("c"), py::arg("k"));

  m.def(
      "f1_per_class",
      [](const std::vector<std::pair<std::string, std::string>>& outcomes) {
        std::vector<std::pair<witness::Verdict, witness::Verdict>> v;
        for (const auto& [e, p] : outcomes) v.emplace_back(verdict_arg(e), verdict_arg(p));
        auto f = eval::f1_per_class(v);
        return py::make_tuple(f.t.f1, f.nt.f1);
      },
      py::arg("outcomes"));

  m.def(
      "parse_prediction",
      [](const std::string& raw) {
        auto r = witness::parse_prediction(raw);
        if (auto* e = std::get_if<witness::FormatError>(&r)) throw py::value_error(e->message);
        const auto& p = std::get<witness::Prediction>(r);
        json out{{"verdict", std::string(witness::to_string(p.verdict))},
                 {"witness", p.witness ? witness::witness_to_json(*p.witness) : json()},
                 {"witness_errors", p.witness_errors}};
        return out.dump();
      },
      py::arg("raw"));

  m.def(
      "validate_schema",
      [](const std::string& witness_json, std::optional<int> program_lines) {
        std::vector<std::string> out;
        for (const auto& v : witness::validate_schema(automaton_arg(witness_json), program_lines))
          out.push_back(v.to_string());
        return out;
      },
      py::arg("witness_json"), py::arg("program_lines") = std::nullopt);

  m.def(
      "check_witness",
      [](const std::string& source, const std::string& witness_json, std::int64_t domain_lo,
         std::int64_t domain_hi) {
        auto lasso_or = lasso::extract_lasso(automaton_arg(witness_json));
        if (auto* no = std::get_if<lasso::NoLasso>(&lasso_or))
          return std::make_pair(std::string("no_lasso"), no->reason);
        lasso::CheckerConfig cfg;
        cfg.domain_lo = domain_lo;
        cfg.domain_hi = domain_hi;
        lasso::FeasibilityResult r;
        try {
          r = lasso::check_feasibility(cparse::parse_program(source), std::get<lasso::LassoPath>(lasso_or), cfg);
        } catch (const cparse::ParseError& e) {
          throw py::value_error(e.what());
        }
        return std::make_pair(feasibility_kind(r), lasso::describe(r));
      },
      py::arg("source"), py::arg("witness_json"), py::arg("domain_lo") = -64, py::arg("domain_hi") = 64);

  m.def(
      "emit_graphml",
      [](const std::string& witness_json, const std::string& programfile, const std::string& source,
         const std::string& architecture, const std::string& creationtime) {
        witness::ProducerMeta meta;
        meta.creationtime = creationtime;
        try {
          return witness::emit_graphml(automaton_arg(witness_json), {programfile, source, architecture}, meta);
        } catch (const std::invalid_argument& e) {
          throw py::value_error(e.what());
        }
      },
      py::arg("witness_json"), py::arg("programfile"), py::arg("source"), py::arg("architecture") = "32bit",
      py::arg("creationtime") = "");

  m.def(
      "check_equivalence",
      [](const std::string& a, const std::string& b, const std::string& variables, const std::string& backend) {
        auto vars = cli::parse_variable_list(variables);
        precond::ExprPtr ea, eb;
        for (auto [text, slot] : {std::pair{&a, &ea}, std::pair{&b, &eb}}) {
          auto parsed = precond::parse_precondition(*text, &vars);
          if (auto* e = std::get_if<precond::ParseError>(&parsed))
            throw py::value_error("'" + *text + "' at " + std::to_string(e->position) + ": " + e->message);
          *slot = std::get<precond::ExprPtr>(parsed);
        }
        precond::Backend be = backend_arg(backend);
        py::gil_scoped_release release;
        auto r = precond::check_equivalence(*ea, *eb, vars, be);
        std::string kind = std::holds_alternative<precond::Equivalent>(r)     ? "equivalent"
                           : std::holds_alternative<precond::Inequivalent>(r) ? "inequivalent"
                                                                               : "unknown";
        return std::make_pair(kind, precond::describe(r));
      },
      py::arg("a"), py::arg("b"), py::arg("variables"), py::arg("backend") = "brute");

  m.def("extract_answer", &precond::extract_answer, py::arg("raw"));

  m.def("prompt_resource_names", &oracle::prompt_resource_names);
  m.def(
      "prompt_resource", [](const std::string& name) { return std::string(oracle::prompt_resource(name)); },
      py::arg("name"));

  m.def(
      "score",
      [](const std::string& config_path, const std::string& out_dir, const std::string& clock, unsigned jobs) {
        std::ostringstream out, err;
        cli::Context ctx{out, err, clock, jobs};
        int code;
        {
          py::gil_scoped_release release;
          try {
            code = cli::cmd_score(cli::load_config(config_path), out_dir, ctx);
          } catch (const cli::UsageError& e) {
            err << "error: " << e.what() << "\n";
            code = cli::kExitUsage;
          }
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("config_path"), py::arg("out_dir"), py::arg("clock") = "", py::arg("jobs") = 1);
}
