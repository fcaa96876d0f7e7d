#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "termeval/cli.hpp"

namespace fs = std::filesystem;
using namespace termeval;

namespace {

std::set<corpus::Category> categories_from(const std::vector<std::string>& names) {
  std::set<corpus::Category> out;
  for (const auto& n : names) {
    std::string_view name = n;
    if (name.starts_with("Termination-")) name.remove_prefix(12);
    auto c = corpus::category_from_string(name);
    if (!c) throw cli::UsageError("unknown category '" + n + "'");
    out.insert(*c);
  }
  return out;
}

precond::Backend backend_from(const std::string& s) {
  if (s == "brute") return precond::Backend::Brute;
  if (s == "smt") return precond::Backend::Smt;
  if (s == "both") return precond::Backend::Both;
  throw cli::UsageError("unknown backend '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harness for termination-prediction oracles on SV-COMP tasks"};
  app.require_subcommand(1);
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::string clock;
  app.add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--clock", clock, "Pin timestamps to this ISO-8601 value");

  auto* ingest = app.add_subcommand("ingest", "Scan a corpus and write its manifest");
  std::string ingest_root, ingest_out = "manifest.json", ingest_excl, ingest_tokens;
  std::vector<std::string> ingest_cats;
  ingest->add_option("root", ingest_root, "Corpus root (sv-benchmarks/c)")->required();
  ingest->add_option("-o,--out", ingest_out, "Manifest path");
  ingest->add_option("--categories", ingest_cats, "Categories to load")->delimiter(',');
  ingest->add_option("--exclusions", ingest_excl, "Exclusion list");
  ingest->add_option("--tokens", ingest_tokens, "Token count sidecar JSON");

  auto* run = app.add_subcommand("run", "Generate or replay model completions");
  std::string run_config;
  run->add_option("-c,--config", run_config, "Run config (TOML)")->required();

  auto* check = app.add_subcommand("check-witness", "Validate one witness against a program");
  std::string program, witness_file, emit, arch = "32bit", validator_root;
  std::int64_t domain_lo = -64, domain_hi = 64;
  check->add_option("program", program, "C source")->required();
  check->add_option("witness", witness_file, "Witness JSON or a model answer")->required();
  check->add_option("--emit", emit, "Write the witness as GraphML");
  check->add_option("--arch", arch, "32bit or 64bit")->check(CLI::IsMember({"32bit", "64bit"}));
  check->add_option("--validator-root", validator_root, "Directory with Ultimate.py");
  check->add_option("--domain-lo", domain_lo, "Lowest nondet value tried");
  check->add_option("--domain-hi", domain_hi, "Highest nondet value tried");

  auto* score = app.add_subcommand("score", "Score cached generations");
  std::string score_config, score_out;
  score->add_option("-c,--config", score_config, "Run config (TOML)")->required();
  score->add_option("-o,--out", score_out, "Report directory; default is the run directory");

  auto* pre = app.add_subcommand("precond", "Pass@k of preconditions, or one equivalence check");
  std::string pre_config, pre_out, pre_vars, pre_backend = "both";
  std::vector<std::string> pair;
  pre->add_option("-c,--config", pre_config, "Run config (TOML)");
  pre->add_option("-o,--out", pre_out, "Report directory; default is the run directory");
  pre->add_option("--pair", pair, "Compare two expressions")->expected(2);
  pre->add_option("--vars", pre_vars, "Variables for --pair, e.g. i:int,x:unsigned");
  pre->add_option("--backend", pre_backend, "brute, smt or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  cli::Context ctx{std::cout, std::cerr, clock, jobs};
  try {
    if (*ingest) {
      cli::IngestOptions o;
      if (!ingest_cats.empty()) o.categories = categories_from(ingest_cats);
      if (!ingest_excl.empty()) o.exclusions = ingest_excl;
      if (!ingest_tokens.empty()) o.token_sidecar = ingest_tokens;
      return cli::cmd_ingest(ingest_root, ingest_out, o, ctx);
    }
    if (*run) return cli::cmd_run(cli::load_config(run_config), ctx);
    if (*check) {
      cli::CheckWitnessOptions o;
      if (!emit.empty()) o.emit = emit;
      o.architecture = arch;
      o.checker.domain_lo = domain_lo;
      o.checker.domain_hi = domain_hi;
      if (domain_lo > domain_hi) throw cli::UsageError("--domain-lo exceeds --domain-hi");
      if (!validator_root.empty()) {
        lasso::ValidatorConfig v;
        v.validator_root = validator_root;
        o.validator = v;
      }
      return cli::cmd_check_witness(program, witness_file, o, ctx);
    }
    if (*score) {
      auto cfg = cli::load_config(score_config);
      fs::path out = score_out.empty() ? oracle::RunCache(cfg.output_dir, cfg.run_id).run_dir() : fs::path(score_out);
      return cli::cmd_score(cfg, out, ctx);
    }
    if (*pre) {
      if (!pair.empty()) {
        if (pre_vars.empty()) throw cli::UsageError("--pair needs --vars");
        precond::EquivalenceConfig ec;
        if (!pre_config.empty()) ec = cli::load_config(pre_config).precond;
        return cli::cmd_precond_pair(pair[0], pair[1], cli::parse_variable_list(pre_vars),
                                     backend_from(pre_backend), ec, ctx);
      }
      if (pre_config.empty()) throw cli::UsageError("precond needs --config or --pair");
      auto cfg = cli::load_config(pre_config);
      fs::path out = pre_out.empty() ? oracle::RunCache(cfg.output_dir, cfg.run_id).run_dir() : fs::path(pre_out);
      return cli::cmd_precond(cfg, out, ctx);
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitFailure;
  }
  return cli::kExitUsage;
}
