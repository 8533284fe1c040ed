// fapi: generate ensembles, run federations, verify bounds, report kappa.
//
// Exit codes: 0 ok, 1 bound violation, 2 config error, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fapi/bounds.hpp"
#include "fapi/config.hpp"
#include "fapi/csv.hpp"
#include "fapi/federation.hpp"
#include "fapi/io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeFailure = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
};

fapi::RunConfig load(const Common& c) {
  fapi::RunConfig cfg = fapi::load_config(c.config_path);
  if (c.seed) {
    cfg.federation.seed = *c.seed;
    cfg.ensemble.seed = *c.seed;
  }
  if (c.threads) cfg.federation.threads = *c.threads;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::filesystem::path out_dir(const fapi::RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  fn(out);
}

int cmd_generate(const Common& c) {
  const fapi::RunConfig cfg = load(c);
  const auto dir = out_dir(cfg);
  if (cfg.env == fapi::EnvKind::kMountainCar) {
    fapi::write_json((dir / "ensemble.json").string(),
                     fapi::mountain_car_to_json({cfg.mountain_car, fapi::resolve_shifts(cfg)}));
  } else {
    fapi::write_json((dir / "ensemble.json").string(),
                     fapi::ensemble_to_json(fapi::gen_random_ensemble(cfg.ensemble)));
  }
  write_file(dir / "config.ini", [&](std::ostream& out) { out << fapi::format_config(cfg); });
  return kOk;
}

// Runs the configured experiment and flushes the round CSVs.
fapi::ExperimentResult run_and_write(const fapi::Federation& fed, const fapi::RunConfig& cfg,
                                     const std::filesystem::path& dir) {
  fapi::ExperimentResult result = fapi::run_experiment(fed, cfg.federation);
  write_file(dir / "history.csv",
             [&](std::ostream& out) { fapi::write_history_csv(out, result.history); });
  write_file(dir / "metrics.csv",
             [&](std::ostream& out) { fapi::write_metrics_csv(out, result.history); });
  if (result.failure) std::cerr << "fapi: run failed: " << *result.failure << "\n";
  return result;
}

int cmd_run(const Common& c) {
  const fapi::RunConfig cfg = load(c);
  const fapi::Executor exec(cfg.federation.threads);
  const fapi::Federation fed = fapi::build_federation(cfg, exec);
  const auto result = run_and_write(fed, cfg, out_dir(cfg));
  return result.failure ? kRuntimeFailure : kOk;
}

// Runs are a pure function of (config, seed), so verification replays the
// run and checks the full records.
int cmd_verify(const Common& c) {
  const fapi::RunConfig cfg = load(c);
  const auto dir = out_dir(cfg);
  const fapi::Executor exec(cfg.federation.threads);
  const fapi::Federation fed = fapi::build_federation(cfg, exec);
  const auto result = run_and_write(fed, cfg, dir);
  if (result.failure) return kRuntimeFailure;
  if (!cfg.verify_enabled) return kOk;
  const fapi::BoundReport report = fapi::verify_history(fed.ensemble, result.history, cfg.verify, exec);
  write_file(dir / "bounds.csv", [&](std::ostream& out) { fapi::write_bounds_csv(out, report); });
  const std::size_t hard = report.violations(false), soft = report.violations(true) - hard;
  std::cerr << "fapi: " << report.entries.size() << " checks, " << hard << " hard and " << soft
            << " soft violations" << (report.asymptotic_skipped ? ", asymptotic check skipped" : "")
            << "\n";
  return report.all_hard_satisfied() ? kOk : kViolation;
}

int cmd_kappa(const Common& c, const std::string& ensemble_path) {
  fapi::Executor exec(c.threads.value_or(1));
  std::optional<fapi::Federation> fed;
  std::string out_path = c.out;
  if (!ensemble_path.empty()) {
    const fapi::Json j = fapi::read_json(ensemble_path);
    if (j.value("kind", "") == "mountain_car") {
      auto rec = fapi::mountain_car_from_json(j);
      fed = fapi::make_federation(fapi::make_mountain_car_family(rec.params, rec.shifts, exec));
    } else {
      fed = fapi::Federation{fapi::ensemble_from_json(j), nullptr, {}, false};
    }
  } else {
    fapi::RunConfig cfg = load(c);
    exec = fapi::Executor(cfg.federation.threads);
    fed = fapi::build_federation(cfg, exec);
  }
  const auto report = fapi::heterogeneity_report(fed->ensemble, exec);
  if (out_path.empty()) {
    fapi::write_kappa_csv(std::cout, report);
  } else {
    std::filesystem::create_directories(out_path);
    write_file(std::filesystem::path(out_path) / "kappa.csv",
               [&](std::ostream& out) { fapi::write_kappa_csv(out, report); });
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config_path, "Config file")->check(CLI::ExistingFile);
  if (config_required) opt->required();
  sub->add_option("--seed", c.seed, "Seed overriding the config");
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated approximate policy iteration simulator"};
  app.require_subcommand(1);
  Common gen, run, ver, kap;
  std::string ensemble_path;
  auto* g = app.add_subcommand("generate", "Write a seeded ensemble");
  add_common(g, gen, true);
  auto* r = app.add_subcommand("run", "Run an experiment and write history and metrics CSVs");
  add_common(r, run, true);
  auto* v = app.add_subcommand("verify", "Run an experiment and check every bound");
  add_common(v, ver, true);
  auto* k = app.add_subcommand("kappa", "Heterogeneity report of an ensemble");
  add_common(k, kap, false);
  k->add_option("--ensemble,ensemble", ensemble_path, "Ensemble file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  if (k->parsed() && ensemble_path.empty() && kap.config_path.empty()) {
    std::cerr << "fapi kappa: give an ensemble file or --config\n";
    return kConfigError;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (r->parsed()) return cmd_run(run);
    if (v->parsed()) return cmd_verify(ver);
    return cmd_kappa(kap, ensemble_path);
  } catch (const fapi::ContractViolation& e) {
    std::cerr << "fapi: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "fapi: " << e.what() << "\n";
    return kRuntimeFailure;
  }
}
