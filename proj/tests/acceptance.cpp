// Acceptance suite. Run with --criterion N (1-9) or with no flag for all;
// prints one PASS/FAIL line per criterion.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "fapi/bounds.hpp"
#include "fapi/config.hpp"
#include "fapi/csv.hpp"
#include "fapi/envs.hpp"
#include "fapi/federation.hpp"
#include "fapi/learner.hpp"
#include "support.hpp"

using namespace fapi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

Federation tabular(Ensemble ens) { return Federation{std::move(ens), nullptr, {}, false}; }

FederationConfig tabular_config(Algorithm alg, std::size_t rounds, double delta, double eps) {
  FederationConfig cfg;
  cfg.algorithm = alg;
  cfg.num_rounds = rounds;
  cfg.delta_targets = {delta};
  cfg.eps_targets = {eps};
  return cfg;
}

RunConfig car_config(const std::string& name, std::uint64_t seed, std::size_t threads) {
  RunConfig cfg = load_config(std::string(FAPI_CONFIG_DIR) + "/" + name);
  cfg.federation.seed = seed;
  cfg.federation.threads = threads;
  return cfg;
}

Outcome homogeneous_degeneration() {
  Stopwatch clock;
  const Ensemble ens = gen_random_ensemble({4, 5, 3, 0.9, 0.0, 2024});
  const auto result = run_experiment(tabular(ens), tabular_config(Algorithm::kWithFpe, 50, 0.0, 0.0));
  if (result.failure) return {false, *result.failure};
  const ValueFn v_star(oracle::evaluate(
      greedy_improve(value_iteration(ens.client(0), 1e-13), ens.client(0)), ens.client(0)));
  std::size_t converged_at = 0;
  double gap = 0.0, worst_bound = 0.0;
  const BoundInputs base = bound_inputs_from(ens, heterogeneity_report(ens));
  for (const auto& rec : result.history) {
    gap = sup_distance(ValueFn(oracle::evaluate(rec.next_policy, ens.client(0))), v_star);
    if (gap <= 1e-8 && converged_at == 0) converged_at = rec.round + 1;
    worst_bound = std::max(worst_bound, final_bound(with_round(base, rec), variant_of(rec)));
  }
  const double secs = clock.seconds();
  const bool pass = converged_at > 0 && gap <= 1e-8 && worst_bound == 0.0 && secs < 1.0;
  return {pass, "gap " + fmt(gap) + " reached 1e-8 at round " + std::to_string(converged_at) +
                    ", final_bound " + fmt(worst_bound) + ", " + fmt(secs) + " s"};
}

Outcome bound_suite() {
  Stopwatch clock;
  std::map<std::string, std::size_t> violations, checks;
  std::size_t runs = 0, failures = 0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(stream_seed(k, 0, 0, Stream::kGenerate, 77));
    EnsembleSpec spec{4, 2 + k % 4, 2 + (k / 4) % 2, 0.5 + 0.45 * rng.uniform(), 0.1 + 0.9 * rng.uniform(), k};
    const Ensemble ens = gen_random_ensemble(spec);
    const auto fed = tabular(ens);
    for (auto alg : {Algorithm::kWithFpe, Algorithm::kWithoutFpe}) {
      for (bool partial : {false, true}) {
        auto cfg = tabular_config(alg, 30, 0.05 * rng.uniform(), 0.05 * rng.uniform());
        cfg.seed = k;
        if (partial) {
          cfg.clients_per_round = 2;
          cfg.strategy = SelectionStrategy::kRandom;
        }
        const auto result = run_experiment(fed, cfg);
        ++runs;
        if (result.failure) {
          ++failures;
          continue;
        }
        VerifyOptions opts;
        opts.max_policies = 0;
        for (const auto& e : verify_history(ens, result.history, opts).entries) {
          if (e.round < 0) continue;
          ++checks[e.name];
          if (!e.satisfied) ++violations[e.name];
        }
      }
    }
  }
  std::size_t total = 0, bad = 0;
  std::string detail;
  for (const auto& [name, n] : checks) {
    total += n;
    const std::size_t v = violations[name];
    bad += v;
    if (v > 0) detail += ", " + name + " " + std::to_string(v) + "/" + std::to_string(n);
  }
  const double secs = clock.seconds();
  return {bad == 0 && failures == 0 && secs < 300.0,
          std::to_string(runs) + " runs, " + std::to_string(total) + " checks, " + std::to_string(bad) +
              " violations" + detail + ", " + std::to_string(failures) + " failed runs, " + fmt(secs) + " s"};
}

Outcome tail_check() {
  std::size_t bad = 0, done = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::size_t S = 4 + k % 3, A = S == 6 ? 4 : 2 + k % 2;
    const Ensemble ens = gen_random_ensemble({3, S, A, 0.9, 0.2 + 0.04 * static_cast<double>(k), 500 + k});
    auto cfg = tabular_config(k % 2 == 0 ? Algorithm::kWithFpe : Algorithm::kWithoutFpe, 40, 0.02, 0.02);
    cfg.seed = k;
    const auto result = run_experiment(tabular(ens), cfg);
    if (result.failure) {
      ++bad;
      continue;
    }
    VerifyOptions opts;
    opts.max_policies = 4096;
    const auto report = verify_history(ens, result.history, opts);
    if (report.asymptotic_skipped) {
      ++bad;
      continue;
    }
    for (const auto& e : report.entries) {
      if (e.name != "asymptotic_gap") continue;
      ++done;
      if (!e.satisfied) ++bad;
      worst_ratio = std::max(worst_ratio, e.lhs / e.rhs);
    }
  }
  return {bad == 0 && done == 20, std::to_string(done) + " runs checked, " + std::to_string(bad) +
                                      " violations, max lhs/rhs " + fmt(worst_ratio)};
}

Outcome kappa_oracle() {
  std::size_t cases = 0;
  double worst = 0.0;
  std::uint64_t seed = 0;
  for (std::size_t S = 1; S <= 4; ++S) {
    for (std::size_t A = 1; A <= 3; ++A) {
      for (std::size_t N = 2; N <= 4; ++N) {
        for (int rep = 0; rep < 5; ++rep) {
          const Ensemble ens = gen_random_ensemble({N, S, A, 0.9, 0.25 * rep, ++seed});
          const FiniteMdp imaginary = build_imaginary(ens);
          for (std::size_t i = 0; i < N; ++i) {
            worst = std::max(worst, std::abs(kappa_to_imaginary(ens, i) -
                                             oracle::kappa_enumerated(ens.client(i), imaginary)));
            for (std::size_t j = 0; j < N; ++j) {
              worst = std::max(worst, std::abs(kappa_pair(ens, i, j) -
                                               oracle::kappa_enumerated(ens.client(i), ens.client(j))));
              ++cases;
            }
          }
        }
      }
    }
  }
  return {worst <= 1e-12, std::to_string(cases) + " pairs, max deviation " + fmt(worst)};
}

// Clients ordered by kappa_nI, exact ties broken by the mean L1 deviation of
// their kernel from the imaginary one over all (s, a).
std::vector<std::size_t> most_heterogeneous(const Ensemble& ens, std::size_t count) {
  const FiniteMdp imaginary = build_imaginary(ens);
  const auto report = heterogeneity_report(ens);
  const std::size_t S = ens.num_states(), A = ens.num_actions();
  std::vector<double> mean_dev(ens.size(), 0.0);
  for (std::size_t n = 0; n < ens.size(); ++n) {
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a)
        mean_dev[n] += l1_distance(ens.client(n).transition(s, a), imaginary.transition(s, a), S);
    mean_dev[n] /= static_cast<double>(S * A);
  }
  std::vector<std::size_t> ids(ens.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
    const double ka = report.kappa_to_imaginary[a], kb = report.kappa_to_imaginary[b];
    if (std::abs(ka - kb) > 1e-12) return ka > kb;
    return mean_dev[a] > mean_dev[b];
  });
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

Outcome selection_concentration() {
  std::size_t slots = 0, hits = 0;
  std::vector<std::size_t> top;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunConfig cfg = car_config("fedpocs_mountain_car.ini", seed, 1);
    const Federation fed = build_federation(cfg);
    if (top.empty()) top = most_heterogeneous(fed.ensemble, 4);
    const auto result = run_experiment(fed, cfg.federation);
    if (result.failure) return {false, *result.failure};
    for (const auto& rec : result.history) {
      for (auto id : rec.selected) {
        ++slots;
        if (std::find(top.begin(), top.end(), id) != top.end()) ++hits;
      }
    }
  }
  const double freq = static_cast<double>(hits) / static_cast<double>(slots);
  std::string ids;
  for (auto id : top) ids += (ids.empty() ? "" : ";") + std::to_string(id);
  return {freq < 4.0 / 12.0, "clients " + ids + " hold " + fmt(freq) + " of " + std::to_string(slots) +
                                 " selection slots (uniform 0.333333)"};
}

Outcome comparative_performance() {
  Stopwatch clock;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    double ret[2];
    int i = 0;
    for (const char* name : {"fedpocs_mountain_car.ini", "fedavg_mountain_car.ini"}) {
      const RunConfig cfg = car_config(name, seed, 1);
      const auto result = run_experiment(build_federation(cfg), cfg.federation);
      if (result.failure) return {false, *result.failure};
      ret[i++] = result.history.back().mean_return;
    }
    if (ret[0] >= ret[1]) ++wins;
    detail += "seed " + std::to_string(seed) + " " + fmt(ret[0]) + " vs " + fmt(ret[1]) + ", ";
  }
  const double secs = clock.seconds();
  return {wins >= 2 && secs < 1200.0, detail + std::to_string(wins) + "/3 wins, " + fmt(secs) + " s"};
}

std::string run_csvs(const Federation& fed, const FederationConfig& cfg, bool bounds) {
  const auto result = run_experiment(fed, cfg);
  std::ostringstream out;
  write_history_csv(out, result.history);
  write_metrics_csv(out, result.history);
  if (bounds) write_bounds_csv(out, verify_history(fed.ensemble, result.history, {}, Executor(cfg.threads)));
  return out.str();
}

Outcome determinism() {
  std::size_t compared = 0, differ = 0;
  const auto fed = tabular(gen_random_ensemble({4, 5, 3, 0.9, 0.6, 31}));
  for (auto alg : {Algorithm::kWithFpe, Algorithm::kWithoutFpe}) {
    auto cfg = tabular_config(alg, 30, 0.05, 0.05);
    cfg.clients_per_round = 2;
    cfg.strategy = SelectionStrategy::kRandom;
    cfg.seed = 5;
    cfg.threads = 1;
    const std::string one = run_csvs(fed, cfg, true);
    cfg.threads = 8;
    ++compared;
    if (run_csvs(fed, cfg, true) != one) ++differ;
  }
  for (const char* name : {"fedpocs_mountain_car.ini", "fedavg_mountain_car.ini"}) {
    RunConfig cfg = car_config(name, 1, 1);
    cfg.federation.num_rounds = 10;
    const Federation fed_one = build_federation(cfg, Executor(1));
    const std::string one = run_csvs(fed_one, cfg.federation, false);
    cfg.federation.threads = 8;
    const Federation fed_many = build_federation(cfg, Executor(8));
    ++compared;
    if (run_csvs(fed_many, cfg.federation, false) != one) ++differ;
  }
  return {differ == 0, std::to_string(compared) + " runs compared at 1 and 8 threads, " +
                           std::to_string(differ) + " differ"};
}

Outcome gradient_check() {
  std::mt19937_64 g(8);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t S = 1 + rep % 5, A = 2 + rep % 4;
    const TabularPolicy old = oracle::random_policy(g, S, A);
    std::vector<double> logits(S * A), adv(S * A), d(S);
    for (double& x : logits) x = z(g);
    for (double& x : adv) x = z(g);
    for (double& x : d) x = u(g);
    const double beta = 2.0 * u(g);
    const auto grad = ppo_surrogate_gradient(logits, old, adv, d, beta);
    double diff = 0.0, norm_g = 0.0, norm_fd = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double h = 1e-5;
      auto plus = logits, minus = logits;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (ppo_surrogate(plus, old, adv, d, beta) - ppo_surrogate(minus, old, adv, d, beta)) / (2 * h);
      diff += (fd - grad[i]) * (fd - grad[i]);
      norm_g += grad[i] * grad[i];
      norm_fd += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(std::max(norm_g, norm_fd)), 1e-300));
  }
  return {worst <= 1e-5, "50 instances, max relative error " + fmt(worst)};
}

Outcome calculator_arithmetic() {
  BoundInputs in;
  in.gamma = 0.9;
  in.r_max = 1.0;
  in.kappa1 = 0.1;
  bool ok = std::abs(eval_gap_bound(in) - 9.0) <= 1e-12;
  ok = ok && std::abs(improvement_bound_shared(in) - 1.8) <= 1e-12;
  ok = ok && std::abs(api_error_bound(0.1, 0.05, 0.9) - 19.0) <= 1e-12;
  in.kappa2 = 0.1;
  in.delta_bar = 0.05;
  in.epsilon_bar = 0.01;
  ok = ok && std::abs(improvement_bound_local(in) - 17.29) <= 1e-12;

  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t N = 1 + rep % 6;
    BoundInputs r;
    r.gamma = 0.05 + 0.9 * u(g);
    r.r_max = 3.0 * u(g);
    r.population_weights = oracle::random_simplex(g, N);
    r.kappa_pairwise.assign(N * N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i + 1; j < N; ++j) r.kappa_pairwise[i * N + j] = r.kappa_pairwise[j * N + i] = 2 * u(g);
    for (std::size_t i = 0; i < N; ++i) {
      r.kappa_to_imaginary.push_back(2 * u(g));
      r.delta.push_back(u(g));
      r.epsilon.push_back(u(g));
      if (u(g) < 0.6 || (i + 1 == N && r.participants.empty())) r.participants.push_back(i);
    }
    r.participant_weights = oracle::random_simplex(g, r.participants.size());
    r.kappa1 = 2 * u(g);
    r.kappa2 = 2 * u(g);
    r.delta_bar = u(g);
    r.epsilon_bar = u(g);
    const double composed = final_bound(r, BoundVariant::kLocalPartial);
    worst = std::max(worst, std::abs(final_bound_expanded(r) - composed) / std::max(std::abs(composed), 1e-300));
  }
  return {ok && worst <= 1e-10, std::string(ok ? "examples match" : "example mismatch") +
                                    ", expansion max relative error " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{
      homogeneous_degeneration, bound_suite, tail_check, kappa_oracle, selection_concentration,
      comparative_performance, determinism, gradient_check, calculator_arithmetic};
  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    if (only != 0 && c != only) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %d: %s (%s)\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
