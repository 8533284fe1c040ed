#include "fapi/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fapi/errors.hpp"
#include "fapi/rng.hpp"

namespace fapi {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kWithFpe: return "fapi_with_fpe";
    case Algorithm::kWithoutFpe: return "fapi_without_fpe";
    case Algorithm::kFedPocs: return "fedpocs";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fapi_with_fpe") return Algorithm::kWithFpe;
  if (name == "fapi_without_fpe") return Algorithm::kWithoutFpe;
  if (name == "fedpocs") return Algorithm::kFedPocs;
  throw ContractViolation("unknown algorithm '" + std::string(name) + "'");
}

std::string_view to_string(LearnerKind kind) {
  return kind == LearnerKind::kApi ? "api" : "ppo";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "api") return LearnerKind::kApi;
  if (name == "ppo") return LearnerKind::kPpo;
  throw ContractViolation("unknown learner '" + std::string(name) + "'");
}

void FederationConfig::validate(std::size_t num_clients) const {
  require(num_clients >= 1, "federation: empty population");
  const std::size_t d = resolved_d(num_clients), k = resolved_k(num_clients);
  require(d <= num_clients, "federation: candidate size d exceeds N");
  require(k >= 1 && k <= d, "federation: participants K must satisfy 1 <= K <= d");
  require(local_iterations >= 1, "federation: local iterations I must be >= 1");
  require(episodes_per_iteration >= 1, "federation: episodes per iteration E must be >= 1");
  require(algorithm == Algorithm::kFedPocs || local_iterations == 1,
          "federation: exact-model variants run one local iteration per round");
  require(threads >= 1, "federation: threads must be >= 1");
  require(episode_horizon >= 1, "federation: episode horizon must be >= 1");
  require(eval_episodes >= 1, "federation: eval episodes must be >= 1");
  for (const auto* targets : {&delta_targets, &eps_targets}) {
    require(targets->size() <= 1 || targets->size() == num_clients,
            "federation: per-client targets need 1 or N entries");
    for (double x : *targets) require(x >= 0.0 && std::isfinite(x), "federation: negative noise target");
  }
  require(ppo.learning_rate > 0.0 && ppo.kl_target > 0.0 && ppo.beta_init > 0.0,
          "federation: PPO rates must be positive");
  require(ppo.gradient_steps >= 1, "federation: PPO gradient steps must be >= 1");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "federation: learning rate decay must lie in (0, 1]");
}

std::unique_ptr<EpisodicEnv> Federation::env(std::size_t client) const {
  if (make_env) return make_env(client);
  return std::make_unique<TabularEnv>(ensemble.client(client));
}

Federation make_federation(MountainCarFamily family) {
  auto shared = std::make_shared<const MountainCarFamily>(std::move(family));
  Federation fed{shared->ensemble, nullptr, shared->absorbing, true};
  fed.make_env = [shared](std::size_t client) { return shared->make_env(client); };
  return fed;
}

std::vector<double> participant_weights(const std::vector<double>& weights,
                                        const std::vector<std::size_t>& selected) {
  require(!selected.empty(), "participant_weights: empty participant set");
  double total = 0.0;
  for (std::size_t m : selected) {
    require(m < weights.size(), "participant_weights: client out of range");
    total += weights[m];
  }
  require(total > 0.0, "participant_weights: participants carry no weight");
  std::vector<double> out;
  out.reserve(selected.size());
  for (std::size_t m : selected) out.push_back(weights[m] / total);
  return out;
}

TabularPolicy aggregate_policies(const std::vector<TabularPolicy>& policies,
                                 const std::vector<double>& weights) {
  require(!policies.empty(), "aggregate_policies: empty participant set");
  require(policies.size() == weights.size(), "aggregate_policies: weight count mismatch");
  const std::size_t S = policies.front().num_states(), A = policies.front().num_actions();
  std::vector<double> probs(S * A, 0.0);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    require(policies[k].num_states() == S && policies[k].num_actions() == A,
            "aggregate_policies: dimension mismatch");
    const auto p = policies[k].probs();
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] += weights[k] * p[i];
  }
  return TabularPolicy(S, A, std::move(probs));
}

Runner::Runner(const Federation& federation, const FederationConfig& config)
    : fed_(federation), cfg_(config), exec_(config.threads) {
  cfg_.validate(fed_.ensemble.size());
  if (cfg_.algorithm == Algorithm::kFedPocs) {
    const std::size_t N = fed_.ensemble.size();
    states_.resize(N);
    for (auto& st : states_) {
      st.counts = TransitionCounts(fed_.ensemble.num_states(), fed_.ensemble.num_actions());
      st.beta = cfg_.ppo.beta_init;
    }
    warm_up();
  }
}

double Runner::delta_target(std::size_t client) const {
  if (cfg_.delta_targets.empty()) return 0.0;
  return cfg_.delta_targets.size() == 1 ? cfg_.delta_targets[0] : cfg_.delta_targets[client];
}

double Runner::eps_target(std::size_t client) const {
  if (cfg_.eps_targets.empty()) return 0.0;
  return cfg_.eps_targets.size() == 1 ? cfg_.eps_targets[0] : cfg_.eps_targets[client];
}

FiniteMdp Runner::estimated_model(std::size_t client) const {
  return estimate_model(states_[client].counts, fed_.ensemble.client(client), fed_.absorbing);
}

void Runner::warm_up() {
  const TabularPolicy uniform =
      TabularPolicy::uniform(fed_.ensemble.num_states(), fed_.ensemble.num_actions());
  RolloutOptions opts;
  opts.episodes = cfg_.warmup_episodes;
  opts.horizon = cfg_.episode_horizon;
  opts.step_budget = cfg_.step_budget;
  if (cfg_.warmup_episodes == 0) return;
  exec_.parallel_for(states_.size(), [&](std::size_t n) {
    auto env = fed_.env(n);
    states_[n].counts.merge(
        rollout(*env, uniform, opts, stream_seed(cfg_.seed, 0, n, Stream::kWarmup)).counts);
  });
}

std::vector<std::size_t> Runner::sample_candidates(std::size_t t) const {
  const std::size_t N = fed_.ensemble.size(), d = cfg_.resolved_d(N);
  std::vector<std::size_t> ids;
  if (d == N) {
    ids.resize(N);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
  } else {
    ids = sample_without_replacement(N, d, stream_seed(cfg_.seed, t, 0, Stream::kCandidates));
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

SelectionMetrics Runner::compute_metrics(const std::vector<std::size_t>& candidates,
                                         const TabularPolicy& pi, bool estimated) const {
  auto metrics_for = [&](const std::vector<std::size_t>& ids) {
    std::vector<CandidateMetrics> out(ids.size());
    exec_.parallel_for(ids.size(), [&](std::size_t i) {
      const std::size_t n = ids[i];
      if (estimated) {
        out[i] = candidate_metrics(n, pi, estimated_model(n), cfg_.visitation_horizon);
      } else {
        out[i] = candidate_metrics(n, pi, fed_.ensemble.client(n), cfg_.visitation_horizon);
      }
    });
    return out;
  };
  SelectionMetrics metrics;
  metrics.candidates = metrics_for(candidates);
  if (cfg_.population_delta) {
    std::vector<std::size_t> all(fed_.ensemble.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    metrics.delta = fedpocs_delta_population(metrics.candidates, metrics_for(all),
                                             fed_.ensemble.weights());
  } else {
    std::vector<double> q;
    q.reserve(candidates.size());
    for (std::size_t n : candidates) q.push_back(fed_.ensemble.weight(n));
    metrics.delta = fedpocs_delta(metrics.candidates, q);
  }
  return metrics;
}

std::vector<std::size_t> Runner::choose(std::size_t t, const TabularPolicy& pi,
                                        std::vector<std::size_t>& candidates,
                                        SelectionMetrics& metrics, bool estimated) const {
  candidates = sample_candidates(t);
  metrics = compute_metrics(candidates, pi, estimated);
  return select(cfg_.strategy, metrics, cfg_.resolved_k(fed_.ensemble.size()),
                stream_seed(cfg_.seed, t, 0, Stream::kSelect));
}

namespace {

RoundRecord start_record(std::size_t t, Algorithm algorithm, const TabularPolicy& pi,
                         std::size_t population) {
  RoundRecord rec;
  rec.round = t;
  rec.algorithm = algorithm;
  rec.policy = pi;
  rec.client_delta.assign(population, 0.0);
  rec.client_epsilon.assign(population, 0.0);
  return rec;
}

void finish_record(RoundRecord& rec, const Ensemble& ens) {
  std::vector<TabularPolicy> policies;
  policies.reserve(rec.outcomes.size());
  for (const auto& o : rec.outcomes) policies.push_back(o.new_policy);
  rec.next_policy = aggregate_policies(policies, rec.participant_weights);
  rec.full_participation = rec.selected.size() == ens.size();
}

}  // namespace

RoundRecord Runner::run_round_shared(std::size_t t, const TabularPolicy& pi) {
  const Ensemble& ens = fed_.ensemble;
  RoundRecord rec = start_record(t, Algorithm::kWithFpe, pi, ens.size());
  rec.selected = choose(t, pi, rec.candidates, rec.metrics, false);
  rec.participant_weights = participant_weights(ens.weights(), rec.selected);
  const std::size_t K = rec.selected.size();

  std::vector<NoisyEvaluation> evals(K);
  exec_.parallel_for(K, [&](std::size_t i) {
    const std::size_t m = rec.selected[i];
    evals[i] = noisy_evaluate(ens.client(m), pi, delta_target(m),
                              stream_seed(cfg_.seed, t, m, Stream::kEvaluate));
  });
  std::vector<ValueFn> values;
  values.reserve(K);
  for (const auto& e : evals) values.push_back(e.values);
  const ValueFn vbar = weighted_average(values, rec.participant_weights);

  rec.outcomes.resize(K);
  exec_.parallel_for(K, [&](std::size_t i) {
    const std::size_t m = rec.selected[i];
    EpsImprovement imp = eps_improve(ens.client(m), vbar, eps_target(m));
    auto& o = rec.outcomes[i];
    o.new_policy = std::move(imp.policy);
    o.evaluated_v = evals[i].values;
    o.realized_delta = evals[i].realized_delta;
    o.realized_epsilon = imp.realized_epsilon;
  });
  for (std::size_t i = 0; i < K; ++i) {
    rec.client_delta[rec.selected[i]] = rec.outcomes[i].realized_delta;
    rec.client_epsilon[rec.selected[i]] = rec.outcomes[i].realized_epsilon;
  }
  rec.server_value = vbar;
  finish_record(rec, ens);
  rec.mean_return = mean_return(t, rec.next_policy);
  return rec;
}

RoundRecord Runner::run_round_local(std::size_t t, const TabularPolicy& pi) {
  const Ensemble& ens = fed_.ensemble;
  const std::size_t N = ens.size();
  RoundRecord rec = start_record(t, Algorithm::kWithoutFpe, pi, N);
  rec.selected = choose(t, pi, rec.candidates, rec.metrics, false);
  rec.participant_weights = participant_weights(ens.weights(), rec.selected);
  const std::size_t K = rec.selected.size();

  rec.outcomes.resize(K);
  exec_.parallel_for(K, [&](std::size_t i) {
    const std::size_t m = rec.selected[i];
    NoisyEvaluation ev = noisy_evaluate(ens.client(m), pi, delta_target(m),
                                        stream_seed(cfg_.seed, t, m, Stream::kEvaluate));
    EpsImprovement imp = eps_improve(ens.client(m), ev.values, eps_target(m));
    auto& o = rec.outcomes[i];
    o.new_policy = std::move(imp.policy);
    o.evaluated_v = std::move(ev.values);
    o.realized_delta = ev.realized_delta;
    o.realized_epsilon = imp.realized_epsilon;
  });

  // Telemetry value: participants' estimates, exact values elsewhere.
  std::vector<ValueFn> values(N);
  exec_.parallel_for(N, [&](std::size_t n) {
    const auto it = std::find(rec.selected.begin(), rec.selected.end(), n);
    if (it == rec.selected.end()) values[n] = exact_policy_evaluation(pi, ens.client(n));
  });
  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t m = rec.selected[i];
    values[m] = rec.outcomes[i].evaluated_v;
    rec.client_delta[m] = rec.outcomes[i].realized_delta;
    rec.client_epsilon[m] = rec.outcomes[i].realized_epsilon;
  }
  rec.server_value = weighted_average(values, ens.weights());
  finish_record(rec, ens);
  rec.mean_return = mean_return(t, rec.next_policy);
  return rec;
}

RoundRecord Runner::run_round_fedpocs(std::size_t t, const TabularPolicy& pi) {
  const Ensemble& ens = fed_.ensemble;
  RoundRecord rec = start_record(t, Algorithm::kFedPocs, pi, ens.size());
  rec.selected = choose(t, pi, rec.candidates, rec.metrics, !cfg_.use_true_models);
  rec.participant_weights = participant_weights(ens.weights(), rec.selected);
  const std::size_t K = rec.selected.size();

  PpoHyper hyper = cfg_.ppo;
  hyper.learning_rate *= std::pow(cfg_.lr_decay, static_cast<double>(t));
  hyper.visitation_horizon = cfg_.visitation_horizon;
  RolloutOptions opts;
  opts.episodes = cfg_.episodes_per_iteration;
  opts.horizon = cfg_.episode_horizon;
  opts.step_budget = cfg_.step_budget;

  rec.outcomes.resize(K);
  exec_.parallel_for(K, [&](std::size_t i) {
    const std::size_t m = rec.selected[i];
    ClientState& st = states_[m];
    auto env = fed_.env(m);
    TabularPolicy p = pi;
    TabularPolicy evaluated = pi;
    ValueFn v;
    double returns = 0.0;
    for (std::size_t it = 0; it < cfg_.local_iterations; ++it) {
      const RolloutResult r = rollout(*env, p, opts, stream_seed(cfg_.seed, t, m, Stream::kRollout, it));
      returns += r.mean_return;
      st.counts.merge(r.counts);
      const FiniteMdp model = estimated_model(m);
      v = exact_policy_evaluation(p, model);
      evaluated = p;
      if (cfg_.learner == LearnerKind::kPpo) {
        PpoResult res = ppo_kl_update(model, p, hyper, st.beta);
        p = std::move(res.policy);
        st.beta = res.beta;
      } else {
        p = eps_improve(model, v, eps_target(m)).policy;
      }
    }
    // Errors are measured against the client's true model.
    const FiniteMdp& truth = ens.client(m);
    auto& o = rec.outcomes[i];
    o.realized_delta = sup_distance(v, exact_policy_evaluation(evaluated, truth));
    o.realized_epsilon = improvement_gap(truth, p, v);
    o.new_policy = std::move(p);
    o.evaluated_v = std::move(v);
    o.mean_return = returns / static_cast<double>(cfg_.local_iterations);
  });
  for (std::size_t i = 0; i < K; ++i) {
    rec.client_delta[rec.selected[i]] = rec.outcomes[i].realized_delta;
    rec.client_epsilon[rec.selected[i]] = rec.outcomes[i].realized_epsilon;
  }
  finish_record(rec, ens);
  rec.mean_return = mean_return(t, rec.next_policy);
  return rec;
}

RoundRecord Runner::run_round(std::size_t t, const TabularPolicy& pi) {
  switch (cfg_.algorithm) {
    case Algorithm::kWithFpe: return run_round_shared(t, pi);
    case Algorithm::kWithoutFpe: return run_round_local(t, pi);
    case Algorithm::kFedPocs: return run_round_fedpocs(t, pi);
  }
  throw ContractViolation("run_round: unknown algorithm");
}

double Runner::mean_return(std::size_t t, const TabularPolicy& pi) const {
  const Ensemble& ens = fed_.ensemble;
  if (!fed_.sampled_returns) {
    return expected_start_value(averaged_value(ens, pi, exec_), ens.client(0));
  }
  RolloutOptions opts;
  opts.episodes = cfg_.eval_episodes;
  opts.horizon = cfg_.episode_horizon;
  std::vector<double> returns(ens.size());
  exec_.parallel_for(ens.size(), [&](std::size_t n) {
    auto env = fed_.env(n);
    returns[n] = rollout(*env, pi, opts, stream_seed(cfg_.seed, t, n, Stream::kReturn)).mean_return;
  });
  double total = 0.0;
  for (std::size_t n = 0; n < ens.size(); ++n) total += ens.weight(n) * returns[n];
  return total;
}

ExperimentResult run_experiment(const Federation& federation, const FederationConfig& config) {
  Runner runner(federation, config);
  const Ensemble& ens = federation.ensemble;
  ExperimentResult result;
  result.final_policy = TabularPolicy::uniform(ens.num_states(), ens.num_actions());
  if (config.num_rounds == 0) return result;

  const bool exact = config.algorithm != Algorithm::kFedPocs;
  std::optional<BoundInputs> base;
  std::optional<FiniteMdp> imaginary;
  try {
    if (exact) {
      base = bound_inputs_from(ens, heterogeneity_report(ens, runner.executor()));
      imaginary.emplace(build_imaginary(ens));
    }
    for (std::size_t t = 0; t < config.num_rounds; ++t) {
      RoundRecord rec = runner.run_round(t, result.final_policy);
      if (exact && rec.server_value) {
        ImprovementCheck check;
        check.lhs = improvement_gap(*imaginary, rec.next_policy, *rec.server_value);
        check.rhs = improvement_bound(with_round(*base, rec), variant_of(rec));
        check.ok = check.lhs <= check.rhs + kBoundSlack;
        rec.improvement = check;
      }
      result.final_policy = rec.next_policy;
      result.history.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    result.failure = e.what();
  }
  return result;
}

}  // namespace fapi
