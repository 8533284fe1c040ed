#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fapi/bounds.hpp"
#include "fapi/env.hpp"
#include "fapi/envs.hpp"
#include "fapi/imaginary.hpp"
#include "fapi/learner.hpp"
#include "fapi/parallel.hpp"
#include "fapi/record.hpp"
#include "fapi/selection.hpp"

namespace fapi {

enum class LearnerKind { kApi, kPpo };

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

struct FederationConfig {
  std::size_t num_rounds = 10;
  /// K; 0 means every candidate.
  std::size_t clients_per_round = 0;
  /// d; 0 means the whole population.
  std::size_t candidate_size = 0;
  std::size_t local_iterations = 1;
  std::size_t episodes_per_iteration = 1;
  Algorithm algorithm = Algorithm::kWithFpe;
  SelectionStrategy strategy = SelectionStrategy::kFull;
  LearnerKind learner = LearnerKind::kApi;
  /// Per-client targets; a single entry applies to every client.
  std::vector<double> delta_targets;
  std::vector<double> eps_targets;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t episode_horizon = 999;
  /// Cap on simulated steps per local iteration (0 = none).
  std::size_t step_budget = 0;
  std::size_t warmup_episodes = 1;
  std::size_t eval_episodes = 10;
  std::size_t visitation_horizon = 64;
  /// Compute selection metrics on true rather than estimated models.
  bool use_true_models = false;
  /// Score candidates against the full-population advantage field.
  bool population_delta = false;
  PpoHyper ppo;
  double lr_decay = 1.0;

  /// Resolved sizes for a population of n clients.
  std::size_t resolved_d(std::size_t n) const { return candidate_size == 0 ? n : candidate_size; }
  std::size_t resolved_k(std::size_t n) const {
    return clients_per_round == 0 ? resolved_d(n) : clients_per_round;
  }
  void validate(std::size_t num_clients) const;

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

/// The simulated population: true client models plus how to sample them.
struct Federation {
  Ensemble ensemble;
  /// Builds a fresh sampled environment for a client. When empty, the
  /// clients' tabular models are sampled directly.
  std::function<std::unique_ptr<EpisodicEnv>(std::size_t)> make_env;
  /// States whose rows are known to every client (copied into estimates).
  std::vector<bool> absorbing;
  /// Report returns from rollouts instead of mu . V_bar.
  bool sampled_returns = false;

  std::unique_ptr<EpisodicEnv> env(std::size_t client) const;
};

/// Sampled mountain-car population: rollouts come from the continuous
/// cars and returns are reported from rollouts.
Federation make_federation(MountainCarFamily family);

/// q'_m = q_m / sum_{k in C} q_k, aligned with `selected`.
std::vector<double> participant_weights(const std::vector<double>& weights,
                                        const std::vector<std::size_t>& selected);

/// pi(a|s) = sum_k w_k pi_k(a|s).
TabularPolicy aggregate_policies(const std::vector<TabularPolicy>& policies,
                                 const std::vector<double>& weights);

/// Mutable per-client state carried across rounds by model-based learners.
struct ClientState {
  TransitionCounts counts;
  double beta = 1.0;
};

/// Shared helpers and state for a run.
class Runner {
 public:
  Runner(const Federation& federation, const FederationConfig& config);

  /// One round of each variant from the broadcast policy pi^t.
  RoundRecord run_round_shared(std::size_t t, const TabularPolicy& pi);
  RoundRecord run_round_local(std::size_t t, const TabularPolicy& pi);
  RoundRecord run_round_fedpocs(std::size_t t, const TabularPolicy& pi);
  RoundRecord run_round(std::size_t t, const TabularPolicy& pi);

  /// Mean return of a policy across the population.
  double mean_return(std::size_t t, const TabularPolicy& pi) const;

  const std::vector<ClientState>& client_states() const { return states_; }
  const Executor& executor() const { return exec_; }

 private:
  std::vector<std::size_t> sample_candidates(std::size_t t) const;
  SelectionMetrics compute_metrics(const std::vector<std::size_t>& candidates,
                                   const TabularPolicy& pi, bool estimated) const;
  std::vector<std::size_t> choose(std::size_t t, const TabularPolicy& pi,
                                  std::vector<std::size_t>& candidates, SelectionMetrics& metrics,
                                  bool estimated) const;
  double delta_target(std::size_t client) const;
  double eps_target(std::size_t client) const;
  FiniteMdp estimated_model(std::size_t client) const;
  void warm_up();

  const Federation& fed_;
  FederationConfig cfg_;
  Executor exec_;
  std::vector<ClientState> states_;
};

struct ExperimentResult {
  std::vector<RoundRecord> history;
  TabularPolicy final_policy;
  /// Set when a round aborted; history holds the completed rounds.
  std::optional<std::string> failure;
};

/// Starts from the uniform policy and runs cfg.num_rounds rounds. Rounds of
/// the exact-model variants also carry the improvement check against the
/// matching bound.
ExperimentResult run_experiment(const Federation& federation, const FederationConfig& config);

}  // namespace fapi
