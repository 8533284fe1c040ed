#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fapi/env.hpp"
#include "fapi/mdp.hpp"

namespace fapi {

/// Visit counts C(s,a), successor counts C(s,a,s') (sparse, sorted by s') and
/// reward sums for one client.
class TransitionCounts {
 public:
  struct Successor {
    std::size_t next;
    std::uint64_t count;
    friend bool operator==(const Successor&, const Successor&) = default;
  };

  TransitionCounts() = default;
  TransitionCounts(std::size_t num_states, std::size_t num_actions);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }

  void record(std::size_t s, std::size_t a, std::size_t next, double reward);
  /// Adds raw totals (used by deserialization and deterministic test feeds).
  void add(std::size_t s, std::size_t a, std::size_t next, std::uint64_t count, double reward_sum);
  void merge(const TransitionCounts& other);

  std::uint64_t count(std::size_t s, std::size_t a) const { return count_sa_[s * num_actions_ + a]; }
  std::uint64_t count(std::size_t s, std::size_t a, std::size_t next) const;
  double reward_sum(std::size_t s, std::size_t a) const { return reward_sum_[s * num_actions_ + a]; }
  const std::vector<Successor>& successors(std::size_t s, std::size_t a) const {
    return successors_[s * num_actions_ + a];
  }
  std::uint64_t total() const;

  friend bool operator==(const TransitionCounts&, const TransitionCounts&) = default;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<std::uint64_t> count_sa_;
  std::vector<double> reward_sum_;
  std::vector<std::vector<Successor>> successors_;
};

/// Maximum-likelihood model. Unvisited pairs get a uniform row and R = 0;
/// pairs of states flagged in `absorbing` keep the template's row and reward.
/// Estimated rewards are clamped to [0, r_max].
FiniteMdp estimate_model(const TransitionCounts& counts, const FiniteMdp& template_mdp,
                         const std::vector<bool>& absorbing = {});

struct NoisyEvaluation {
  ValueFn values;
  double realized_delta = 0.0;
};

/// Exact V^pi plus independent uniform noise in [-delta, delta] per state.
NoisyEvaluation noisy_evaluate(const FiniteMdp& mdp, const TabularPolicy& pi, double delta_target,
                               std::uint64_t seed);

struct EpsImprovement {
  TabularPolicy policy;
  double realized_epsilon = 0.0;
  /// Weight on the uniform policy.
  double mixing = 0.0;
};

/// sup_s |T^pi V - T V|.
double improvement_gap(const FiniteMdp& mdp, const TabularPolicy& pi, const ValueFn& v);

/// Largest mix (1 - lambda) greedy + lambda uniform whose gap at V stays
/// within eps_target, found by bisection to 1e-6.
EpsImprovement eps_improve(const FiniteMdp& mdp, const ValueFn& v, double eps_target);

struct Transition {
  std::size_t state;
  std::size_t action;
  double reward;
  std::size_t next_state;
  bool done;
};

struct RolloutOptions {
  std::size_t episodes = 1;
  std::size_t horizon = 1;
  /// Stop early once this many steps have been simulated (0 = unlimited).
  std::size_t step_budget = 0;
  bool keep_trajectories = false;
};

struct RolloutResult {
  TransitionCounts counts;
  /// Mean undiscounted return over completed episodes, in reported units.
  double mean_return = 0.0;
  std::size_t episodes = 0;
  std::size_t steps = 0;
  std::vector<std::vector<Transition>> trajectories;
};

RolloutResult rollout(EpisodicEnv& env, const TabularPolicy& pi, const RolloutOptions& options,
                      std::uint64_t seed);

struct PpoHyper {
  double learning_rate = 1.0;
  double kl_target = 0.01;
  double beta_init = 1.0;
  std::size_t gradient_steps = 10;
  std::size_t visitation_horizon = 64;

  friend bool operator==(const PpoHyper&, const PpoHyper&) = default;
};

struct PpoResult {
  TabularPolicy policy;
  double beta = 1.0;
  double mean_kl = 0.0;
};

/// Per-state softmax surrogate
///   L(theta) = sum_s d(s) [sum_a pi_theta(a|s) A(s,a) - beta KL(pi_old(.|s) || pi_theta(.|s))]
/// with d the normalized visitation of pi_old.
double ppo_surrogate(std::span<const double> logits, const TabularPolicy& pi_old,
                     std::span<const double> advantage, std::span<const double> visitation,
                     double beta);
std::vector<double> ppo_surrogate_gradient(std::span<const double> logits,
                                           const TabularPolicy& pi_old,
                                           std::span<const double> advantage,
                                           std::span<const double> visitation, double beta);
TabularPolicy softmax_policy(std::size_t num_states, std::size_t num_actions,
                             std::span<const double> logits);
/// Mean KL(pi_old || pi) weighted by the visitation d.
double mean_kl(const TabularPolicy& pi_old, const TabularPolicy& pi,
               std::span<const double> visitation);

/// Full-gradient ascent on the surrogate using exact advantages on `model`,
/// then the adaptive rule: beta doubles when KL > 1.5 target and halves
/// when KL < target / 1.5.
PpoResult ppo_kl_update(const FiniteMdp& model, const TabularPolicy& pi, const PpoHyper& hyper,
                        double beta);

struct LearnerOutcome {
  TabularPolicy new_policy;
  ValueFn evaluated_v;
  double realized_delta = 0.0;
  double realized_epsilon = 0.0;
  double mean_return = 0.0;
};

}  // namespace fapi
