#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fapi {

inline constexpr double kProbabilityTolerance = 1e-12;

/// Real vector indexed by state (V, averaged V, imaginary V, V*).
class ValueFn {
 public:
  ValueFn() = default;
  explicit ValueFn(std::size_t num_states, double fill = 0.0) : values_(num_states, fill) {}
  explicit ValueFn(std::vector<double> values) : values_(std::move(values)) {}
  ValueFn(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t s) const { return values_[s]; }
  double& operator[](std::size_t s) { return values_[s]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  double mean() const;

  friend bool operator==(const ValueFn&, const ValueFn&) = default;

 private:
  std::vector<double> values_;
};

double sup_norm(const ValueFn& v);
double sup_distance(const ValueFn& a, const ValueFn& b);

struct TransitionEntry {
  std::size_t next;
  double prob;
  friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};

/// Next-state distribution of one (state, action) pair: a sparse part plus a
/// mass spread evenly over all states. The uniform part keeps maximum-entropy
/// rows of estimated models O(1) in memory and lets policy evaluation treat
/// them as a rank-one update.
class TransitionRow {
 public:
  TransitionRow() = default;
  /// Sorts by next state, merges duplicates and drops exact zeros.
  explicit TransitionRow(std::vector<TransitionEntry> entries, double uniform_mass = 0.0);

  static TransitionRow point(std::size_t next) { return TransitionRow({{next, 1.0}}); }
  static TransitionRow uniform() { return TransitionRow({}, 1.0); }
  static TransitionRow from_dense(std::span<const double> probs);

  std::span<const TransitionEntry> entries() const { return entries_; }
  double uniform_mass() const { return uniform_mass_; }
  double total_mass() const;

  double prob(std::size_t next, std::size_t num_states) const;
  /// E[v(s')] given the precomputed mean of v (needed for the uniform part).
  double expectation(std::span<const double> v, double mean_v) const;
  std::vector<double> dense(std::size_t num_states) const;

  friend bool operator==(const TransitionRow&, const TransitionRow&) = default;

 private:
  std::vector<TransitionEntry> entries_;
  double uniform_mass_ = 0.0;
};

/// Sum over s' of |p(s') - q(s')|.
double l1_distance(const TransitionRow& p, const TransitionRow& q, std::size_t num_states);

/// One client's tabular MDP (S, A, mu, P, R, gamma) with reward bound r_max.
/// Immutable after construction; the constructor validates every invariant.
class FiniteMdp {
 public:
  struct Options {
    /// Require 0 <= R(s,a). Rewards above r_max are always rejected.
    bool require_nonnegative_rewards = true;
  };

  FiniteMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> init_dist,
            std::vector<TransitionRow> transitions, std::vector<double> rewards, double discount,
            double r_max, Options options);
  FiniteMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> init_dist,
            std::vector<TransitionRow> transitions, std::vector<double> rewards, double discount,
            double r_max)
      : FiniteMdp(num_states, num_actions, std::move(init_dist), std::move(transitions),
                  std::move(rewards), discount, r_max, Options{}) {}

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::span<const double> init_dist() const { return init_dist_; }
  /// Row-major [s * |A| + a].
  std::span<const TransitionRow> transitions() const { return transitions_; }
  std::span<const double> rewards() const { return rewards_; }
  const TransitionRow& transition(std::size_t s, std::size_t a) const {
    return transitions_[s * num_actions_ + a];
  }
  double reward(std::size_t s, std::size_t a) const { return rewards_[s * num_actions_ + a]; }
  double prob(std::size_t s, std::size_t a, std::size_t next) const {
    return transition(s, a).prob(next, num_states_);
  }
  double discount() const { return discount_; }
  double r_max() const { return r_max_; }
  const Options& options() const { return options_; }
  /// r_max / (1 - gamma), the bound on every value function.
  double value_bound() const { return r_max_ / (1.0 - discount_); }

  /// R(s,a) + gamma * E[v(s')].
  double backup(std::size_t s, std::size_t a, std::span<const double> v, double mean_v) const {
    return reward(s, a) + discount_ * transition(s, a).expectation(v, mean_v);
  }

  /// Same MDP with a different kernel; the new kernel is validated.
  FiniteMdp with_transitions(std::vector<TransitionRow> transitions) const;

  friend bool operator==(const FiniteMdp& a, const FiniteMdp& b);

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> init_dist_;
  std::vector<TransitionRow> transitions_;
  std::vector<double> rewards_;
  double discount_;
  double r_max_;
  Options options_;
};

/// Builds an MDP from a dense row-major P[s][a][s'] tensor (validated, never
/// renormalized).
FiniteMdp dense_mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> init_dist,
                    std::span<const double> transitions, std::vector<double> rewards,
                    double discount, double r_max, FiniteMdp::Options options = {});

/// Explicit renormalization builder: scales each consecutive block of
/// `row_length` entries to sum to one. Rows with zero mass become uniform.
std::vector<double> normalize_rows(std::vector<double> values, std::size_t row_length);

/// Stochastic policy matrix pi(a|s).
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(std::size_t num_states, std::size_t num_actions, std::vector<double> probs);

  static TabularPolicy uniform(std::size_t num_states, std::size_t num_actions);
  static TabularPolicy deterministic(std::size_t num_actions, std::span<const std::size_t> actions);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  double operator()(std::size_t s, std::size_t a) const { return probs_[s * num_actions_ + a]; }
  std::span<const double> row(std::size_t s) const {
    return std::span<const double>(probs_).subspan(s * num_actions_, num_actions_);
  }
  std::span<const double> probs() const { return probs_; }

  friend bool operator==(const TabularPolicy&, const TabularPolicy&) = default;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> probs_;
};

void check_dimensions(const TabularPolicy& pi, const FiniteMdp& mdp);
void check_dimensions(const ValueFn& v, const FiniteMdp& mdp);

/// (T^pi V)(s) = sum_a pi(a|s) (R(s,a) + gamma sum_s' P(s'|s,a) V(s')).
ValueFn bellman_policy_op(const ValueFn& v, const TabularPolicy& pi, const FiniteMdp& mdp);

struct GreedyBackup {
  ValueFn values;
  std::vector<std::size_t> actions;
};

/// (T V)(s) = max_a (...), with the argmax per state. Ties go to the lowest
/// action index.
GreedyBackup bellman_optimal_op(const ValueFn& v, const FiniteMdp& mdp);

/// Q(s,a) = R(s,a) + gamma E[V(s')], row-major.
std::vector<double> action_values(const ValueFn& v, const FiniteMdp& mdp);

/// Solves (I - gamma P^pi) V = R^pi with a sparse LU factorization; uniform
/// row mass enters as a Sherman-Morrison rank-one correction.
/// Throws NumericalFailure if the Bellman residual exceeds 1e-9 * max(1, |V|).
ValueFn exact_policy_evaluation(const TabularPolicy& pi, const FiniteMdp& mdp);

/// Deterministic policy on bellman_optimal_op's argmax.
TabularPolicy greedy_improve(const ValueFn& v, const FiniteMdp& mdp);

/// Jacobi value iteration from the zero vector until |T V - V| <= tol.
ValueFn value_iteration(const FiniteMdp& mdp, double tol, std::size_t max_iterations = 1'000'000);

/// sum_{t=0}^{H} D_t with D_0 = mu and D_{t+1}(s') = sum_{s,a} D_t(s) pi(a|s) P(s'|s,a).
std::vector<double> state_visitation(const TabularPolicy& pi, const FiniteMdp& mdp,
                                     std::size_t horizon);

/// mu . V
double expected_start_value(const ValueFn& v, const FiniteMdp& mdp);

}  // namespace fapi
