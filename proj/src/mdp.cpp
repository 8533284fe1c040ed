#include "fapi/mdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fapi/errors.hpp"

namespace fapi {

double ValueFn::mean() const {
  if (values_.empty()) return 0.0;
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

double sup_norm(const ValueFn& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double sup_distance(const ValueFn& a, const ValueFn& b) {
  require(a.size() == b.size(), "sup_distance: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TransitionRow::TransitionRow(std::vector<TransitionEntry> entries, double uniform_mass)
    : uniform_mass_(uniform_mass) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const TransitionEntry& x, const TransitionEntry& y) { return x.next < y.next; });
  entries_.reserve(entries.size());
  for (const auto& e : entries) {
    if (!entries_.empty() && entries_.back().next == e.next) {
      entries_.back().prob += e.prob;
    } else {
      entries_.push_back(e);
    }
  }
  std::erase_if(entries_, [](const TransitionEntry& e) { return e.prob == 0.0; });
}

TransitionRow TransitionRow::from_dense(std::span<const double> probs) {
  std::vector<TransitionEntry> entries;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] != 0.0) entries.push_back({i, probs[i]});
  }
  return TransitionRow(std::move(entries));
}

double TransitionRow::total_mass() const {
  double total = uniform_mass_;
  for (const auto& e : entries_) total += e.prob;
  return total;
}

double TransitionRow::prob(std::size_t next, std::size_t num_states) const {
  double p = uniform_mass_ / static_cast<double>(num_states);
  auto it = std::lower_bound(entries_.begin(), entries_.end(), next,
                             [](const TransitionEntry& e, std::size_t n) { return e.next < n; });
  if (it != entries_.end() && it->next == next) p += it->prob;
  return p;
}

double TransitionRow::expectation(std::span<const double> v, double mean_v) const {
  double acc = uniform_mass_ * mean_v;
  for (const auto& e : entries_) acc += e.prob * v[e.next];
  return acc;
}

std::vector<double> TransitionRow::dense(std::size_t num_states) const {
  std::vector<double> out(num_states, uniform_mass_ / static_cast<double>(num_states));
  for (const auto& e : entries_) out[e.next] += e.prob;
  return out;
}

double l1_distance(const TransitionRow& p, const TransitionRow& q, std::size_t num_states) {
  const double base = (p.uniform_mass() - q.uniform_mass()) / static_cast<double>(num_states);
  auto pe = p.entries();
  auto qe = q.entries();
  std::size_t i = 0, j = 0, touched = 0;
  double total = 0.0;
  while (i < pe.size() || j < qe.size()) {
    double diff = base;
    if (j >= qe.size() || (i < pe.size() && pe[i].next < qe[j].next)) {
      diff += pe[i++].prob;
    } else if (i >= pe.size() || qe[j].next < pe[i].next) {
      diff -= qe[j++].prob;
    } else {
      diff += pe[i++].prob - qe[j++].prob;
    }
    total += std::abs(diff);
    ++touched;
  }
  total += static_cast<double>(num_states - touched) * std::abs(base);
  return total;
}

namespace {

void validate_distribution(std::span<const double> probs, const std::string& what) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation(what + ": negative or non-finite entry");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw ContractViolation(what + ": sums to " + std::to_string(total));
  }
}

void validate_row(const TransitionRow& row, std::size_t num_states, const std::string& what) {
  if (!(row.uniform_mass() >= 0.0) || !std::isfinite(row.uniform_mass())) {
    throw ContractViolation(what + ": invalid uniform mass");
  }
  for (const auto& e : row.entries()) {
    if (e.next >= num_states) throw ContractViolation(what + ": next state out of range");
    if (!(e.prob >= 0.0) || !std::isfinite(e.prob)) {
      throw ContractViolation(what + ": negative or non-finite probability");
    }
  }
  if (std::abs(row.total_mass() - 1.0) > kProbabilityTolerance) {
    throw ContractViolation(what + ": row sums to " + std::to_string(row.total_mass()));
  }
}

}  // namespace

FiniteMdp::FiniteMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> init_dist,
                     std::vector<TransitionRow> transitions, std::vector<double> rewards,
                     double discount, double r_max, Options options)
    : num_states_(num_states),
      num_actions_(num_actions),
      init_dist_(std::move(init_dist)),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      discount_(discount),
      r_max_(r_max),
      options_(options) {
  require(num_states_ > 0 && num_actions_ > 0, "FiniteMdp: empty state or action set");
  require(init_dist_.size() == num_states_, "FiniteMdp: init_dist size mismatch");
  require(transitions_.size() == num_states_ * num_actions_, "FiniteMdp: transitions size mismatch");
  require(rewards_.size() == num_states_ * num_actions_, "FiniteMdp: rewards size mismatch");
  require(discount_ > 0.0 && discount_ < 1.0, "FiniteMdp: discount must lie in (0, 1)");
  require(r_max_ >= 0.0 && std::isfinite(r_max_), "FiniteMdp: r_max must be finite and >= 0");
  validate_distribution(init_dist_, "FiniteMdp: init_dist");
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    validate_row(transitions_[i], num_states_,
                 "FiniteMdp: transition (" + std::to_string(i / num_actions_) + "," +
                     std::to_string(i % num_actions_) + ")");
  }
  for (double r : rewards_) {
    require(std::isfinite(r), "FiniteMdp: non-finite reward");
    require(r <= r_max_, "FiniteMdp: reward exceeds r_max");
    if (options_.require_nonnegative_rewards) require(r >= 0.0, "FiniteMdp: negative reward");
  }
}

FiniteMdp FiniteMdp::with_transitions(std::vector<TransitionRow> transitions) const {
  return FiniteMdp(num_states_, num_actions_, init_dist_, std::move(transitions), rewards_,
                   discount_, r_max_, options_);
}

bool operator==(const FiniteMdp& a, const FiniteMdp& b) {
  return a.num_states_ == b.num_states_ && a.num_actions_ == b.num_actions_ &&
         a.init_dist_ == b.init_dist_ && a.transitions_ == b.transitions_ &&
         a.rewards_ == b.rewards_ && a.discount_ == b.discount_ && a.r_max_ == b.r_max_;
}

FiniteMdp dense_mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> init_dist,
                    std::span<const double> transitions, std::vector<double> rewards,
                    double discount, double r_max, FiniteMdp::Options options) {
  require(transitions.size() == num_states * num_actions * num_states,
          "dense_mdp: transition tensor size mismatch");
  std::vector<TransitionRow> rows;
  rows.reserve(num_states * num_actions);
  for (std::size_t i = 0; i < num_states * num_actions; ++i) {
    auto dense_row = transitions.subspan(i * num_states, num_states);
    for (double p : dense_row) {
      require(p >= 0.0 && std::isfinite(p), "dense_mdp: negative or non-finite probability");
    }
    rows.push_back(TransitionRow::from_dense(dense_row));
  }
  return FiniteMdp(num_states, num_actions, std::move(init_dist), std::move(rows),
                   std::move(rewards), discount, r_max, options);
}

std::vector<double> normalize_rows(std::vector<double> values, std::size_t row_length) {
  require(row_length > 0 && values.size() % row_length == 0, "normalize_rows: bad row length");
  for (std::size_t start = 0; start < values.size(); start += row_length) {
    auto row = std::span<double>(values).subspan(start, row_length);
    double total = 0.0;
    for (double x : row) {
      require(x >= 0.0 && std::isfinite(x), "normalize_rows: negative or non-finite entry");
      total += x;
    }
    for (double& x : row) x = total > 0.0 ? x / total : 1.0 / static_cast<double>(row_length);
  }
  return values;
}

TabularPolicy::TabularPolicy(std::size_t num_states, std::size_t num_actions,
                             std::vector<double> probs)
    : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
  require(num_states_ > 0 && num_actions_ > 0, "TabularPolicy: empty dimensions");
  require(probs_.size() == num_states_ * num_actions_, "TabularPolicy: size mismatch");
  for (std::size_t s = 0; s < num_states_; ++s) {
    validate_distribution(row(s), "TabularPolicy: row " + std::to_string(s));
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t num_states, std::size_t num_actions) {
  return TabularPolicy(num_states, num_actions,
                       std::vector<double>(num_states * num_actions,
                                           1.0 / static_cast<double>(num_actions)));
}

TabularPolicy TabularPolicy::deterministic(std::size_t num_actions,
                                           std::span<const std::size_t> actions) {
  std::vector<double> probs(actions.size() * num_actions, 0.0);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] < num_actions, "TabularPolicy::deterministic: action out of range");
    probs[s * num_actions + actions[s]] = 1.0;
  }
  return TabularPolicy(actions.size(), num_actions, std::move(probs));
}

void check_dimensions(const TabularPolicy& pi, const FiniteMdp& mdp) {
  require(pi.num_states() == mdp.num_states() && pi.num_actions() == mdp.num_actions(),
          "policy dimensions do not match the MDP");
}

void check_dimensions(const ValueFn& v, const FiniteMdp& mdp) {
  require(v.size() == mdp.num_states(), "value function size does not match the MDP");
}

ValueFn bellman_policy_op(const ValueFn& v, const TabularPolicy& pi, const FiniteMdp& mdp) {
  check_dimensions(v, mdp);
  check_dimensions(pi, mdp);
  const double mean_v = v.mean();
  ValueFn out(mdp.num_states());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double acc = 0.0;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double p = pi(s, a);
      if (p != 0.0) acc += p * mdp.backup(s, a, v.values(), mean_v);
    }
    out[s] = acc;
  }
  return out;
}

GreedyBackup bellman_optimal_op(const ValueFn& v, const FiniteMdp& mdp) {
  check_dimensions(v, mdp);
  const double mean_v = v.mean();
  GreedyBackup out{ValueFn(mdp.num_states()), std::vector<std::size_t>(mdp.num_states(), 0)};
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double best = mdp.backup(s, 0, v.values(), mean_v);
    std::size_t best_a = 0;
    for (std::size_t a = 1; a < mdp.num_actions(); ++a) {
      const double q = mdp.backup(s, a, v.values(), mean_v);
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    out.values[s] = best;
    out.actions[s] = best_a;
  }
  return out;
}

std::vector<double> action_values(const ValueFn& v, const FiniteMdp& mdp) {
  check_dimensions(v, mdp);
  const double mean_v = v.mean();
  std::vector<double> q(mdp.num_states() * mdp.num_actions());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      q[s * mdp.num_actions() + a] = mdp.backup(s, a, v.values(), mean_v);
    }
  }
  return q;
}

ValueFn exact_policy_evaluation(const TabularPolicy& pi, const FiniteMdp& mdp) {
  check_dimensions(pi, mdp);
  using SpMat = Eigen::SparseMatrix<double>;
  const std::size_t n = mdp.num_states();
  const double gamma = mdp.discount();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(n * 4);
  Eigen::VectorXd reward(n);
  Eigen::VectorXd uniform_mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  bool has_uniform = false;
  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<int>(s);
    triplets.emplace_back(si, si, 1.0);
    double r = 0.0;
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const double p = pi(s, a);
      if (p == 0.0) continue;
      r += p * mdp.reward(s, a);
      const auto& row = mdp.transition(s, a);
      for (const auto& e : row.entries()) {
        triplets.emplace_back(si, static_cast<int>(e.next), -gamma * p * e.prob);
      }
      if (row.uniform_mass() != 0.0) {
        uniform_mass[si] += p * row.uniform_mass();
        has_uniform = true;
      }
    }
    reward[si] = r;
  }
  SpMat system(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(system);
  lu.factorize(system);
  if (lu.info() != Eigen::Success) throw NumericalFailure("exact_policy_evaluation: factorization failed");

  // Full operator is (M - gamma u 1^T / n); solve with Sherman-Morrison.
  Eigen::VectorXd correction;
  double denom = 1.0;
  if (has_uniform) {
    correction = lu.solve(gamma * uniform_mass);
    denom = 1.0 - correction.mean();
    if (!(std::abs(denom) > 1e-300)) throw NumericalFailure("exact_policy_evaluation: singular update");
  }
  auto solve = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd x = lu.solve(b);
    if (has_uniform) x += correction * (x.mean() / denom);
    return x;
  };

  Eigen::VectorXd x = solve(reward);
  ValueFn v(std::vector<double>(x.data(), x.data() + n));
  auto residual_of = [&](const ValueFn& candidate) {
    ValueFn backed = bellman_policy_op(candidate, pi, mdp);
    Eigen::VectorXd r(n);
    for (std::size_t s = 0; s < n; ++s) r[static_cast<int>(s)] = backed[s] - candidate[s];
    return r;
  };
  const double tol = 1e-9 * std::max(1.0, sup_norm(v));
  Eigen::VectorXd residual = residual_of(v);
  if (residual.lpNorm<Eigen::Infinity>() > tol) {
    // One step of iterative refinement: (I - gamma P) e = T V - V.
    Eigen::VectorXd e = solve(residual);
    for (std::size_t s = 0; s < n; ++s) v[s] += e[static_cast<int>(s)];
    residual = residual_of(v);
  }
  const double res = residual.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(res) || res > tol) {
    throw NumericalFailure("exact_policy_evaluation: residual " + std::to_string(res) +
                           " exceeds tolerance");
  }
  return v;
}

TabularPolicy greedy_improve(const ValueFn& v, const FiniteMdp& mdp) {
  auto backup = bellman_optimal_op(v, mdp);
  return TabularPolicy::deterministic(mdp.num_actions(), backup.actions);
}

ValueFn value_iteration(const FiniteMdp& mdp, double tol, std::size_t max_iterations) {
  require(tol > 0.0, "value_iteration: tol must be positive");
  ValueFn v(mdp.num_states(), 0.0);
  for (std::size_t k = 0; k < max_iterations; ++k) {
    ValueFn next = bellman_optimal_op(v, mdp).values;
    const double gap = sup_distance(next, v);
    v = std::move(next);
    // |T W - W| <= gamma |W - V| <= gap for W = T V.
    if (gap <= tol) return v;
  }
  throw NumericalFailure("value_iteration: iteration cap exceeded");
}

std::vector<double> state_visitation(const TabularPolicy& pi, const FiniteMdp& mdp,
                                     std::size_t horizon) {
  check_dimensions(pi, mdp);
  const std::size_t n = mdp.num_states();
  std::vector<double> current(mdp.init_dist().begin(), mdp.init_dist().end());
  std::vector<double> total = current;
  std::vector<double> next(n);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    double spread = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (current[s] == 0.0) continue;
      for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
        const double w = current[s] * pi(s, a);
        if (w == 0.0) continue;
        const auto& row = mdp.transition(s, a);
        for (const auto& e : row.entries()) next[e.next] += w * e.prob;
        spread += w * row.uniform_mass();
      }
    }
    if (spread != 0.0) {
      const double each = spread / static_cast<double>(n);
      for (double& x : next) x += each;
    }
    for (std::size_t s = 0; s < n; ++s) total[s] += next[s];
    std::swap(current, next);
  }
  return total;
}

double expected_start_value(const ValueFn& v, const FiniteMdp& mdp) {
  check_dimensions(v, mdp);
  double acc = 0.0;
  for (std::size_t s = 0; s < mdp.num_states(); ++s) acc += mdp.init_dist()[s] * v[s];
  return acc;
}

}  // namespace fapi
