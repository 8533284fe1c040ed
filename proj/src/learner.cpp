#include "fapi/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fapi/errors.hpp"
#include "fapi/rng.hpp"

namespace fapi {

TransitionCounts::TransitionCounts(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      count_sa_(num_states * num_actions, 0),
      reward_sum_(num_states * num_actions, 0.0),
      successors_(num_states * num_actions) {}

void TransitionCounts::add(std::size_t s, std::size_t a, std::size_t next, std::uint64_t count,
                           double reward_sum) {
  require(s < num_states_ && a < num_actions_ && next < num_states_,
          "TransitionCounts: index out of range");
  if (count == 0) return;
  const std::size_t i = s * num_actions_ + a;
  count_sa_[i] += count;
  reward_sum_[i] += reward_sum;
  auto& succ = successors_[i];
  auto it = std::lower_bound(succ.begin(), succ.end(), next,
                             [](const Successor& x, std::size_t n) { return x.next < n; });
  if (it != succ.end() && it->next == next) {
    it->count += count;
  } else {
    succ.insert(it, Successor{next, count});
  }
}

void TransitionCounts::record(std::size_t s, std::size_t a, std::size_t next, double reward) {
  add(s, a, next, 1, reward);
}

void TransitionCounts::merge(const TransitionCounts& other) {
  require(other.num_states_ == num_states_ && other.num_actions_ == num_actions_,
          "TransitionCounts::merge: dimension mismatch");
  for (std::size_t i = 0; i < count_sa_.size(); ++i) {
    const std::size_t s = i / num_actions_, a = i % num_actions_;
    const auto& succ = other.successors_[i];
    for (std::size_t k = 0; k < succ.size(); ++k) {
      // Reward sums are attached once per pair, on its first successor.
      add(s, a, succ[k].next, succ[k].count, k == 0 ? other.reward_sum_[i] : 0.0);
    }
  }
}

std::uint64_t TransitionCounts::count(std::size_t s, std::size_t a, std::size_t next) const {
  const auto& succ = successors(s, a);
  auto it = std::lower_bound(succ.begin(), succ.end(), next,
                             [](const Successor& x, std::size_t n) { return x.next < n; });
  return it != succ.end() && it->next == next ? it->count : 0;
}

std::uint64_t TransitionCounts::total() const {
  return std::accumulate(count_sa_.begin(), count_sa_.end(), std::uint64_t{0});
}

FiniteMdp estimate_model(const TransitionCounts& counts, const FiniteMdp& template_mdp,
                         const std::vector<bool>& absorbing) {
  const std::size_t S = template_mdp.num_states(), A = template_mdp.num_actions();
  require(counts.num_states() == S && counts.num_actions() == A,
          "estimate_model: counts do not match the template");
  require(absorbing.empty() || absorbing.size() == S, "estimate_model: absorbing mask size");
  std::vector<TransitionRow> rows;
  std::vector<double> rewards(S * A, 0.0);
  rows.reserve(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      if (!absorbing.empty() && absorbing[s]) {
        rows.push_back(template_mdp.transition(s, a));
        rewards[s * A + a] = template_mdp.reward(s, a);
        continue;
      }
      const std::uint64_t c = counts.count(s, a);
      if (c == 0) {
        rows.push_back(TransitionRow::uniform());
        continue;
      }
      const double total = static_cast<double>(c);
      std::vector<TransitionEntry> entries;
      entries.reserve(counts.successors(s, a).size());
      for (const auto& succ : counts.successors(s, a)) {
        entries.push_back({succ.next, static_cast<double>(succ.count) / total});
      }
      rows.emplace_back(std::move(entries));
      rewards[s * A + a] = std::clamp(counts.reward_sum(s, a) / total, 0.0, template_mdp.r_max());
    }
  }
  return FiniteMdp(S, A, std::vector<double>(template_mdp.init_dist().begin(),
                                             template_mdp.init_dist().end()),
                   std::move(rows), std::move(rewards), template_mdp.discount(),
                   template_mdp.r_max(), template_mdp.options());
}

NoisyEvaluation noisy_evaluate(const FiniteMdp& mdp, const TabularPolicy& pi, double delta_target,
                               std::uint64_t seed) {
  require(delta_target >= 0.0 && std::isfinite(delta_target),
          "noisy_evaluate: delta_target must be >= 0");
  NoisyEvaluation out{exact_policy_evaluation(pi, mdp), 0.0};
  if (delta_target == 0.0) return out;
  Rng rng(seed);
  for (std::size_t s = 0; s < out.values.size(); ++s) {
    const double noise = rng.uniform(-delta_target, delta_target);
    out.values[s] += noise;
    out.realized_delta = std::max(out.realized_delta, std::abs(noise));
  }
  return out;
}

double improvement_gap(const FiniteMdp& mdp, const TabularPolicy& pi, const ValueFn& v) {
  return sup_distance(bellman_policy_op(v, pi, mdp), bellman_optimal_op(v, mdp).values);
}

namespace {

TabularPolicy mix_with_uniform(const std::vector<std::size_t>& greedy, std::size_t num_actions,
                               double lambda) {
  const double base = lambda / static_cast<double>(num_actions);
  std::vector<double> probs(greedy.size() * num_actions, base);
  for (std::size_t s = 0; s < greedy.size(); ++s) probs[s * num_actions + greedy[s]] += 1.0 - lambda;
  return TabularPolicy(greedy.size(), num_actions, std::move(probs));
}

}  // namespace

EpsImprovement eps_improve(const FiniteMdp& mdp, const ValueFn& v, double eps_target) {
  require(eps_target >= 0.0 && std::isfinite(eps_target), "eps_improve: eps_target must be >= 0");
  const auto greedy = bellman_optimal_op(v, mdp);
  const std::size_t A = mdp.num_actions();
  auto gap_at = [&](double lambda) {
    return sup_distance(bellman_policy_op(v, mix_with_uniform(greedy.actions, A, lambda), mdp),
                        greedy.values);
  };
  double lambda = 0.0;
  if (eps_target > 0.0) {
    if (gap_at(1.0) <= eps_target) {
      lambda = 1.0;
    } else {
      double lo = 0.0, hi = 1.0;
      while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        (gap_at(mid) <= eps_target ? lo : hi) = mid;
      }
      lambda = lo;
    }
  }
  EpsImprovement out{mix_with_uniform(greedy.actions, A, lambda), 0.0, lambda};
  out.realized_epsilon = improvement_gap(mdp, out.policy, v);
  return out;
}

RolloutResult rollout(EpisodicEnv& env, const TabularPolicy& pi, const RolloutOptions& options,
                      std::uint64_t seed) {
  require(options.episodes >= 1, "rollout: episodes must be >= 1");
  require(pi.num_states() == env.num_states() && pi.num_actions() == env.num_actions(),
          "rollout: policy does not match the environment");
  Rng rng(seed);
  RolloutResult out;
  out.counts = TransitionCounts(env.num_states(), env.num_actions());
  double return_sum = 0.0;
  for (std::size_t ep = 0; ep < options.episodes; ++ep) {
    if (options.step_budget != 0 && out.steps >= options.step_budget) break;
    std::vector<Transition> trajectory;
    double episode_return = 0.0;
    std::size_t s = env.reset(rng);
    for (std::size_t t = 0; t < options.horizon; ++t) {
      if (options.step_budget != 0 && out.steps >= options.step_budget) break;
      const std::size_t a = rng.categorical(pi.row(s));
      const StepOutcome step = env.step(a, rng);
      out.counts.record(s, a, step.next_state, step.reward);
      episode_return += step.reported_reward;
      ++out.steps;
      if (options.keep_trajectories) {
        trajectory.push_back({s, a, step.reported_reward, step.next_state, step.done});
      }
      s = step.next_state;
      if (step.done) break;
    }
    return_sum += episode_return;
    ++out.episodes;
    if (options.keep_trajectories) out.trajectories.push_back(std::move(trajectory));
  }
  out.mean_return = out.episodes > 0 ? return_sum / static_cast<double>(out.episodes) : 0.0;
  return out;
}

TabularPolicy softmax_policy(std::size_t num_states, std::size_t num_actions,
                             std::span<const double> logits) {
  require(logits.size() == num_states * num_actions, "softmax_policy: size mismatch");
  std::vector<double> probs(logits.size());
  for (std::size_t s = 0; s < num_states; ++s) {
    const auto row = logits.subspan(s * num_actions, num_actions);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t a = 0; a < num_actions; ++a) {
      probs[s * num_actions + a] = std::exp(row[a] - top);
      total += probs[s * num_actions + a];
    }
    for (std::size_t a = 0; a < num_actions; ++a) probs[s * num_actions + a] /= total;
  }
  return TabularPolicy(num_states, num_actions, std::move(probs));
}

namespace {

double row_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] > 0.0) kl += p[a] * (std::log(p[a]) - std::log(q[a]));
  }
  return kl;
}

}  // namespace

double mean_kl(const TabularPolicy& pi_old, const TabularPolicy& pi,
               std::span<const double> visitation) {
  double kl = 0.0;
  for (std::size_t s = 0; s < pi_old.num_states(); ++s) {
    if (visitation[s] != 0.0) kl += visitation[s] * row_kl(pi_old.row(s), pi.row(s));
  }
  return kl;
}

double ppo_surrogate(std::span<const double> logits, const TabularPolicy& pi_old,
                     std::span<const double> advantage, std::span<const double> visitation,
                     double beta) {
  const std::size_t S = pi_old.num_states(), A = pi_old.num_actions();
  const TabularPolicy pi = softmax_policy(S, A, logits);
  double total = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (visitation[s] == 0.0) continue;
    double gain = 0.0;
    for (std::size_t a = 0; a < A; ++a) gain += pi(s, a) * advantage[s * A + a];
    total += visitation[s] * (gain - beta * row_kl(pi_old.row(s), pi.row(s)));
  }
  return total;
}

std::vector<double> ppo_surrogate_gradient(std::span<const double> logits,
                                           const TabularPolicy& pi_old,
                                           std::span<const double> advantage,
                                           std::span<const double> visitation, double beta) {
  const std::size_t S = pi_old.num_states(), A = pi_old.num_actions();
  const TabularPolicy pi = softmax_policy(S, A, logits);
  std::vector<double> grad(S * A, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    if (visitation[s] == 0.0) continue;
    double baseline = 0.0;
    for (std::size_t a = 0; a < A; ++a) baseline += pi(s, a) * advantage[s * A + a];
    for (std::size_t a = 0; a < A; ++a) {
      grad[s * A + a] = visitation[s] * (pi(s, a) * (advantage[s * A + a] - baseline) -
                                         beta * (pi(s, a) - pi_old(s, a)));
    }
  }
  return grad;
}

PpoResult ppo_kl_update(const FiniteMdp& model, const TabularPolicy& pi, const PpoHyper& hyper,
                        double beta) {
  require(hyper.learning_rate > 0.0 && std::isfinite(hyper.learning_rate),
          "ppo_kl_update: learning rate must be positive");
  require(hyper.kl_target > 0.0, "ppo_kl_update: kl_target must be positive");
  require(beta >= 0.0 && std::isfinite(beta), "ppo_kl_update: beta must be >= 0");
  check_dimensions(pi, model);
  const std::size_t S = model.num_states(), A = model.num_actions();

  const ValueFn v = exact_policy_evaluation(pi, model);
  std::vector<double> advantage = action_values(v, model);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) advantage[s * A + a] -= v[s];
  }
  std::vector<double> d = state_visitation(pi, model, hyper.visitation_horizon);
  const double mass = std::accumulate(d.begin(), d.end(), 0.0);
  for (double& x : d) x /= mass;

  std::vector<double> logits(S * A);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = std::log(std::max(pi.probs()[i], 1e-12));

  for (std::size_t k = 0; k < hyper.gradient_steps; ++k) {
    const auto grad = ppo_surrogate_gradient(logits, pi, advantage, d, beta);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (!std::isfinite(grad[i])) throw NumericalFailure("ppo_kl_update: non-finite gradient");
      logits[i] += hyper.learning_rate * grad[i];
    }
  }

  PpoResult out{softmax_policy(S, A, logits), beta, 0.0};
  out.mean_kl = mean_kl(pi, out.policy, d);
  if (!std::isfinite(out.mean_kl)) throw NumericalFailure("ppo_kl_update: non-finite KL");
  if (out.mean_kl > 1.5 * hyper.kl_target) {
    out.beta = beta * 2.0;
  } else if (out.mean_kl < hyper.kl_target / 1.5) {
    out.beta = beta / 2.0;
  }
  return out;
}

}  // namespace fapi
