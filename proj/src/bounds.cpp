#include "fapi/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fapi/errors.hpp"
#include "fapi/record.hpp"

namespace fapi {

void BoundInputs::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "BoundInputs: gamma must lie in (0, 1)");
  require(r_max >= 0.0 && kappa1 >= 0.0 && kappa2 >= 0.0 && delta_bar >= 0.0 && epsilon_bar >= 0.0,
          "BoundInputs: scalar inputs must be non-negative");
  const std::size_t n = population_weights.size();
  require(kappa_pairwise.empty() || kappa_pairwise.size() == n * n,
          "BoundInputs: kappa_pairwise must be N x N");
  require(kappa_to_imaginary.empty() || kappa_to_imaginary.size() == n,
          "BoundInputs: kappa_to_imaginary must have N entries");
  require(delta.empty() || delta.size() == n, "BoundInputs: delta must have N entries");
  require(epsilon.empty() || epsilon.size() == n, "BoundInputs: epsilon must have N entries");
  require(participants.size() == participant_weights.size(),
          "BoundInputs: participant weights misaligned");
  for (std::size_t m : participants) require(m < n, "BoundInputs: participant out of range");
  auto nonneg = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; });
  };
  require(nonneg(kappa_pairwise) && nonneg(kappa_to_imaginary) && nonneg(delta) &&
              nonneg(epsilon) && nonneg(participant_weights) && nonneg(population_weights),
          "BoundInputs: vector inputs must be non-negative");
}

BoundInputs bound_inputs_from(const Ensemble& ens, const HeterogeneityReport& report) {
  BoundInputs in;
  in.gamma = ens.discount();
  in.r_max = ens.r_max();
  in.kappa1 = report.kappa1;
  in.kappa2 = report.kappa2;
  in.kappa_pairwise = report.kappa_pairwise;
  in.kappa_to_imaginary = report.kappa_to_imaginary;
  in.population_weights = ens.weights();
  in.delta.assign(ens.size(), 0.0);
  in.epsilon.assign(ens.size(), 0.0);
  return in;
}

double api_error_bound(double eps, double delta, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, "api_error_bound: gamma must lie in (0, 1)");
  require(eps >= 0.0 && delta >= 0.0, "api_error_bound: errors must be non-negative");
  return (eps + 2.0 * gamma * delta) / ((1.0 - gamma) * (1.0 - gamma));
}

double eval_gap_bound(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma;
  return g * in.r_max * in.kappa1 / ((1.0 - g) * (1.0 - g)) + in.delta_bar;
}

double improvement_bound_shared(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma;
  return 2.0 * g * in.r_max * in.kappa1 / (1.0 - g) + in.epsilon_bar;
}

double improvement_bound_local(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma;
  return 2.0 * g * g * in.r_max * in.kappa2 / ((1.0 - g) * (1.0 - g)) +
         g * in.r_max * in.kappa1 / (1.0 - g) + 4.0 * g * in.delta_bar + in.epsilon_bar;
}

namespace {

struct ParticipantSums {
  /// sum_m q'_m sum_n q_n kappa_mn
  double pair = 0.0;
  /// sum_m q'_m kappa_mI
  double imaginary = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
};

ParticipantSums participant_sums(const BoundInputs& in) {
  const std::size_t n = in.population();
  ParticipantSums out;
  for (std::size_t k = 0; k < in.participants.size(); ++k) {
    const std::size_t m = in.participants[k];
    const double w = in.participant_weights[k];
    if (!in.kappa_pairwise.empty()) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += in.population_weights[j] * in.kappa_pairwise[m * n + j];
      out.pair += w * row;
    }
    if (!in.kappa_to_imaginary.empty()) out.imaginary += w * in.kappa_to_imaginary[m];
    if (!in.delta.empty()) out.delta += w * in.delta[m];
    if (!in.epsilon.empty()) out.epsilon += w * in.epsilon[m];
  }
  return out;
}

}  // namespace

double improvement_bound_partial(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma, R = in.r_max;
  const auto sums = participant_sums(in);
  return (g + g * g) * R * sums.pair / ((1.0 - g) * (1.0 - g)) + g * R * sums.imaginary / (1.0 - g) +
         2.0 * g * sums.delta + 2.0 * g * in.delta_bar + sums.epsilon;
}

double improvement_bound_partial_fpe(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma, R = in.r_max;
  const auto sums = participant_sums(in);
  return g * R * sums.pair / (1.0 - g) + g * R * sums.imaginary / (1.0 - g) + sums.epsilon;
}

double improvement_bound(const BoundInputs& in, BoundVariant variant) {
  switch (variant) {
    case BoundVariant::kSharedFull: return improvement_bound_shared(in);
    case BoundVariant::kLocalFull: return improvement_bound_local(in);
    case BoundVariant::kLocalPartial: return improvement_bound_partial(in);
    case BoundVariant::kSharedPartial: return improvement_bound_partial_fpe(in);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double round_eval_gap_bound(const BoundInputs& in, BoundVariant variant) {
  if (variant != BoundVariant::kSharedPartial) return eval_gap_bound(in);
  in.validate();
  const double g = in.gamma;
  const auto sums = participant_sums(in);
  return sums.delta + g * in.r_max * sums.imaginary / ((1.0 - g) * (1.0 - g));
}

double final_bound(const BoundInputs& in, BoundVariant variant) {
  const double g = in.gamma;
  const double eps_tilde = improvement_bound(in, variant);
  const double delta = round_eval_gap_bound(in, variant);
  return api_error_bound(eps_tilde, delta, g) +
         2.0 * g * in.r_max * in.kappa1 / ((1.0 - g) * (1.0 - g));
}

double final_bound_expanded(const BoundInputs& in) {
  in.validate();
  const double g = in.gamma, R = in.r_max;
  const double u = 1.0 - g;
  const auto sums = participant_sums(in);
  const double c1 = 2.0 * g * (g * g - g + 1.0) * R / (u * u * u * u);
  const double c2 = g * R / (u * u * u);
  const double c3 = (g + g * g) * R / (u * u * u * u);
  const double residual = (2.0 * g * sums.delta + 4.0 * g * in.delta_bar + sums.epsilon) / (u * u);
  return c1 * in.kappa1 + c2 * sums.imaginary + c3 * sums.pair + residual;
}

BoundEntry make_entry(std::string name, long round, double lhs, double rhs, bool hard) {
  BoundEntry e;
  e.name = std::move(name);
  e.round = round;
  e.lhs = lhs;
  e.rhs = rhs;
  e.slack = rhs - lhs;
  e.satisfied = lhs <= rhs + kBoundSlack;
  e.hard = hard;
  return e;
}

bool BoundReport::all_hard_satisfied() const { return violations(false) == 0; }

std::size_t BoundReport::violations(bool include_soft) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const BoundEntry& e) {
    return !e.satisfied && (e.hard || include_soft);
  }));
}

BoundVariant variant_of(const RoundRecord& record) {
  const bool fpe = record.algorithm == Algorithm::kWithFpe;
  if (record.full_participation) return fpe ? BoundVariant::kSharedFull : BoundVariant::kLocalFull;
  return fpe ? BoundVariant::kSharedPartial : BoundVariant::kLocalPartial;
}

BoundInputs with_round(const BoundInputs& base, const RoundRecord& record) {
  BoundInputs in = base;
  const std::size_t n = base.population();
  require(record.client_delta.size() == n && record.client_epsilon.size() == n,
          "with_round: per-client errors must cover the population");
  in.delta = record.client_delta;
  in.epsilon = record.client_epsilon;
  in.participants = record.selected;
  in.participant_weights = record.participant_weights;
  in.delta_bar = 0.0;
  in.epsilon_bar = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    in.delta_bar += base.population_weights[k] * in.delta[k];
    in.epsilon_bar += base.population_weights[k] * in.epsilon[k];
  }
  return in;
}

namespace {

std::string_view improvement_name(BoundVariant variant) {
  switch (variant) {
    case BoundVariant::kSharedFull: return "improvement_shared_eval";
    case BoundVariant::kLocalFull: return "improvement_local_eval";
    case BoundVariant::kLocalPartial: return "improvement_partial_local_eval";
    case BoundVariant::kSharedPartial: return "improvement_partial_shared_eval";
  }
  return "improvement";
}

// Tracks the (lhs, rhs) pair with the smallest slack.
struct Worst {
  double lhs = 0.0;
  double rhs = 0.0;
  double excess = -std::numeric_limits<double>::infinity();
  void offer(double l, double r) {
    if (l - r > excess) {
      excess = l - r;
      lhs = l;
      rhs = r;
    }
  }
};

std::vector<BoundEntry> verify_round(const Ensemble& ens, const FiniteMdp& imaginary,
                                     const BoundInputs& base, const RoundRecord& rec) {
  const std::size_t N = ens.size();
  const double g = ens.discount(), R = ens.r_max();
  const long t = static_cast<long>(rec.round);
  const BoundInputs in = with_round(base, rec);
  const BoundVariant variant = variant_of(rec);
  std::vector<BoundEntry> out;

  std::vector<ValueFn> client_values(N);
  for (std::size_t n = 0; n < N; ++n) client_values[n] = exact_policy_evaluation(rec.policy, ens.client(n));
  const ValueFn averaged = weighted_average(client_values, ens.weights());
  const ValueFn imaginary_value = exact_policy_evaluation(rec.policy, imaginary);

  double dominance = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < averaged.size(); ++s) {
    dominance = std::max(dominance, imaginary_value[s] - averaged[s]);
  }
  out.push_back(make_entry("averaged_dominates_imaginary", t, dominance, 0.0, false));
  out.push_back(make_entry("averaged_imaginary_gap", t, sup_distance(averaged, imaginary_value),
                           g * R * base.kappa1 / ((1.0 - g) * (1.0 - g))));

  Worst client_gap;
  for (std::size_t m = 0; m < N; ++m) {
    for (std::size_t n = m + 1; n < N; ++n) {
      client_gap.offer(sup_distance(client_values[m], client_values[n]),
                       g * R * base.kappa_pairwise[m * N + n] / ((1.0 - g) * (1.0 - g)));
    }
  }
  if (N > 1) out.push_back(make_entry("client_value_gap", t, client_gap.lhs, client_gap.rhs));

  if (!rec.server_value) return out;
  const ValueFn& vbar = *rec.server_value;
  out.push_back(make_entry("evaluation_gap", t, sup_distance(vbar, imaginary_value),
                           round_eval_gap_bound(in, variant)));

  const double lhs = improvement_gap(imaginary, rec.next_policy, vbar);
  out.push_back(make_entry(std::string(improvement_name(variant)), t, lhs, improvement_bound(in, variant)));
  if (rec.full_participation) {
    if (variant == BoundVariant::kSharedFull) {
      out.push_back(make_entry("improvement_partial_shared_eval_all", t, lhs,
                               improvement_bound_partial_fpe(in)));
    } else {
      out.push_back(make_entry("improvement_partial_local_eval_all", t, lhs,
                               improvement_bound_partial(in)));
    }
  }

  std::vector<ValueFn> optimal(N), onpolicy(N);
  for (std::size_t n = 0; n < N; ++n) {
    optimal[n] = bellman_optimal_op(vbar, ens.client(n)).values;
    onpolicy[n] = bellman_policy_op(vbar, rec.next_policy, ens.client(n));
  }
  const ValueFn optimal_imaginary = bellman_optimal_op(vbar, imaginary).values;
  const ValueFn onpolicy_imaginary = bellman_policy_op(vbar, rec.next_policy, imaginary);
  Worst pair, to_imaginary, policy_pair, policy_imaginary;
  for (std::size_t m = 0; m < N; ++m) {
    const double rhs_i = g * R * base.kappa_to_imaginary[m] / (1.0 - g);
    to_imaginary.offer(sup_distance(optimal_imaginary, optimal[m]), rhs_i);
    policy_imaginary.offer(sup_distance(onpolicy_imaginary, onpolicy[m]), rhs_i);
    for (std::size_t n = m + 1; n < N; ++n) {
      const double rhs = g * R * base.kappa_pairwise[m * N + n] / (1.0 - g);
      pair.offer(sup_distance(optimal[m], optimal[n]), rhs);
      policy_pair.offer(sup_distance(onpolicy[m], onpolicy[n]), rhs);
    }
  }
  if (N > 1) {
    out.push_back(make_entry("operator_gap_pair", t, pair.lhs, pair.rhs));
    out.push_back(make_entry("operator_gap_policy_pair", t, policy_pair.lhs, policy_pair.rhs));
  }
  out.push_back(make_entry("operator_gap_imaginary", t, to_imaginary.lhs, to_imaginary.rhs));
  out.push_back(make_entry("operator_gap_policy_imaginary", t, policy_imaginary.lhs,
                           policy_imaginary.rhs));
  return out;
}

}  // namespace

TabularPolicy exhaustive_best_policy(const Ensemble& ens, const Executor& exec) {
  const std::size_t S = ens.num_states(), A = ens.num_actions();
  require(std::pow(static_cast<double>(A), static_cast<double>(S)) <= 1e9,
          "exhaustive_best_policy: policy space too large");
  std::size_t total = 1;
  for (std::size_t s = 0; s < S; ++s) total *= A;
  auto decode = [&](std::size_t code) {
    std::vector<std::size_t> actions(S);
    for (std::size_t s = 0; s < S; ++s) {
      actions[s] = code % A;
      code /= A;
    }
    return actions;
  };
  std::vector<double> scores(total);
  exec.parallel_for(total, [&](std::size_t code) {
    const auto pi = TabularPolicy::deterministic(A, decode(code));
    scores[code] = expected_start_value(averaged_value(ens, pi), ens.client(0));
  });
  std::size_t best = 0;
  for (std::size_t code = 1; code < total; ++code) {
    if (scores[code] > scores[best]) best = code;
  }
  return TabularPolicy::deterministic(A, decode(best));
}

BoundReport verify_history(const Ensemble& ens, const std::vector<RoundRecord>& history,
                           const VerifyOptions& options, const Executor& exec) {
  require(options.tail_fraction > 0.0 && options.tail_fraction <= 1.0,
          "verify_history: tail fraction must lie in (0, 1]");
  const FiniteMdp imaginary = build_imaginary(ens);
  const HeterogeneityReport report = heterogeneity_report(ens, exec);
  const BoundInputs base = bound_inputs_from(ens, report);
  BoundReport out;

  std::vector<std::vector<BoundEntry>> per_round(history.size());
  exec.parallel_for(history.size(), [&](std::size_t k) {
    per_round[k] = verify_round(ens, imaginary, base, history[k]);
  });
  for (auto& entries : per_round) {
    for (auto& e : entries) out.entries.push_back(std::move(e));
  }
  if (history.empty()) return out;

  const double policies = std::pow(static_cast<double>(ens.num_actions()),
                                   static_cast<double>(ens.num_states()));
  const bool have_values = std::all_of(history.begin(), history.end(),
                                       [](const RoundRecord& r) { return r.server_value.has_value(); });
  if (policies > options.max_policies || !have_values) {
    out.asymptotic_skipped = true;
    return out;
  }

  const double g = ens.discount(), R = ens.r_max();
  const TabularPolicy best = exhaustive_best_policy(ens, exec);
  const TabularPolicy best_imaginary = greedy_improve(value_iteration(imaginary, 1e-12), imaginary);
  const ValueFn v_best = averaged_value(ens, best);
  const ValueFn v_best_imaginary = averaged_value(ens, best_imaginary);

  const std::size_t tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.tail_fraction * static_cast<double>(history.size()))));
  std::vector<double> tail_gap(tail);
  exec.parallel_for(tail, [&](std::size_t k) {
    const auto& rec = history[history.size() - tail + k];
    const ValueFn v = averaged_value(ens, rec.next_policy);
    double gap = 0.0;
    for (std::size_t s = 0; s < v.size(); ++s) {
      gap = std::max(gap, std::abs(v[s] - std::max(v_best[s], v_best_imaginary[s])));
    }
    tail_gap[k] = gap;
  });
  const double lhs = *std::max_element(tail_gap.begin(), tail_gap.end());

  // Measured per-round errors over the whole run, and the closed forms.
  double eps_measured = 0.0, delta_measured = 0.0, closed = 0.0;
  for (const auto& e : out.entries) {
    if (e.name == "evaluation_gap") delta_measured = std::max(delta_measured, e.lhs);
    if (e.name.rfind("improvement_", 0) == 0 && e.name.find("_all") == std::string::npos) {
      eps_measured = std::max(eps_measured, e.lhs);
    }
  }
  for (const auto& rec : history) closed = std::max(closed, final_bound(with_round(base, rec), variant_of(rec)));
  const double kappa_term = 2.0 * g * R * report.kappa1 / ((1.0 - g) * (1.0 - g));
  out.entries.push_back(make_entry("asymptotic_gap_measured", -1, lhs,
                                   api_error_bound(eps_measured, delta_measured, g) + kappa_term, false));
  out.entries.push_back(make_entry("asymptotic_gap", -1, lhs, closed, false));
  return out;
}

}  // namespace fapi
