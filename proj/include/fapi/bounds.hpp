#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fapi/imaginary.hpp"
#include "fapi/mdp.hpp"

namespace fapi {

struct RoundRecord;

struct BoundInputs {
  double gamma = 0.5;
  double r_max = 0.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  /// Row-major N x N.
  std::vector<double> kappa_pairwise;
  /// Per-client distance to the imaginary kernel.
  std::vector<double> kappa_to_imaginary;
  /// q_n over the whole population.
  std::vector<double> population_weights;
  double delta_bar = 0.0;
  std::vector<double> delta;
  double epsilon_bar = 0.0;
  std::vector<double> epsilon;
  /// Participant ids and renormalized weights q'_m.
  std::vector<std::size_t> participants;
  std::vector<double> participant_weights;

  void validate() const;
  std::size_t population() const { return population_weights.size(); }
};

/// Fills the heterogeneity fields from a report (weights from the ensemble).
BoundInputs bound_inputs_from(const Ensemble& ens, const HeterogeneityReport& report);

/// (eps + 2 gamma delta) / (1 - gamma)^2
double api_error_bound(double eps, double delta, double gamma);
/// gamma R kappa1 / (1 - gamma)^2 + delta_bar
double eval_gap_bound(const BoundInputs& in);
/// 2 gamma R kappa1 / (1 - gamma) + eps_bar
double improvement_bound_shared(const BoundInputs& in);
/// 2 gamma^2 R kappa2 / (1 - gamma)^2 + gamma R kappa1 / (1 - gamma) + 4 gamma delta_bar + eps_bar
double improvement_bound_local(const BoundInputs& in);
/// Partial participation without shared evaluation.
double improvement_bound_partial(const BoundInputs& in);
/// Partial participation with shared evaluation.
double improvement_bound_partial_fpe(const BoundInputs& in);

enum class BoundVariant { kSharedFull, kLocalFull, kLocalPartial, kSharedPartial };

/// Per-round improvement bound for the variant.
double improvement_bound(const BoundInputs& in, BoundVariant variant);

/// (eps_tilde + 2 gamma delta) / (1 - gamma)^2 + 2 gamma R kappa1 / (1 - gamma)^2 with
/// eps_tilde the variant's improvement bound and delta the evaluation gap bound.
double final_bound(const BoundInputs& in, BoundVariant variant);

/// The same quantity for the partial variant, regrouped as
///   C1 kappa1 + C2 sum q'_m kappa_mI + C3 sum q'_m q_n kappa_mn
///   + [2 gamma sum q'_m delta_m + 4 gamma delta_bar + sum q'_m eps_m] / (1 - gamma)^2.
/// Substituting the two component bounds into final_bound and collecting
/// terms gives C1 = 2 gamma (gamma^2 - gamma + 1) R / (1 - gamma)^4,
/// C2 = gamma R / (1 - gamma)^3 and C3 = (gamma + gamma^2) R / (1 - gamma)^4.
double final_bound_expanded(const BoundInputs& in);

struct BoundEntry {
  std::string name;
  /// -1 for whole-run checks.
  long round = -1;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool satisfied = true;
  /// Soft entries are reported but never fail verification.
  bool hard = true;
};

inline constexpr double kBoundSlack = 1e-9;

BoundEntry make_entry(std::string name, long round, double lhs, double rhs, bool hard = true);

struct BoundReport {
  std::vector<BoundEntry> entries;
  bool asymptotic_skipped = false;

  bool all_hard_satisfied() const;
  std::size_t violations(bool include_soft = false) const;
};

struct VerifyOptions {
  /// Fraction of final rounds used for the asymptotic check.
  double tail_fraction = 0.2;
  /// Exhaustive optimum search is skipped above this many policies.
  double max_policies = 1e6;

  friend bool operator==(const VerifyOptions&, const VerifyOptions&) = default;
};

/// Checks every recorded round of a tabular run against the matching bounds,
/// plus the asymptotic optimality gap over the tail window.
BoundReport verify_history(const Ensemble& ens, const std::vector<RoundRecord>& history,
                           const VerifyOptions& options = {}, const Executor& exec = Executor{});

/// Bound variant matching how a round was run.
BoundVariant variant_of(const RoundRecord& record);

/// Copies `base` and fills the realized errors and participants of a round.
BoundInputs with_round(const BoundInputs& base, const RoundRecord& record);

/// Bound on ||V_bar^t - V_I^{pi^t}|| for the round's variant. With shared
/// evaluation over a subset C, V_bar^t = sum q'_m V_m^t and the bound is
/// sum q'_m (delta_m + gamma R kappa_mI / (1 - gamma)^2).
double round_eval_gap_bound(const BoundInputs& in, BoundVariant variant);

/// Deterministic policy maximizing mu . V_bar^pi by enumeration.
TabularPolicy exhaustive_best_policy(const Ensemble& ens, const Executor& exec = Executor{});

}  // namespace fapi
