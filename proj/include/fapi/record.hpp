#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "fapi/learner.hpp"
#include "fapi/mdp.hpp"
#include "fapi/selection.hpp"

namespace fapi {

enum class Algorithm { kWithFpe, kWithoutFpe, kFedPocs };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);

struct ImprovementCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = true;
};

/// Telemetry of one round t.
struct RoundRecord {
  std::size_t round = 0;
  Algorithm algorithm = Algorithm::kWithFpe;
  std::vector<std::size_t> candidates;
  /// Participants C in ascending id order.
  std::vector<std::size_t> selected;
  /// q'_m aligned with `selected`.
  std::vector<double> participant_weights;
  /// True when C is the whole population.
  bool full_participation = true;
  /// pi^t broadcast at the start of the round and the aggregate pi^{t+1}.
  TabularPolicy policy;
  TabularPolicy next_policy;
  /// Aligned with `selected`.
  std::vector<LearnerOutcome> outcomes;
  /// Realized errors per client over the population; 0 for clients that
  /// did not evaluate or improve this round.
  std::vector<double> client_delta;
  std::vector<double> client_epsilon;
  /// V_bar^t, the value the improvement phase is measured at. For runs
  /// without shared evaluation this is sum_n q_n V_n^t over the population,
  /// with exact values for clients that sat the round out.
  std::optional<ValueFn> server_value;
  SelectionMetrics metrics;
  /// Mean return of pi^{t+1}.
  double mean_return = 0.0;
  std::optional<ImprovementCheck> improvement;
};

}  // namespace fapi
