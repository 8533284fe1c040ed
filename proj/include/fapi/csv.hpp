#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fapi/bounds.hpp"
#include "fapi/imaginary.hpp"
#include "fapi/record.hpp"

namespace fapi {

/// Shortest decimal that reads back to the same double.
std::string format_number(double x);

/// round,algorithm,selected_ids,mean_return,realized_delta_max,
/// realized_epsilon_max,lhs_improvement,rhs_bound,bound_ok
/// selected_ids is a ';' list. The last three fields are empty for rounds
/// without an improvement check.
void write_history_csv(std::ostream& out, const std::vector<RoundRecord>& history);

/// round,client_id,delta_n,value_estimate,selected
void write_metrics_csv(std::ostream& out, const std::vector<RoundRecord>& history);

/// bound_name,round,lhs,rhs,slack,satisfied,hard
void write_bounds_csv(std::ostream& out, const BoundReport& report);

/// i,j,kappa_ij for every ordered pair, then i,I,kappa_iI per client and
/// the summary rows kappa1,,value and kappa2,,value.
void write_kappa_csv(std::ostream& out, const HeterogeneityReport& report);

}  // namespace fapi
