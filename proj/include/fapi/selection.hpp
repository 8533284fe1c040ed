#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fapi/mdp.hpp"

namespace fapi {

enum class SelectionStrategy { kFull, kRandom, kPowerOfChoice, kFedPocs };

std::string_view to_string(SelectionStrategy strategy);
SelectionStrategy parse_selection_strategy(std::string_view name);

/// Uploads of one candidate client.
struct CandidateMetrics {
  std::size_t client_id = 0;
  std::vector<double> visitation;
  /// Row-major |S| x |A|.
  std::vector<double> advantage;
  double value_estimate = 0.0;
};

struct SelectionMetrics {
  std::vector<CandidateMetrics> candidates;
  std::vector<double> delta;
};

/// D = sum_{t=0}^{H} D_t with D_0 = mu.
std::vector<double> visitation_freq(const TabularPolicy& pi, const FiniteMdp& mdp,
                                    std::size_t horizon);

/// A(s,a) = R(s,a) + gamma E[V^pi(s')] - V^pi(s) with V^pi exact on `mdp`.
std::vector<double> advantage_matrix(const TabularPolicy& pi, const FiniteMdp& mdp);

/// Visitation, advantages and mu . V^pi for one candidate.
CandidateMetrics candidate_metrics(std::size_t client_id, const TabularPolicy& pi,
                                   const FiniteMdp& mdp, std::size_t horizon);

/// Delta_n = ||M_n||_F - ||sum_k q'_k M_k - M_n||_F with M_k = diag(D_k) A_k and
/// q' the weights renormalized over the candidates.
std::vector<double> fedpocs_delta(const std::vector<CandidateMetrics>& candidates,
                                  const std::vector<double>& weights);

/// Same score with the reference field sum_k q_k M_k taken over a full
/// population (weights already on the simplex).
std::vector<double> fedpocs_delta_population(const std::vector<CandidateMetrics>& candidates,
                                             const std::vector<CandidateMetrics>& population,
                                             const std::vector<double>& population_weights);

/// k of n ids uniformly without replacement, in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed);

/// Chooses K of the candidates in `metrics` (ids in ascending order).
/// kFull returns every candidate; kRandom draws uniformly; kPowerOfChoice
/// keeps the smallest value estimates; kFedPocs keeps the largest Delta.
/// Ties go to the lowest client id.
std::vector<std::size_t> select(SelectionStrategy strategy, const SelectionMetrics& metrics,
                                std::size_t k, std::uint64_t seed);

}  // namespace fapi
