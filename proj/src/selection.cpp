#include "fapi/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fapi/errors.hpp"
#include "fapi/rng.hpp"

namespace fapi {

std::string_view to_string(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::kFull: return "full";
    case SelectionStrategy::kRandom: return "random";
    case SelectionStrategy::kPowerOfChoice: return "power_of_choice";
    case SelectionStrategy::kFedPocs: return "fedpocs";
  }
  return "unknown";
}

SelectionStrategy parse_selection_strategy(std::string_view name) {
  if (name == "full") return SelectionStrategy::kFull;
  if (name == "random" || name == "fedavg") return SelectionStrategy::kRandom;
  if (name == "power_of_choice") return SelectionStrategy::kPowerOfChoice;
  if (name == "fedpocs") return SelectionStrategy::kFedPocs;
  throw ContractViolation("unknown selection strategy '" + std::string(name) + "'");
}

std::vector<double> visitation_freq(const TabularPolicy& pi, const FiniteMdp& mdp,
                                    std::size_t horizon) {
  return state_visitation(pi, mdp, horizon);
}

std::vector<double> advantage_matrix(const TabularPolicy& pi, const FiniteMdp& mdp) {
  const ValueFn v = exact_policy_evaluation(pi, mdp);
  std::vector<double> adv = action_values(v, mdp);
  const std::size_t A = mdp.num_actions();
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= v[i / A];
  return adv;
}

CandidateMetrics candidate_metrics(std::size_t client_id, const TabularPolicy& pi,
                                   const FiniteMdp& mdp, std::size_t horizon) {
  const ValueFn v = exact_policy_evaluation(pi, mdp);
  std::vector<double> adv = action_values(v, mdp);
  const std::size_t A = mdp.num_actions();
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= v[i / A];
  return {client_id, visitation_freq(pi, mdp, horizon), std::move(adv),
          expected_start_value(v, mdp)};
}

namespace {

void check_shapes(const std::vector<CandidateMetrics>& metrics, std::size_t S, std::size_t SA) {
  for (const auto& m : metrics) {
    require(m.visitation.size() == S && m.advantage.size() == SA,
            "fedpocs_delta: candidates do not share dimensions");
  }
}

std::vector<double> scaled(const CandidateMetrics& m) {
  const std::size_t S = m.visitation.size();
  const std::size_t A = m.advantage.size() / S;
  std::vector<double> out(m.advantage.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.visitation[i / A] * m.advantage[i];
  return out;
}

std::vector<double> deltas_against(const std::vector<CandidateMetrics>& candidates,
                                   const std::vector<double>& reference) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto m = scaled(c);
    double own = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      own += m[i] * m[i];
      diff += (reference[i] - m[i]) * (reference[i] - m[i]);
    }
    out.push_back(std::sqrt(own) - std::sqrt(diff));
  }
  return out;
}

std::vector<double> weighted_field(const std::vector<CandidateMetrics>& members,
                                   const std::vector<double>& weights) {
  std::vector<double> field(members.front().advantage.size(), 0.0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto m = scaled(members[k]);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] += weights[k] * m[i];
  }
  return field;
}

}  // namespace

std::vector<double> fedpocs_delta(const std::vector<CandidateMetrics>& candidates,
                                  const std::vector<double>& weights) {
  require(!candidates.empty(), "fedpocs_delta: no candidates");
  require(weights.size() == candidates.size(), "fedpocs_delta: weight count mismatch");
  const std::size_t S = candidates.front().visitation.size();
  check_shapes(candidates, S, candidates.front().advantage.size());
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(total > 0.0, "fedpocs_delta: weights must have positive mass");
  for (double w : weights) require(w >= 0.0, "fedpocs_delta: negative weight");
  std::vector<double> renormalized(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) renormalized[k] = weights[k] / total;
  return deltas_against(candidates, weighted_field(candidates, renormalized));
}

std::vector<double> fedpocs_delta_population(const std::vector<CandidateMetrics>& candidates,
                                             const std::vector<CandidateMetrics>& population,
                                             const std::vector<double>& population_weights) {
  require(!candidates.empty() && !population.empty(), "fedpocs_delta_population: empty input");
  require(population.size() == population_weights.size(),
          "fedpocs_delta_population: weight count mismatch");
  const std::size_t S = candidates.front().visitation.size();
  const std::size_t SA = candidates.front().advantage.size();
  check_shapes(candidates, S, SA);
  check_shapes(population, S, SA);
  return deltas_against(candidates, weighted_field(population, population_weights));
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    std::uint64_t seed) {
  require(k <= n, "sample_without_replacement: k exceeds population");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
  pool.resize(k);
  return pool;
}

std::vector<std::size_t> select(SelectionStrategy strategy, const SelectionMetrics& metrics,
                                std::size_t k, std::uint64_t seed) {
  const auto& cands = metrics.candidates;
  const std::size_t d = cands.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  switch (strategy) {
    case SelectionStrategy::kFull:
      picked = order;
      break;
    case SelectionStrategy::kRandom:
      require(k <= d, "select: K exceeds the candidate count");
      picked = sample_without_replacement(d, k, seed);
      break;
    case SelectionStrategy::kPowerOfChoice:
      require(k <= d, "select: K exceeds the candidate count");
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (cands[x].value_estimate != cands[y].value_estimate) {
          return cands[x].value_estimate < cands[y].value_estimate;
        }
        return cands[x].client_id < cands[y].client_id;
      });
      picked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    case SelectionStrategy::kFedPocs:
      require(k <= d, "select: K exceeds the candidate count");
      require(metrics.delta.size() == d, "select: missing FedPOCS scores");
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (metrics.delta[x] != metrics.delta[y]) return metrics.delta[x] > metrics.delta[y];
        return cands[x].client_id < cands[y].client_id;
      });
      picked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      break;
  }
  std::vector<std::size_t> ids;
  ids.reserve(picked.size());
  for (std::size_t i : picked) ids.push_back(cands[i].client_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace fapi
