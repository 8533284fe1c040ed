#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fapi/envs.hpp"
#include "fapi/imaginary.hpp"
#include "fapi/learner.hpp"
#include "fapi/mdp.hpp"

namespace fapi {

using Json = nlohmann::json;

/// MDP record: num_states, num_actions, gamma, r_max, mu, rewards (|S| x |A|),
/// transitions (|S| x |A| x |S|, dense) and nonnegative_rewards.
Json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const Json& j);

/// {"kind": "tabular", "weights": [...], "clients": [MDP records]}
Json ensemble_to_json(const Ensemble& ens);
Ensemble ensemble_from_json(const Json& j);

struct MountainCarRecord {
  MountainCarParams params;
  std::vector<double> shifts;
};

/// {"kind": "mountain_car", grid and physics fields, "shifts": [...]}
Json mountain_car_to_json(const MountainCarRecord& rec);
MountainCarRecord mountain_car_from_json(const Json& j);

/// Sparse list of [s, a, s', count] plus per-pair reward sums.
Json counts_to_json(const TransitionCounts& counts);
TransitionCounts counts_from_json(const Json& j);

/// Doubles are written in shortest round-trip form, so load(save(x))
/// reproduces every value and re-saving gives identical text.
std::string dump_json(const Json& j);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

}  // namespace fapi
