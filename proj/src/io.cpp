#include "fapi/io.hpp"

#include <fstream>
#include <sstream>

#include "fapi/errors.hpp"

namespace fapi {

namespace {

template <class T>
T field(const Json& j, const char* key) {
  require(j.is_object() && j.contains(key), std::string("json: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("json: bad field '") + key + "': " + e.what());
  }
}

}  // namespace

Json mdp_to_json(const FiniteMdp& mdp) {
  const std::size_t S = mdp.num_states(), A = mdp.num_actions();
  Json rewards = Json::array();
  Json transitions = Json::array();
  for (std::size_t s = 0; s < S; ++s) {
    Json r_row = Json::array();
    Json p_state = Json::array();
    for (std::size_t a = 0; a < A; ++a) {
      r_row.push_back(mdp.reward(s, a));
      p_state.push_back(mdp.transition(s, a).dense(S));
    }
    rewards.push_back(std::move(r_row));
    transitions.push_back(std::move(p_state));
  }
  Json j;
  j["num_states"] = S;
  j["num_actions"] = A;
  j["gamma"] = mdp.discount();
  j["r_max"] = mdp.r_max();
  j["nonnegative_rewards"] = mdp.options().require_nonnegative_rewards;
  j["mu"] = std::vector<double>(mdp.init_dist().begin(), mdp.init_dist().end());
  j["rewards"] = std::move(rewards);
  j["transitions"] = std::move(transitions);
  return j;
}

FiniteMdp mdp_from_json(const Json& j) {
  const auto S = field<std::size_t>(j, "num_states");
  const auto A = field<std::size_t>(j, "num_actions");
  const auto rewards = field<std::vector<std::vector<double>>>(j, "rewards");
  const auto transitions = field<std::vector<std::vector<std::vector<double>>>>(j, "transitions");
  require(rewards.size() == S && transitions.size() == S, "json: MDP state count mismatch");
  std::vector<double> r, p;
  r.reserve(S * A);
  p.reserve(S * A * S);
  for (std::size_t s = 0; s < S; ++s) {
    require(rewards[s].size() == A && transitions[s].size() == A, "json: MDP action count mismatch");
    for (std::size_t a = 0; a < A; ++a) {
      r.push_back(rewards[s][a]);
      require(transitions[s][a].size() == S, "json: transition row length mismatch");
      p.insert(p.end(), transitions[s][a].begin(), transitions[s][a].end());
    }
  }
  FiniteMdp::Options opts;
  if (j.contains("nonnegative_rewards")) opts.require_nonnegative_rewards = field<bool>(j, "nonnegative_rewards");
  return dense_mdp(S, A, field<std::vector<double>>(j, "mu"), p, std::move(r),
                   field<double>(j, "gamma"), field<double>(j, "r_max"), opts);
}

Json ensemble_to_json(const Ensemble& ens) {
  Json clients = Json::array();
  for (const auto& c : ens.clients()) clients.push_back(mdp_to_json(c));
  Json j;
  j["kind"] = "tabular";
  j["weights"] = ens.weights();
  j["clients"] = std::move(clients);
  return j;
}

Ensemble ensemble_from_json(const Json& j) {
  require(field<std::string>(j, "kind") == "tabular", "json: expected a tabular ensemble");
  const Json& clients = j.at("clients");
  require(clients.is_array() && !clients.empty(), "json: ensemble needs at least one client");
  std::vector<FiniteMdp> mdps;
  mdps.reserve(clients.size());
  for (const auto& c : clients) mdps.push_back(mdp_from_json(c));
  return Ensemble(std::move(mdps), field<std::vector<double>>(j, "weights"));
}

Json mountain_car_to_json(const MountainCarRecord& rec) {
  const MountainCarParams& p = rec.params;
  Json j;
  j["kind"] = "mountain_car";
  j["position_bins"] = p.position_bins;
  j["velocity_bins"] = p.velocity_bins;
  j["action_bins"] = p.action_bins;
  j["max_episode_steps"] = p.max_episode_steps;
  j["power"] = p.power;
  j["gravity"] = p.gravity;
  j["goal_position"] = p.goal_position;
  j["min_position"] = p.min_position;
  j["max_position"] = p.max_position;
  j["max_speed"] = p.max_speed;
  j["gamma"] = p.gamma;
  j["clip_shifted_action"] = p.clip_shifted_action;
  j["shifts"] = rec.shifts;
  return j;
}

MountainCarRecord mountain_car_from_json(const Json& j) {
  require(field<std::string>(j, "kind") == "mountain_car", "json: expected a mountain_car record");
  MountainCarRecord rec;
  MountainCarParams& p = rec.params;
  p.position_bins = field<std::size_t>(j, "position_bins");
  p.velocity_bins = field<std::size_t>(j, "velocity_bins");
  p.action_bins = field<std::size_t>(j, "action_bins");
  p.max_episode_steps = field<std::size_t>(j, "max_episode_steps");
  p.power = field<double>(j, "power");
  p.gravity = field<double>(j, "gravity");
  p.goal_position = field<double>(j, "goal_position");
  p.min_position = field<double>(j, "min_position");
  p.max_position = field<double>(j, "max_position");
  p.max_speed = field<double>(j, "max_speed");
  p.gamma = field<double>(j, "gamma");
  p.clip_shifted_action = field<bool>(j, "clip_shifted_action");
  rec.shifts = field<std::vector<double>>(j, "shifts");
  for (double theta : rec.shifts) require(theta >= -1.5 && theta <= 1.5, "json: shift outside [-1.5, 1.5]");
  return rec;
}

Json counts_to_json(const TransitionCounts& counts) {
  Json entries = Json::array();
  Json rewards = Json::array();
  for (std::size_t s = 0; s < counts.num_states(); ++s) {
    for (std::size_t a = 0; a < counts.num_actions(); ++a) {
      if (counts.count(s, a) == 0) continue;
      rewards.push_back(Json::array({s, a, counts.reward_sum(s, a)}));
      for (const auto& succ : counts.successors(s, a)) {
        entries.push_back(Json::array({s, a, succ.next, succ.count}));
      }
    }
  }
  Json j;
  j["num_states"] = counts.num_states();
  j["num_actions"] = counts.num_actions();
  j["transitions"] = std::move(entries);
  j["reward_sums"] = std::move(rewards);
  return j;
}

TransitionCounts counts_from_json(const Json& j) {
  const auto S = field<std::size_t>(j, "num_states");
  const auto A = field<std::size_t>(j, "num_actions");
  std::vector<double> reward(S * A, 0.0);
  std::vector<bool> pending(S * A, false);
  for (const auto& r : j.at("reward_sums")) {
    require(r.is_array() && r.size() == 3, "json: bad reward entry");
    const auto s = r[0].get<std::size_t>(), a = r[1].get<std::size_t>();
    require(s < S && a < A, "json: reward entry out of range");
    reward[s * A + a] = r[2].get<double>();
    pending[s * A + a] = true;
  }
  TransitionCounts counts(S, A);
  for (const auto& e : field<std::vector<std::vector<std::uint64_t>>>(j, "transitions")) {
    require(e.size() == 4 && e[0] < S && e[1] < A && e[2] < S && e[3] > 0, "json: bad count entry");
    const std::size_t i = e[0] * A + e[1];
    // The pair's reward sum rides on its first successor.
    counts.add(e[0], e[1], e[2], e[3], pending[i] ? reward[i] : 0.0);
    pending[i] = false;
  }
  for (bool p : pending) require(!p, "json: reward for unvisited pair");
  return counts;
}

std::string dump_json(const Json& j) { return j.dump(1) + "\n"; }

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << dump_json(j);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractViolation("'" + path + "': " + e.what());
  }
}

}  // namespace fapi
