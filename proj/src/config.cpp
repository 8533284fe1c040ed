#include "fapi/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "fapi/io.hpp"

namespace fapi {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a number, got '" + std::string(v) + "'");
  }
  return x;
}

std::uint64_t parse_u64(std::string_view v) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return x;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> parse_list(std::string_view v) {
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_double(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_list(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out;
}

struct Key {
  const char* section;
  const char* name;
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::string(const RunConfig&)> format;
};

template <class T>
Key size_key(const char* section, const char* name, T RunConfig::*outer, std::size_t T::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v) { (c.*outer).*member = parse_u64(v); },
          [=](const RunConfig& c) { return std::to_string((c.*outer).*member); }};
}

template <class T>
Key double_key(const char* section, const char* name, T RunConfig::*outer, double T::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v) { (c.*outer).*member = parse_double(v); },
          [=](const RunConfig& c) { return format_double((c.*outer).*member); }};
}

template <class T>
Key bool_key(const char* section, const char* name, T RunConfig::*outer, bool T::*member) {
  return {section, name,
          [=](RunConfig& c, std::string_view v) { (c.*outer).*member = parse_bool(v); },
          [=](const RunConfig& c) { return std::string((c.*outer).*member ? "true" : "false"); }};
}

const std::vector<Key>& keys() {
  using R = RunConfig;
  static const std::vector<Key> table = {
      {"ensemble", "kind",
       [](R& c, std::string_view v) {
         if (v == "tabular") c.env = EnvKind::kTabular;
         else if (v == "mountain_car") c.env = EnvKind::kMountainCar;
         else throw std::invalid_argument("kind must be tabular or mountain_car");
       },
       [](const R& c) { return std::string(c.env == EnvKind::kTabular ? "tabular" : "mountain_car"); }},
      size_key("ensemble", "#Clients (N)", &R::ensemble, &EnsembleSpec::num_clients),
      size_key("ensemble", "num_states", &R::ensemble, &EnsembleSpec::num_states),
      size_key("ensemble", "num_actions", &R::ensemble, &EnsembleSpec::num_actions),
      double_key("ensemble", "gamma", &R::ensemble, &EnsembleSpec::gamma),
      double_key("ensemble", "heterogeneity", &R::ensemble, &EnsembleSpec::heterogeneity),
      {"ensemble", "seed", [](R& c, std::string_view v) { c.ensemble.seed = parse_u64(v); },
       [](const R& c) { return std::to_string(c.ensemble.seed); }},
      {"ensemble", "path", [](R& c, std::string_view v) { c.ensemble_path = std::string(v); },
       [](const R& c) { return c.ensemble_path; }},

      size_key("mountain_car", "position_bins", &R::mountain_car, &MountainCarParams::position_bins),
      size_key("mountain_car", "velocity_bins", &R::mountain_car, &MountainCarParams::velocity_bins),
      size_key("mountain_car", "action_bins", &R::mountain_car, &MountainCarParams::action_bins),
      size_key("mountain_car", "max_episode_steps", &R::mountain_car,
               &MountainCarParams::max_episode_steps),
      double_key("mountain_car", "power", &R::mountain_car, &MountainCarParams::power),
      double_key("mountain_car", "gravity", &R::mountain_car, &MountainCarParams::gravity),
      double_key("mountain_car", "goal_position", &R::mountain_car, &MountainCarParams::goal_position),
      double_key("mountain_car", "gamma", &R::mountain_car, &MountainCarParams::gamma),
      bool_key("mountain_car", "clip_shifted_action", &R::mountain_car,
               &MountainCarParams::clip_shifted_action),
      {"mountain_car", "shifts",
       [](R& c, std::string_view v) {
         if (v != "stepped" && v != "linspace") parse_list(v);
         c.shifts = std::string(v);
       },
       [](const R& c) { return c.shifts; }},

      size_key("federation", "rounds", &R::federation, &FederationConfig::num_rounds),
      size_key("federation", "#Candidate Clients (d)", &R::federation, &FederationConfig::candidate_size),
      size_key("federation", "#Participant (K)", &R::federation, &FederationConfig::clients_per_round),
      size_key("federation", "#Local Iteration (I)", &R::federation, &FederationConfig::local_iterations),
      size_key("federation", "episodes_per_iteration", &R::federation,
               &FederationConfig::episodes_per_iteration),
      {"federation", "algorithm",
       [](R& c, std::string_view v) { c.federation.algorithm = parse_algorithm(v); },
       [](const R& c) { return std::string(to_string(c.federation.algorithm)); }},
      {"federation", "strategy",
       [](R& c, std::string_view v) { c.federation.strategy = parse_selection_strategy(v); },
       [](const R& c) { return std::string(to_string(c.federation.strategy)); }},
      {"federation", "learner",
       [](R& c, std::string_view v) { c.federation.learner = parse_learner_kind(v); },
       [](const R& c) { return std::string(to_string(c.federation.learner)); }},
      {"federation", "delta_target",
       [](R& c, std::string_view v) { c.federation.delta_targets = parse_list(v); },
       [](const R& c) { return format_list(c.federation.delta_targets); }},
      {"federation", "eps_target",
       [](R& c, std::string_view v) { c.federation.eps_targets = parse_list(v); },
       [](const R& c) { return format_list(c.federation.eps_targets); }},
      {"federation", "seed", [](R& c, std::string_view v) { c.federation.seed = parse_u64(v); },
       [](const R& c) { return std::to_string(c.federation.seed); }},
      size_key("federation", "threads", &R::federation, &FederationConfig::threads),
      size_key("federation", "episode_horizon", &R::federation, &FederationConfig::episode_horizon),
      size_key("federation", "warmup_episodes", &R::federation, &FederationConfig::warmup_episodes),
      size_key("federation", "eval_episodes", &R::federation, &FederationConfig::eval_episodes),
      size_key("federation", "visitation_horizon", &R::federation,
               &FederationConfig::visitation_horizon),
      bool_key("federation", "use_true_models", &R::federation, &FederationConfig::use_true_models),
      bool_key("federation", "population_delta", &R::federation, &FederationConfig::population_delta),

      {"ppo", "Learning Rate",
       [](R& c, std::string_view v) { c.federation.ppo.learning_rate = parse_double(v); },
       [](const R& c) { return format_double(c.federation.ppo.learning_rate); }},
      double_key("ppo", "Learning Rate Decay", &R::federation, &FederationConfig::lr_decay),
      {"ppo", "Batch Size", [](R& c, std::string_view v) { c.batch_size = parse_u64(v); },
       [](const R& c) { return std::to_string(c.batch_size); }},
      {"ppo", "Timestep per Iteration",
       [](R& c, std::string_view v) { c.timesteps_per_iteration = parse_u64(v); },
       [](const R& c) { return std::to_string(c.timesteps_per_iteration); }},
      {"ppo", "KL Target", [](R& c, std::string_view v) { c.federation.ppo.kl_target = parse_double(v); },
       [](const R& c) { return format_double(c.federation.ppo.kl_target); }},
      {"ppo", "beta_init", [](R& c, std::string_view v) { c.federation.ppo.beta_init = parse_double(v); },
       [](const R& c) { return format_double(c.federation.ppo.beta_init); }},

      {"verify", "enabled", [](R& c, std::string_view v) { c.verify_enabled = parse_bool(v); },
       [](const R& c) { return std::string(c.verify_enabled ? "true" : "false"); }},
      double_key("verify", "tail_fraction", &R::verify, &VerifyOptions::tail_fraction),
      double_key("verify", "max_policies", &R::verify, &VerifyOptions::max_policies),

      {"output", "dir", [](R& c, std::string_view v) { c.output_dir = std::string(v); },
       [](const R& c) { return c.output_dir; }},
  };
  return table;
}

void apply_derived(RunConfig& c) {
  if (c.batch_size == 0) throw ConfigError(0, "Batch Size must be >= 1");
  c.federation.ppo.gradient_steps = (c.timesteps_per_iteration + c.batch_size - 1) / c.batch_size;
  if (c.federation.ppo.gradient_steps == 0) c.federation.ppo.gradient_steps = 1;
  c.federation.step_budget = c.timesteps_per_iteration;
  if (c.env == EnvKind::kMountainCar) c.federation.episode_horizon = c.mountain_car.max_episode_steps;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& k : keys()) known = known || section == k.section;
      if (!known) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    if (section.empty()) throw ConfigError(line_no, "key outside any section");
    const std::string name(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* key = nullptr;
    for (const auto& k : keys()) {
      if (section == k.section && name == k.name) key = &k;
    }
    if (!key) throw ConfigError(line_no, "unknown key '" + name + "' in [" + section + "]");
    if (!seen.insert(section + "/" + name).second) {
      throw ConfigError(line_no, "duplicate key '" + name + "'");
    }
    try {
      key->parse(config, value);
    } catch (const std::exception& e) {
      throw ConfigError(line_no, name + ": " + e.what());
    }
  }
  apply_derived(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += std::string(k.name) + " = " + k.format(config) + "\n";
  }
  return out;
}

std::vector<double> resolve_shifts(const RunConfig& config) {
  const std::size_t n = config.ensemble.num_clients;
  if (config.shifts == "stepped") return stepped_shifts(n);
  if (config.shifts == "linspace") return linspace_shifts(n);
  std::vector<double> out = parse_list(config.shifts);
  if (out.size() != n) throw ConfigError(0, "shift list needs one entry per client");
  return out;
}

Federation build_federation(const RunConfig& config, const Executor& exec) {
  if (config.env == EnvKind::kMountainCar) {
    return make_federation(make_mountain_car_family(config.mountain_car, resolve_shifts(config), exec));
  }
  Ensemble ens = config.ensemble_path.empty() ? gen_random_ensemble(config.ensemble)
                                              : ensemble_from_json(read_json(config.ensemble_path));
  return Federation{std::move(ens), nullptr, {}, false};
}

}  // namespace fapi
