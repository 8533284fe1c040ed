#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "fapi/env.hpp"
#include "fapi/imaginary.hpp"
#include "fapi/parallel.hpp"

namespace fapi {

struct EnsembleSpec {
  std::size_t num_clients = 4;
  std::size_t num_states = 5;
  std::size_t num_actions = 3;
  double gamma = 0.9;
  /// 0 gives identical clients, 1 fully independent kernels.
  double heterogeneity = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

/// P_n = (1 - eta) P_base + eta Q_n with rows drawn as normalized uniforms,
/// rewards uniform on [0, 1] (r_max = 1) and uniform client weights.
Ensemble gen_random_ensemble(const EnsembleSpec& spec);

struct MountainCarParams {
  std::size_t position_bins = 40;
  std::size_t velocity_bins = 40;
  std::size_t action_bins = 21;
  std::size_t max_episode_steps = 999;
  double power = 0.0015;
  double gravity = 0.0025;
  double goal_position = 0.45;
  double min_position = -1.2;
  double max_position = 0.6;
  double max_speed = 0.07;
  double gamma = 0.99;
  /// Clip a + theta back to [-1, 1] before it enters the dynamics.
  bool clip_shifted_action = false;

  /// 90 x 90 x 101 grid.
  static MountainCarParams fine_grid();

  friend bool operator==(const MountainCarParams&, const MountainCarParams&) = default;
};

/// theta_n = -1.5 + n / 20 for n = 1..N.
std::vector<double> stepped_shifts(std::size_t n);
/// N evenly spaced shifts covering [-1.5, 1.5].
std::vector<double> linspace_shifts(std::size_t n);

struct CarState {
  double position;
  double velocity;
};

struct CarStep {
  CarState next;
  double reward;
  bool done;
};

/// One step of the continuous mountain car with the action's force shifted
/// by theta. The action is clipped to [-1, 1] first; the control penalty
/// uses the clipped, unshifted action.
CarStep mountain_car_step(CarState state, double action, double shift,
                          const MountainCarParams& params);

/// Grid layout shared by the tabular model and the sampled environment.
class CarGrid {
 public:
  explicit CarGrid(const MountainCarParams& params);

  std::size_t num_states() const { return params_.position_bins * params_.velocity_bins; }
  std::size_t num_actions() const { return params_.action_bins; }
  double action_value(std::size_t a) const;
  std::size_t position_bin(double position) const;
  std::size_t velocity_bin(double velocity) const;
  std::size_t state_index(std::size_t pos_bin, std::size_t vel_bin) const {
    return pos_bin * params_.velocity_bins + vel_bin;
  }
  CarState center(std::size_t state) const;
  /// Position bins whose lower edge is at or past the goal; at least one.
  std::size_t first_terminal_bin() const { return first_terminal_; }
  bool is_terminal(std::size_t state) const {
    return state / params_.velocity_bins >= first_terminal_;
  }
  /// Absorbing state reached from every terminal state.
  std::size_t sink() const { return num_states() - 1; }
  /// Maps a continuous outcome to its grid state, pushing goal arrivals into
  /// the terminal region (never onto the sink) and non-arrivals out of it.
  std::size_t observe(CarState state, bool done) const;

  /// Reward offset making every tabular reward non-negative.
  double reward_offset() const { return 0.1; }
  /// Tabular reward for arriving at the goal region. The goal bonus is
  /// paid one step late, so it is scaled by 1 / gamma.
  double arrival_reward() const { return 100.0 / params_.gamma + reward_offset(); }
  double r_max() const { return arrival_reward(); }
  /// Tabular reward of a non-terminal control step.
  double control_reward(double action) const { return reward_offset() - 0.1 * action * action; }

  const MountainCarParams& params() const { return params_; }

 private:
  MountainCarParams params_;
  std::size_t first_terminal_;
};

/// Deterministic center-of-bin tabular model of one shifted car. Terminal
/// states move to the sink; the goal bonus is collected on the terminal
/// state and the sink pays only the offset.
FiniteMdp discretize_mountain_car(const MountainCarParams& params, double shift);

/// Sampled continuous car observed through the grid.
class MountainCarEnv final : public EpisodicEnv {
 public:
  MountainCarEnv(const MountainCarParams& params, double shift);

  std::size_t num_states() const override { return grid_.num_states(); }
  std::size_t num_actions() const override { return grid_.num_actions(); }
  std::size_t reset(Rng& rng) override;
  StepOutcome step(std::size_t action, Rng& rng) override;

  CarState state() const { return state_; }

 private:
  CarGrid grid_;
  double shift_;
  CarState state_{-0.5, 0.0};
};

struct MountainCarFamily {
  MountainCarParams params;
  std::vector<double> shifts;
  Ensemble ensemble;
  /// Terminal states, whose rows are known and never estimated.
  std::vector<bool> absorbing;

  std::unique_ptr<EpisodicEnv> make_env(std::size_t client) const;
};

MountainCarFamily make_mountain_car_family(const MountainCarParams& params,
                                           std::vector<double> shifts,
                                           const Executor& exec = Executor{});

}  // namespace fapi
