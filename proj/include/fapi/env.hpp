#pragma once

#include <cstddef>

#include "fapi/mdp.hpp"
#include "fapi/rng.hpp"

namespace fapi {

struct StepOutcome {
  std::size_t next_state;
  /// Reward on the tabular (non-negative) scale.
  double reward;
  /// Reward in the environment's own units, used for reported returns.
  double reported_reward;
  bool done;
};

/// Episodic environment with discrete observations and actions.
class EpisodicEnv {
 public:
  virtual ~EpisodicEnv() = default;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t reset(Rng& rng) = 0;
  virtual StepOutcome step(std::size_t action, Rng& rng) = 0;
};

/// Samples a FiniteMdp; never terminates on its own.
class TabularEnv final : public EpisodicEnv {
 public:
  explicit TabularEnv(const FiniteMdp& mdp) : mdp_(&mdp) {}

  std::size_t num_states() const override { return mdp_->num_states(); }
  std::size_t num_actions() const override { return mdp_->num_actions(); }

  std::size_t reset(Rng& rng) override {
    state_ = rng.categorical(mdp_->init_dist());
    return state_;
  }

  StepOutcome step(std::size_t action, Rng& rng) override {
    const auto& row = mdp_->transition(state_, action);
    const double reward = mdp_->reward(state_, action);
    double u = rng.uniform();
    std::size_t next = row.entries().empty() ? 0 : row.entries().back().next;
    bool drawn = false;
    for (const auto& e : row.entries()) {
      if (u < e.prob) {
        next = e.next;
        drawn = true;
        break;
      }
      u -= e.prob;
    }
    if (!drawn && row.uniform_mass() > 0.0) next = rng.index(mdp_->num_states());
    state_ = next;
    return {next, reward, reward, false};
  }

 private:
  const FiniteMdp* mdp_;
  std::size_t state_ = 0;
};

}  // namespace fapi
