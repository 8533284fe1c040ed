#include "fapi/envs.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fapi/errors.hpp"
#include "fapi/rng.hpp"

namespace fapi {

namespace {

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  double total = 0.0;
  for (double& x : out) {
    // Keep every entry strictly positive.
    x = rng.uniform() + 1e-12;
    total += x;
  }
  for (double& x : out) x /= total;
  return out;
}

}  // namespace

Ensemble gen_random_ensemble(const EnsembleSpec& spec) {
  require(spec.num_clients >= 1 && spec.num_states >= 1 && spec.num_actions >= 1,
          "gen_random_ensemble: empty dimension");
  require(spec.heterogeneity >= 0.0 && spec.heterogeneity <= 1.0,
          "gen_random_ensemble: heterogeneity must lie in [0, 1]");
  const std::size_t S = spec.num_states, A = spec.num_actions;
  Rng rng(stream_seed(spec.seed, 0, 0, Stream::kGenerate));
  std::vector<std::vector<double>> base(S * A);
  for (auto& row : base) row = random_simplex(rng, S);
  const std::vector<double> mu = random_simplex(rng, S);
  std::vector<double> rewards(S * A);
  for (double& r : rewards) r = rng.uniform();

  const double eta = spec.heterogeneity;
  std::vector<FiniteMdp> clients;
  clients.reserve(spec.num_clients);
  for (std::size_t n = 0; n < spec.num_clients; ++n) {
    std::vector<TransitionRow> rows;
    rows.reserve(S * A);
    for (std::size_t i = 0; i < S * A; ++i) {
      const auto q = random_simplex(rng, S);
      std::vector<double> mixed(S);
      for (std::size_t k = 0; k < S; ++k) mixed[k] = (1.0 - eta) * base[i][k] + eta * q[k];
      rows.push_back(TransitionRow::from_dense(mixed));
    }
    clients.emplace_back(S, A, mu, std::move(rows), rewards, spec.gamma, 1.0);
  }
  return Ensemble::uniform(std::move(clients));
}

MountainCarParams MountainCarParams::fine_grid() {
  MountainCarParams p;
  p.position_bins = 90;
  p.velocity_bins = 90;
  p.action_bins = 101;
  return p;
}

std::vector<double> stepped_shifts(std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = -1.5 + static_cast<double>(i + 1) / 20.0;
  return out;
}

std::vector<double> linspace_shifts(std::size_t n) {
  if (n == 1) return {0.0};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = -1.5 + static_cast<double>(i) * 3.0 / static_cast<double>(n - 1);
  }
  return out;
}

CarStep mountain_car_step(CarState state, double action, double shift,
                          const MountainCarParams& p) {
  require(std::isfinite(state.position) && std::isfinite(state.velocity) && std::isfinite(action) &&
              std::isfinite(shift),
          "mountain_car_step: non-finite input");
  const double a = std::clamp(action, -1.0, 1.0);
  double force = a + shift;
  if (p.clip_shifted_action) force = std::clamp(force, -1.0, 1.0);
  double velocity = state.velocity + force * p.power - p.gravity * std::cos(3.0 * state.position);
  velocity = std::clamp(velocity, -p.max_speed, p.max_speed);
  double position = std::clamp(state.position + velocity, p.min_position, p.max_position);
  if (position == p.min_position && velocity < 0.0) velocity = 0.0;
  const bool done = position >= p.goal_position;
  const double reward = (done ? 100.0 : 0.0) - 0.1 * a * a;
  return {{position, velocity}, reward, done};
}

CarGrid::CarGrid(const MountainCarParams& params) : params_(params) {
  require(params_.position_bins >= 2 && params_.velocity_bins >= 2 && params_.action_bins >= 2,
          "mountain car grid: bin counts must be >= 2");
  require(params_.gamma > 0.0 && params_.gamma < 1.0, "mountain car grid: gamma must lie in (0, 1)");
  const double width = (params_.max_position - params_.min_position) /
                       static_cast<double>(params_.position_bins);
  first_terminal_ = params_.position_bins - 1;
  for (std::size_t k = 1; k < params_.position_bins; ++k) {
    if (params_.min_position + static_cast<double>(k) * width >= params_.goal_position) {
      first_terminal_ = k;
      break;
    }
  }
}

double CarGrid::action_value(std::size_t a) const {
  return -1.0 + 2.0 * static_cast<double>(a) / static_cast<double>(params_.action_bins - 1);
}

namespace {

std::size_t bin_of(double x, double lo, double hi, std::size_t n) {
  const double t = (x - lo) / (hi - lo) * static_cast<double>(n);
  if (!(t > 0.0)) return 0;
  return std::min(static_cast<std::size_t>(t), n - 1);
}

}  // namespace

std::size_t CarGrid::position_bin(double position) const {
  return bin_of(position, params_.min_position, params_.max_position, params_.position_bins);
}

std::size_t CarGrid::velocity_bin(double velocity) const {
  return bin_of(velocity, -params_.max_speed, params_.max_speed, params_.velocity_bins);
}

CarState CarGrid::center(std::size_t state) const {
  const std::size_t pb = state / params_.velocity_bins, vb = state % params_.velocity_bins;
  const double pw = (params_.max_position - params_.min_position) / static_cast<double>(params_.position_bins);
  const double vw = 2.0 * params_.max_speed / static_cast<double>(params_.velocity_bins);
  return {params_.min_position + (static_cast<double>(pb) + 0.5) * pw,
          -params_.max_speed + (static_cast<double>(vb) + 0.5) * vw};
}

std::size_t CarGrid::observe(CarState state, bool done) const {
  std::size_t pb = position_bin(state.position);
  std::size_t vb = velocity_bin(state.velocity);
  if (done) {
    pb = std::max(pb, first_terminal_);
    if (state_index(pb, vb) == sink()) --vb;
  } else if (pb >= first_terminal_) {
    pb = first_terminal_ - 1;
  }
  return state_index(pb, vb);
}

FiniteMdp discretize_mountain_car(const MountainCarParams& params, double shift) {
  require(shift >= -1.5 && shift <= 1.5, "discretize_mountain_car: shift must lie in [-1.5, 1.5]");
  const CarGrid grid(params);
  const std::size_t S = grid.num_states(), A = grid.num_actions();
  std::vector<TransitionRow> rows;
  std::vector<double> rewards(S * A);
  rows.reserve(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      if (s == grid.sink()) {
        rows.push_back(TransitionRow::point(s));
        rewards[s * A + a] = grid.reward_offset();
      } else if (grid.is_terminal(s)) {
        rows.push_back(TransitionRow::point(grid.sink()));
        rewards[s * A + a] = grid.arrival_reward();
      } else {
        const double action = grid.action_value(a);
        const CarStep step = mountain_car_step(grid.center(s), action, shift, params);
        rows.push_back(TransitionRow::point(grid.observe(step.next, step.done)));
        rewards[s * A + a] = grid.control_reward(action);
      }
    }
  }

  // Starting positions are uniform on [-0.6, -0.4] at rest.
  std::vector<double> mu(S, 0.0);
  const double pw = (params.max_position - params.min_position) / static_cast<double>(params.position_bins);
  const std::size_t vb = grid.velocity_bin(0.0);
  const double lo = -0.6, hi = -0.4;
  for (std::size_t pb = 0; pb < params.position_bins; ++pb) {
    const double left = params.min_position + static_cast<double>(pb) * pw;
    const double overlap = std::min(hi, left + pw) - std::max(lo, left);
    if (overlap > 0.0) mu[grid.state_index(pb, vb)] += overlap / (hi - lo);
  }
  double total = 0.0;
  for (double m : mu) total += m;
  for (double& m : mu) m /= total;

  return FiniteMdp(S, A, std::move(mu), std::move(rows), std::move(rewards), params.gamma,
                   grid.r_max());
}

MountainCarEnv::MountainCarEnv(const MountainCarParams& params, double shift)
    : grid_(params), shift_(shift) {}

std::size_t MountainCarEnv::reset(Rng& rng) {
  state_ = {rng.uniform(-0.6, -0.4), 0.0};
  return grid_.observe(state_, false);
}

StepOutcome MountainCarEnv::step(std::size_t action, Rng&) {
  const double a = grid_.action_value(action);
  const CarStep step = mountain_car_step(state_, a, shift_, grid_.params());
  state_ = step.next;
  return {grid_.observe(step.next, step.done), grid_.control_reward(a), step.reward, step.done};
}

std::unique_ptr<EpisodicEnv> MountainCarFamily::make_env(std::size_t client) const {
  require(client < shifts.size(), "MountainCarFamily: client out of range");
  return std::make_unique<MountainCarEnv>(params, shifts[client]);
}

MountainCarFamily make_mountain_car_family(const MountainCarParams& params,
                                           std::vector<double> shifts, const Executor& exec) {
  require(!shifts.empty(), "make_mountain_car_family: no clients");
  std::vector<std::optional<FiniteMdp>> slots(shifts.size());
  exec.parallel_for(shifts.size(), [&](std::size_t n) {
    slots[n].emplace(discretize_mountain_car(params, shifts[n]));
  });
  std::vector<FiniteMdp> clients;
  clients.reserve(slots.size());
  for (auto& slot : slots) clients.push_back(std::move(*slot));
  const CarGrid grid(params);
  std::vector<bool> absorbing(grid.num_states());
  for (std::size_t s = 0; s < absorbing.size(); ++s) absorbing[s] = grid.is_terminal(s);
  return MountainCarFamily{params, std::move(shifts), Ensemble::uniform(std::move(clients)),
                           std::move(absorbing)};
}

}  // namespace fapi
