#include "rail/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rail/errors.hpp"

namespace rail {
namespace {

double wrap_angle(double theta) {
  return std::remainder(theta, 2.0 * std::numbers::pi);
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite ") + what);
  }
}

StepResult step_pointmass(const EnvSpec& spec, std::span<const double> state, std::span<const double> action) {
  using namespace pointmass;
  const auto a = spec.bounds.clamp(action);
  double x = state[0], y = state[1], vx = state[2], vy = state[3];
  vx = kVelocityDecay * vx + a[0] * spec.dt;
  vy = kVelocityDecay * vy + a[1] * spec.dt;
  x += vx * spec.dt;
  y += vy * spec.dt;
  // Inelastic walls keep the position inside the arena.
  if (x > kWall || x < -kWall) {
    x = std::clamp(x, -kWall, kWall);
    vx = 0.0;
  }
  if (y > kWall || y < -kWall) {
    y = std::clamp(y, -kWall, kWall);
    vy = 0.0;
  }
  const double dist = std::hypot(x - kGoalX, y - kGoalY);
  return StepResult{{x, y, vx, vy}, -dist, dist < kGoalRadius};
}

StepResult step_pendulum(const EnvSpec& spec, std::span<const double> state, std::span<const double> action) {
  using namespace pendulum;
  const auto a = spec.bounds.clamp(action);
  const double torque = a[0];
  // theta is measured from upright; upright is the unstable equilibrium.
  const double theta = std::atan2(state[1], state[0]);
  double omega = state[2];
  const double cost = theta * theta + 0.1 * omega * omega + 0.001 * torque * torque;
  const double accel = (kGravity / kLength) * std::sin(theta) + torque / (kMass * kLength * kLength);
  omega = std::clamp(omega + accel * spec.dt, -kMaxSpeed, kMaxSpeed);
  const double next = wrap_angle(theta + omega * spec.dt);
  return StepResult{{std::cos(next), std::sin(next), omega}, -cost, false};
}

std::vector<double> expert_pointmass(std::span<const double> s) {
  using namespace pointmass;
  const double ax = 2.0 * (kGoalX - s[0]) - 1.0 * s[2];
  const double ay = 2.0 * (kGoalY - s[1]) - 1.0 * s[3];
  return {std::clamp(ax, -1.0, 1.0), std::clamp(ay, -1.0, 1.0)};
}

// Energy pumping far from upright, PD stabilization near it.
std::vector<double> expert_pendulum(std::span<const double> s) {
  using namespace pendulum;
  const double theta = std::atan2(s[1], s[0]);
  const double omega = s[2];
  double torque = 0.0;
  if (std::abs(theta) < 0.5 && std::abs(omega) < 3.0) {
    torque = -20.0 * theta - 5.0 * omega;
  } else {
    const double energy = 0.5 * omega * omega + (kGravity / kLength) * (std::cos(theta) - 1.0);
    const double dir = omega >= 0.0 ? 1.0 : -1.0;
    torque = energy < 0.0 ? 2.0 * dir : -2.0 * dir * std::min(1.0, std::abs(energy));
  }
  return {std::clamp(torque, -2.0, 2.0)};
}

}  // namespace

std::vector<std::string> valid_env_ids() { return {"pointmass2d", "pendulum1"}; }

EnvSpec make_env_spec(std::string_view env_id) {
  if (env_id == "pointmass2d") {
    return EnvSpec{EnvId::kPointMass2d, "pointmass2d", 4, 2, 200, 0.1, ActionBounds{{-1.0, -1.0}, {1.0, 1.0}}};
  }
  if (env_id == "pendulum1") {
    return EnvSpec{EnvId::kPendulum1, "pendulum1", 3, 1, 200, 0.1, ActionBounds{{-2.0}, {2.0}}};
  }
  std::string valid;
  for (const auto& id : valid_env_ids()) valid += (valid.empty() ? "" : ", ") + id;
  throw ConfigError("unknown env '" + std::string(env_id) + "' (valid: " + valid + ")");
}

ActionBounds bounds_for_env(std::string_view env_id, int action_dim) {
  for (const auto& id : valid_env_ids()) {
    if (id == env_id) return make_env_spec(env_id).bounds;
  }
  const double inf = std::numeric_limits<double>::infinity();
  return ActionBounds{std::vector<double>(action_dim, -inf), std::vector<double>(action_dim, inf)};
}

std::vector<double> reset(const EnvSpec& spec, RngStream& rng) {
  switch (spec.id) {
    case EnvId::kPointMass2d: {
      const double x = rng.uniform(-1.0, 1.0);
      const double y = rng.uniform(-1.0, 1.0);
      return {x, y, 0.0, 0.0};
    }
    case EnvId::kPendulum1: {
      const double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double omega = rng.uniform(-1.0, 1.0);
      return {std::cos(theta), std::sin(theta), omega};
    }
  }
  throw ConfigError("unhandled env");
}

StepResult step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action) {
  if (static_cast<int>(state.size()) != spec.state_dim || static_cast<int>(action.size()) != spec.action_dim) {
    throw ShapeError("step: state/action dimension mismatch for " + spec.name);
  }
  check_finite(state, "state");
  check_finite(action, "action");
  switch (spec.id) {
    case EnvId::kPointMass2d:
      return step_pointmass(spec, state, action);
    case EnvId::kPendulum1:
      return step_pendulum(spec, state, action);
  }
  throw ConfigError("unhandled env");
}

std::vector<double> scripted_expert(const EnvSpec& spec, std::span<const double> state) {
  switch (spec.id) {
    case EnvId::kPointMass2d:
      return expert_pointmass(state);
    case EnvId::kPendulum1:
      return expert_pendulum(state);
  }
  throw ConfigError("unhandled env");
}

std::vector<double> NoiseWrapper::observe(std::span<const double> state, RngStream& rng) const {
  std::vector<double> obs(state.begin(), state.end());
  if (sigma_ == 0.0) return obs;
  for (double& v : obs) v += rng.normal(0.0, sigma_);
  return obs;
}

EpisodeRecord run_episode(const EnvSpec& spec, const ActionFn& act, RngStream& reset_rng,
                          const NoiseWrapper& noise, RngStream& noise_rng) {
  EpisodeRecord rec;
  auto state = reset(spec, reset_rng);
  for (int t = 0; t < spec.horizon; ++t) {
    auto observed = noise.observe(state, noise_rng);
    auto action = spec.bounds.clamp(act(observed));
    auto result = step(spec, state, action);
    rec.total_return += result.reward;
    rec.transitions.push_back(Transition{state, std::move(observed), std::move(action), result.reward});
    state = std::move(result.next_state);
    if (result.done) {
      rec.terminated_early = t + 1 < spec.horizon;
      break;
    }
  }
  return rec;
}

}  // namespace rail
