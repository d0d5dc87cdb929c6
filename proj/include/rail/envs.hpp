#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rail/policy.hpp"
#include "rail/rng.hpp"

namespace rail {

enum class EnvId { kPointMass2d, kPendulum1 };

struct EnvSpec {
  EnvId id;
  std::string name;
  int state_dim;
  int action_dim;
  int horizon;
  double dt;
  ActionBounds bounds;
};

// Throws ConfigError listing the valid ids.
EnvSpec make_env_spec(std::string_view env_id);
std::vector<std::string> valid_env_ids();

// Env bounds for known ids; unbounded intervals otherwise (synthetic data).
ActionBounds bounds_for_env(std::string_view env_id, int action_dim);

namespace pointmass {
inline constexpr double kGoalX = 0.8;
inline constexpr double kGoalY = 0.8;
inline constexpr double kVelocityDecay = 0.95;
inline constexpr double kGoalRadius = 0.05;
inline constexpr double kWall = 1.0;
}  // namespace pointmass

namespace pendulum {
inline constexpr double kGravity = 10.0;
inline constexpr double kLength = 1.0;
inline constexpr double kMass = 1.0;
inline constexpr double kMaxSpeed = 8.0;
}  // namespace pendulum

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

std::vector<double> reset(const EnvSpec& spec, RngStream& rng);
StepResult step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action);
std::vector<double> scripted_expert(const EnvSpec& spec, std::span<const double> state);

// Gaussian observation noise; the true state is never modified.
class NoiseWrapper {
 public:
  explicit NoiseWrapper(double sigma = 0.0) : sigma_(sigma) {}
  double sigma() const { return sigma_; }
  std::vector<double> observe(std::span<const double> state, RngStream& rng) const;

 private:
  double sigma_;
};

struct Transition {
  std::vector<double> true_state;
  std::vector<double> observed_state;
  std::vector<double> action;
  double reward = 0.0;
};

struct EpisodeRecord {
  std::vector<Transition> transitions;
  double total_return = 0.0;
  bool terminated_early = false;
};

// Maps the observed state to the (unclamped) action to execute.
using ActionFn = std::function<std::vector<double>(std::span<const double> observed)>;

// Rolls one episode up to the horizon. The action returned by `act` is
// clamped to the bounds before execution and recorded clamped.
EpisodeRecord run_episode(const EnvSpec& spec, const ActionFn& act, RngStream& reset_rng,
                          const NoiseWrapper& noise, RngStream& noise_rng);

}  // namespace rail
