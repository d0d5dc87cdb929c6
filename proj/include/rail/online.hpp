#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rail/adam.hpp"
#include "rail/demo_set.hpp"
#include "rail/density.hpp"
#include "rail/discriminator.hpp"
#include "rail/envs.hpp"
#include "rail/offline.hpp"
#include "rail/policy.hpp"

namespace rail {

// Mean of the two calibrated membership scores.
double kappa(std::span<const double> s, const GmmModel& gmm_expert, const GmmModel& gmm_supp);

struct OnlineSample {
  std::vector<double> state;
  std::vector<double> action;
  double kappa = 0.0;
};

struct ShiftDetectorConfig {
  double kappa_threshold = 0.4;
  int consecutive_required = 20;
  std::size_t buffer_capacity = 2000;
};

class ShiftDetector {
 public:
  explicit ShiftDetector(ShiftDetectorConfig config = {});

  // Returns true when the step completes a run of consecutive_required
  // shifted steps; the counter then restarts from zero.
  bool observe_step(std::span<const double> s, std::span<const double> a, double kappa_value);
  // Appends unconditionally (used by the always-update ablation).
  void record(std::span<const double> s, std::span<const double> a, double kappa_value);
  void reset_count() { consecutive_ = 0; }

  int consecutive_count() const { return consecutive_; }
  const std::deque<OnlineSample>& buffer() const { return buffer_; }
  std::vector<OnlineSample> snapshot() const { return {buffer_.begin(), buffer_.end()}; }
  const ShiftDetectorConfig& config() const { return config_; }

 private:
  ShiftDetectorConfig config_;
  int consecutive_ = 0;
  std::deque<OnlineSample> buffer_;
};

struct OnlineUpdateConfig {
  int disc_steps_per_trigger = 50;
  int policy_steps_per_trigger = 50;
  int batch_size = 64;
  double disc_lr = 5e-4;
  double policy_lr = 5e-4;

  void validate() const;
};

struct UpdateOutcome {
  bool applied = false;
  double disc_loss = 0.0;
  double policy_loss = 0.0;
  std::string message;
};

// Owns the adapting policy and discriminator plus their optimizer state,
// which persists across triggers.
class OnlineLearner {
 public:
  OnlineLearner(GaussianPolicy policy, DiscriminatorModel discriminator, const DemoSet& expert,
                OnlineUpdateConfig config, std::uint64_t seed);

  // Discriminator steps on the online loss, then weighted BC over D_E u D_X.
  // A non-finite loss or gradient restores the pre-update parameters and
  // optimizer state and returns applied = false.
  UpdateOutcome update(std::span<const OnlineSample> snapshot);

  const GaussianPolicy& policy() const { return policy_; }
  const DiscriminatorModel& discriminator() const { return disc_; }

 private:
  UpdateOutcome update_unchecked(std::span<const OnlineSample> snapshot);

  GaussianPolicy policy_;
  DiscriminatorModel disc_;
  const DemoSet* expert_;
  OnlineUpdateConfig config_;
  AdamState disc_opt_;
  PolicyOptimizer policy_opt_;
  RngStream rng_;
};

enum class AdaptMode { kOn, kOff, kAlways };
std::string to_string(AdaptMode mode);
// Throws ConfigError naming the valid modes.
AdaptMode adapt_mode_from_string(const std::string& name);

struct OnlineRunConfig {
  double sigma = 0.0;
  int episodes = 100;
  AdaptMode mode = AdaptMode::kOn;
  std::uint64_t seed = 0;
  bool deterministic_actions = false;
  ShiftDetectorConfig detector;
  OnlineUpdateConfig update;
};

struct TriggerRecord {
  int episode = 0;
  int step = 0;
  double kappa = 0.0;
  bool triggered = false;
  bool aborted = false;

  bool operator==(const TriggerRecord&) const = default;
};

struct UpdateTiming {
  int episode = 0;
  int step = 0;
  double wall_ms = 0.0;
};

struct OnlineRunResult {
  std::vector<double> episode_returns;
  std::vector<TriggerRecord> trigger_log;
  std::vector<UpdateTiming> update_timing;
  int update_count = 0;
  int aborted_updates = 0;
  double update_wall_ms = 0.0;
  GaussianPolicy final_policy;
  DiscriminatorModel final_discriminator;
};

// Rolls config.episodes episodes under observation noise, scoring each
// observed state with kappa and adapting per the mode. GMMs are never
// modified. The consecutive counter restarts at each episode; D_X persists.
OnlineRunResult run_online(const OfflineArtifacts& artifacts, const DemoSet& expert, const EnvSpec& spec,
                           const OnlineRunConfig& config);

// Replays the kappa column of a trigger log (mode on) and returns the
// indices of records whose triggered flag disagrees with the gating rule.
std::vector<std::size_t> gating_violations(std::span<const TriggerRecord> log, const ShiftDetectorConfig& config);

void write_trigger_log(std::span<const TriggerRecord> log, const std::filesystem::path& path);
std::vector<TriggerRecord> read_trigger_log(const std::filesystem::path& path);
void write_episode_returns(std::span<const double> returns, const std::filesystem::path& path);

}  // namespace rail
