#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rail/adam.hpp"
#include "rail/mlp.hpp"
#include "rail/rng.hpp"

namespace rail {

class DemoSet;

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct ActionBounds {
  std::vector<double> lo;
  std::vector<double> hi;

  std::vector<double> clamp(std::span<const double> action) const;
  bool operator==(const ActionBounds&) const = default;
};

// Diagonal-Gaussian policy: mean from a tanh MLP, state-independent log-std.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden, ActionBounds bounds,
                 RngStream& rng, double initial_log_std = -0.5);

  int state_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return mean_net_.output_dim(); }
  const ActionBounds& bounds() const { return bounds_; }

  MlpNetwork& mean_net() { return mean_net_; }
  const MlpNetwork& mean_net() const { return mean_net_; }
  std::span<double> log_std() { return log_std_; }
  std::span<const double> log_std() const { return log_std_; }
  // Re-projects log_std into [kLogStdMin, kLogStdMax].
  void clamp_log_std();

  // Provenance label ("expert", "supplementary", "main", ...).
  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  std::vector<double> mean(std::span<const double> state) const;
  double log_prob(std::span<const double> state, std::span<const double> action) const;
  // Samples N(mu(s), diag sigma^2) and clamps to the bounds; deterministic
  // mode returns the clamped mean.
  std::vector<double> sample_action(std::span<const double> state, RngStream& rng,
                                    bool deterministic = false) const;

  void save(std::ostream& os) const;
  static GaussianPolicy load(std::istream& is);

  bool operator==(const GaussianPolicy&) const = default;

 private:
  MlpNetwork mean_net_;
  std::vector<double> log_std_;
  ActionBounds bounds_;
  std::string label_;
};

struct WeightedSample {
  std::span<const double> state;
  std::span<const double> action;
  double weight = 1.0;
};

struct PolicyGradients {
  std::vector<double> mean_net;
  std::vector<double> log_std;
};

struct PolicyLoss {
  double loss = 0.0;
  PolicyGradients grad;
};

// Mean over the batch of -w * log pi(a|s), with parameter gradients.
PolicyLoss weighted_bc_loss(const GaussianPolicy& policy, std::span<const WeightedSample> batch);

// Adam state for both parameter groups of a policy.
struct PolicyOptimizer {
  PolicyOptimizer() = default;
  PolicyOptimizer(const GaussianPolicy& policy, AdamConfig config);

  void step(GaussianPolicy& policy, const PolicyGradients& grad);

  AdamState mean_net;
  AdamState log_std;
};

struct PolicyTrainConfig {
  std::vector<int> hidden{64, 64};
  int steps = 5000;
  int batch_size = 64;
  double learning_rate = 5e-4;
};

// Plain (unit-weight) behavior cloning on every sample of `demos`.
GaussianPolicy train_reference_policy(const DemoSet& demos, const PolicyTrainConfig& config,
                                      std::uint64_t seed, std::vector<double>* loss_trace = nullptr);

}  // namespace rail
