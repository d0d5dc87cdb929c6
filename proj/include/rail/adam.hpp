#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rail {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t num_params, AdamConfig cfg)
      : config(cfg), first_moment(num_params, 0.0), second_moment(num_params, 0.0) {}

  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace rail
