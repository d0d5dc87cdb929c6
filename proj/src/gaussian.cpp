#include "rail/gaussian.hpp"

#include <cmath>
#include <string>

#include "rail/errors.hpp"

namespace rail {

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw ShapeError("gaussian_log_prob: dimension mismatch (mean " + std::to_string(mean.size()) +
                     ", log_std " + std::to_string(log_std.size()) + ", action " +
                     std::to_string(action.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    acc += kLog2Pi + 2.0 * log_std[i] + z * z;
  }
  return -0.5 * acc;
}

}  // namespace rail
