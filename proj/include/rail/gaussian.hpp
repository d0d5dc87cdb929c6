#pragma once

#include <cmath>
#include <span>

namespace rail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Diagonal-Gaussian log density:
//   -1/2 * sum_i [ log(2*pi*sigma_i^2) + (a_i - mu_i)^2 / sigma_i^2 ],  sigma_i = exp(log_std_i)
double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

inline double logistic(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace rail
