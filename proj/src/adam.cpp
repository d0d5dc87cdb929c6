#include "rail/adam.hpp"

#include <cmath>
#include <string>

#include "rail/errors.hpp"

namespace rail {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam: parameter/gradient/moment sizes disagree (" + std::to_string(params.size()) +
                     " params, " + std::to_string(grads.size()) + " grads)");
  }
  const auto& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace rail
