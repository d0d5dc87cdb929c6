#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "rail/adam.hpp"
#include "rail/mlp.hpp"
#include "rail/rng.hpp"

namespace rail {

inline constexpr double kDiscClipLo = 0.01;
inline constexpr double kDiscClipHi = 0.99;

// Scalar-output MLP over concat(s, a), squashed by a logistic and clipped.
class DiscriminatorModel {
 public:
  DiscriminatorModel() = default;
  DiscriminatorModel(int state_dim, int action_dim, const std::vector<int>& hidden, RngStream& rng);
  // Wraps an existing network (input dim must be state_dim + action_dim).
  DiscriminatorModel(int state_dim, MlpNetwork net);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return net_.input_dim() - state_dim_; }
  MlpNetwork& net() { return net_; }
  const MlpNetwork& net() const { return net_; }

  double logit(std::span<const double> s, std::span<const double> a) const;
  // Logistic of the logit, in (0, 1).
  double raw(std::span<const double> s, std::span<const double> a) const;
  // raw() clipped to [kDiscClipLo, kDiscClipHi]; the only form consumed downstream.
  double operator()(std::span<const double> s, std::span<const double> a) const;

  void save(std::ostream& os) const;
  static DiscriminatorModel load(std::istream& is);

  bool operator==(const DiscriminatorModel&) const = default;

 private:
  int state_dim_ = 0;
  MlpNetwork net_;
};

double disc_forward(const DiscriminatorModel& model, std::span<const double> s, std::span<const double> a);

// Clipped logistic of a pre-logistic value.
double clip_probability(double logit);

// Regularizer weight: 1 up to `cutoff`, then 1 / (1 + ln(t - cutoff + 1)).
double lambda_schedule(long long step, long long cutoff = 10000);

// Odds of a clipped discriminator output, d / (1 - d); lies in [1/99, 99].
double bc_weight_from_output(double d);
double bc_weight(const DiscriminatorModel& model, std::span<const double> s, std::span<const double> a);

// logistic(log p_E - log p_S), the posterior p_E / (p_E + p_S) in log space.
double reg_target(double log_expert, double log_supp);

// (s, a) with one per-sample scalar whose meaning depends on the loss: the
// importance ratio for supplementary samples, the regression target for the
// regularizer, kappa for online samples. Ignored for expert samples.
struct DiscSample {
  std::span<const double> state;
  std::span<const double> action;
  double value = 1.0;
};

struct DiscLoss {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. net().params()
};

// E_E[-log d] + E_S[-r log(1 - d)], r = DiscSample::value.
DiscLoss offline_disc_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                           std::span<const DiscSample> supp);
// E_mix[(d - eta)^2], eta = DiscSample::value.
DiscLoss reg_loss(const DiscriminatorModel& model, std::span<const DiscSample> mixed);
// offline_disc_loss + lambda * reg_loss.
DiscLoss combined_offline_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                               std::span<const DiscSample> supp, std::span<const DiscSample> mixed, double lambda);
// E_E[-log d] + E_X[-kappa log(1 - d)], kappa = DiscSample::value.
DiscLoss online_disc_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                          std::span<const DiscSample> online);

// Unweighted, class-balanced binary cross-entropy (expert label 1).
double eval_discriminator(const DiscriminatorModel& model, std::span<const DiscSample> held_out_expert,
                          std::span<const DiscSample> held_out_supp);

// Pointwise minimizer of
//   -aE pE log d - aS pS log(1 - d) + lambda * gamma * (d - eta)^2,  eta = pE / (pE + pS),
// found by bisection on the stationarity condition to absolute tolerance `tol`.
double pointwise_optimum(double p_expert, double p_supp, double alpha_expert, double alpha_supp, double lambda,
                         double gamma, double tol = 1e-10);

}  // namespace rail
