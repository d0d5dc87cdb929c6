#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rail/policy.hpp"

namespace rail {

struct GmmComponent {
  double weight = 0.0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal covariance

  bool operator==(const GmmComponent&) const = default;
};

// Diagonal-covariance Gaussian mixture over states, plus the calibration
// quantile that turns raw log-densities into [0,1] membership scores.
class GmmModel {
 public:
  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
  int num_components() const { return static_cast<int>(components.size()); }

  // log sum_k pi_k N(s; mu_k, Sigma_k), via log-sum-exp.
  double log_density(std::span<const double> s) const;
  // min(1, exp(log_density(s) - q_alpha)).
  double membership(std::span<const double> s) const;

  void save(std::ostream& os) const;
  static GmmModel load(std::istream& is);

  std::vector<GmmComponent> components;
  double alpha = 0.05;
  double calibration_log_quantile = 0.0;
  std::string label;

  bool operator==(const GmmModel&) const = default;
};

struct GmmFitOptions {
  int components = 8;
  double alpha = 0.05;
  double cov_floor = 1e-4;
  int max_iterations = 200;
  double tolerance = 1e-6;  // on the mean training log-likelihood
};

struct GmmFitReport {
  // Mean training log-likelihood after each EM iteration (index 0: initial).
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  bool covariance_floored = false;
};

GmmModel fit_gmm(std::span<const std::vector<double>> states, const GmmFitOptions& options,
                 std::uint64_t seed, GmmFitReport* report = nullptr);

double gmm_log_density(const GmmModel& model, std::span<const double> s);
double membership_score(const GmmModel& model, std::span<const double> s);

// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double q);

// p(s, a) = pi_ref(a | s) * p_gmm(s), in log space.
class JointDensityModel {
 public:
  // Throws DataError when the two components carry different provenance labels.
  JointDensityModel(std::shared_ptr<const GaussianPolicy> policy_ref, std::shared_ptr<const GmmModel> gmm);

  const GaussianPolicy& policy() const { return *policy_; }
  const GmmModel& gmm() const { return *gmm_; }

  double log_density(std::span<const double> s, std::span<const double> a) const;

 private:
  std::shared_ptr<const GaussianPolicy> policy_;
  std::shared_ptr<const GmmModel> gmm_;
};

double joint_log_density(const JointDensityModel& model, std::span<const double> s, std::span<const double> a);

// exp(clamp(log p_S(s,a) - log p_E(s,a), ln r_min, ln r_max)).
double density_ratio_from_logs(double log_expert, double log_supp, double r_min, double r_max);
double density_ratio(const JointDensityModel& expert, const JointDensityModel& supp, std::span<const double> s,
                     std::span<const double> a, double r_min, double r_max);

}  // namespace rail
