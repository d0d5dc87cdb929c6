#include "rail/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rail/binary_io.hpp"
#include "rail/errors.hpp"
#include "rail/gaussian.hpp"

namespace rail {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

// log N(s; mean, diag(var))
double component_log_pdf(const GmmComponent& c, std::span<const double> s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] - c.mean[i];
    acc += kLog2Pi + std::log(c.variance[i]) + d * d / c.variance[i];
  }
  return -0.5 * acc;
}

void fill_component_logs(const GmmModel& model, std::span<const double> s, std::vector<double>& out) {
  out.resize(model.components.size());
  for (std::size_t k = 0; k < model.components.size(); ++k) {
    const auto& c = model.components[k];
    out[k] = c.weight > 0.0 ? std::log(c.weight) + component_log_pdf(c, s) : kNegInf;
  }
}

std::size_t count_distinct(std::span<const std::vector<double>> states) {
  std::vector<const std::vector<double>*> ptrs;
  ptrs.reserve(states.size());
  for (const auto& s : states) ptrs.push_back(&s);
  std::sort(ptrs.begin(), ptrs.end(), [](auto* a, auto* b) { return *a < *b; });
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    if (i == 0 || *ptrs[i] != *ptrs[i - 1]) ++distinct;
  }
  return distinct;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

}  // namespace

double GmmModel::log_density(std::span<const double> s) const {
  if (static_cast<int>(s.size()) != dim()) {
    throw ShapeError("gmm: state has " + std::to_string(s.size()) + " entries, model dimension is " +
                     std::to_string(dim()));
  }
  std::vector<double> logs;
  fill_component_logs(*this, s, logs);
  return log_sum_exp(logs);
}

double GmmModel::membership(std::span<const double> s) const {
  const double ld = log_density(s);
  return std::min(1.0, std::exp(ld - calibration_log_quantile));
}

double gmm_log_density(const GmmModel& model, std::span<const double> s) { return model.log_density(s); }
double membership_score(const GmmModel& model, std::span<const double> s) { return model.membership(s); }

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

GmmModel fit_gmm(std::span<const std::vector<double>> states, const GmmFitOptions& options, std::uint64_t seed,
                 GmmFitReport* report) {
  const int K = options.components;
  if (K < 1) throw ConfigError("fit_gmm: component count must be at least 1");
  if (states.empty()) throw ConfigError("fit_gmm: no states");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("fit_gmm: alpha must lie in (0,1)");
  const std::size_t N = states.size();
  const std::size_t d = states.front().size();
  for (const auto& s : states) {
    if (s.size() != d) throw ShapeError("fit_gmm: inconsistent state dimensions");
  }
  const std::size_t distinct = count_distinct(states);
  if (static_cast<std::size_t>(K) > distinct) {
    throw ConfigError("fit_gmm: " + std::to_string(K) + " components requested but only " +
                      std::to_string(distinct) + " distinct states");
  }

  GmmFitReport local_report;
  GmmFitReport& rep = report != nullptr ? *report : local_report;
  rep = GmmFitReport{};

  // Global variance for initialization.
  std::vector<double> mu(d, 0.0), var(d, 0.0);
  for (const auto& s : states) {
    for (std::size_t i = 0; i < d; ++i) mu[i] += s[i];
  }
  for (double& m : mu) m /= static_cast<double>(N);
  for (const auto& s : states) {
    for (std::size_t i = 0; i < d; ++i) var[i] += (s[i] - mu[i]) * (s[i] - mu[i]);
  }
  for (double& v : var) {
    v /= static_cast<double>(N);
    if (v < options.cov_floor) {
      v = options.cov_floor;
      rep.covariance_floored = true;
    }
  }

  // Farthest-point seeding from a random first center.
  RngStream rng(seed, "gmm-init");
  GmmModel model;
  model.alpha = options.alpha;
  std::vector<double> min_dist(N, std::numeric_limits<double>::infinity());
  std::size_t next = rng.index(N);
  for (int k = 0; k < K; ++k) {
    model.components.push_back(GmmComponent{1.0 / K, states[next], var});
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t n = 0; n < N; ++n) {
      min_dist[n] = std::min(min_dist[n], squared_distance(states[n], states[next]));
      if (min_dist[n] > best_dist) {
        best_dist = min_dist[n];
        best = n;
      }
    }
    next = best;
  }

  std::vector<double> resp(N * K);
  std::vector<double> logs;
  double prev_ll = kNegInf;
  for (int it = 0;; ++it) {
    // E-step.
    double ll = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      fill_component_logs(model, states[n], logs);
      const double lse = log_sum_exp(logs);
      ll += lse;
      for (int k = 0; k < K; ++k) resp[n * K + k] = std::exp(logs[k] - lse);
    }
    ll /= static_cast<double>(N);
    rep.log_likelihood_trace.push_back(ll);
    if (!std::isfinite(ll)) throw NumericError("fit_gmm: non-finite log-likelihood");
    if (it >= options.max_iterations || (it > 0 && std::abs(ll - prev_ll) < options.tolerance)) break;
    prev_ll = ll;
    rep.iterations = it + 1;

    // M-step.
    for (int k = 0; k < K; ++k) {
      auto& c = model.components[k];
      double nk = 0.0;
      for (std::size_t n = 0; n < N; ++n) nk += resp[n * K + k];
      c.weight = nk / static_cast<double>(N);
      if (nk < 1e-12 * static_cast<double>(N)) continue;  // starved component keeps its shape
      std::vector<double> mean(d, 0.0);
      for (std::size_t n = 0; n < N; ++n) {
        const double r = resp[n * K + k];
        for (std::size_t i = 0; i < d; ++i) mean[i] += r * states[n][i];
      }
      for (double& m : mean) m /= nk;
      std::vector<double> v(d, 0.0);
      for (std::size_t n = 0; n < N; ++n) {
        const double r = resp[n * K + k];
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = states[n][i] - mean[i];
          v[i] += r * diff * diff;
        }
      }
      for (double& x : v) {
        x /= nk;
        if (x < options.cov_floor) {
          x = options.cov_floor;
          rep.covariance_floored = true;
        }
      }
      c.mean = std::move(mean);
      c.variance = std::move(v);
    }
    // Renormalize weights against rounding drift.
    double total = 0.0;
    for (const auto& c : model.components) total += c.weight;
    for (auto& c : model.components) c.weight /= total;
  }

  std::vector<double> train_logs(N);
  for (std::size_t n = 0; n < N; ++n) train_logs[n] = model.log_density(states[n]);
  model.calibration_log_quantile = empirical_quantile(std::move(train_logs), options.alpha);
  return model;
}

void GmmModel::save(std::ostream& os) const {
  os << "gmm K=" << components.size() << " dim=" << dim() << " label=" << (label.empty() ? "-" : label) << "\n";
  io::write_f64(os, alpha);
  io::write_f64(os, calibration_log_quantile);
  for (const auto& c : components) {
    io::write_f64(os, c.weight);
    io::write_f64s(os, c.mean);
    io::write_f64s(os, c.variance);
  }
}

GmmModel GmmModel::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "missing gmm header");
  std::istringstream header(line);
  std::string tag, kf, df, lf;
  header >> tag >> kf >> df >> lf;
  if (tag != "gmm" || kf.rfind("K=", 0) != 0 || df.rfind("dim=", 0) != 0 || lf.rfind("label=", 0) != 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed gmm header: '" + line + "'");
  }
  int K = 0, dim = 0;
  try {
    K = std::stoi(kf.substr(2));
    dim = std::stoi(df.substr(4));
  } catch (const std::exception&) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed gmm header: '" + line + "'");
  }
  if (K < 1 || dim < 1) throw LoadError(LoadError::Kind::kMalformedHeader, "gmm header dims must be positive");
  GmmModel m;
  m.label = lf.substr(6) == "-" ? std::string() : lf.substr(6);
  m.alpha = io::read_f64(is, "gmm alpha");
  m.calibration_log_quantile = io::read_f64(is, "gmm quantile");
  for (int k = 0; k < K; ++k) {
    GmmComponent c;
    c.weight = io::read_f64(is, "gmm component");
    c.mean.resize(dim);
    c.variance.resize(dim);
    io::read_f64s(is, c.mean, "gmm component");
    io::read_f64s(is, c.variance, "gmm component");
    m.components.push_back(std::move(c));
  }
  return m;
}

JointDensityModel::JointDensityModel(std::shared_ptr<const GaussianPolicy> policy_ref,
                                     std::shared_ptr<const GmmModel> gmm)
    : policy_(std::move(policy_ref)), gmm_(std::move(gmm)) {
  if (!policy_ || !gmm_) throw ConfigError("joint density needs both a reference policy and a gmm");
  if (policy_->label() != gmm_->label) {
    throw DataError("joint density provenance mismatch: policy '" + policy_->label() + "' vs gmm '" +
                    gmm_->label + "'");
  }
  if (policy_->state_dim() != gmm_->dim()) throw ShapeError("joint density: policy and gmm state dims differ");
}

double JointDensityModel::log_density(std::span<const double> s, std::span<const double> a) const {
  return policy_->log_prob(s, a) + gmm_->log_density(s);
}

double joint_log_density(const JointDensityModel& model, std::span<const double> s, std::span<const double> a) {
  return model.log_density(s, a);
}

double density_ratio_from_logs(double log_expert, double log_supp, double r_min, double r_max) {
  const double diff = std::clamp(log_supp - log_expert, std::log(r_min), std::log(r_max));
  return std::exp(diff);
}

double density_ratio(const JointDensityModel& expert, const JointDensityModel& supp, std::span<const double> s,
                     std::span<const double> a, double r_min, double r_max) {
  return density_ratio_from_logs(expert.log_density(s, a), supp.log_density(s, a), r_min, r_max);
}

}  // namespace rail
