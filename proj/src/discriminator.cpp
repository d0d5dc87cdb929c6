#include "rail/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rail/errors.hpp"
#include "rail/gaussian.hpp"

namespace rail {
namespace {

std::vector<double> concat(std::span<const double> s, std::span<const double> a) {
  std::vector<double> x;
  x.reserve(s.size() + a.size());
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

// Accumulates the gradient of `scale * f(d)` for one sample, given
// df/dd = `dloss_dd`. Gradient is zero where the clip is active.
struct SampleEval {
  double d = 0.0;
  double dd_dlogit = 0.0;
};

SampleEval eval_sample(const DiscriminatorModel& model, const DiscSample& sample, ForwardCache& cache) {
  const auto x = concat(sample.state, sample.action);
  model.net().forward(x, cache);
  const double raw = logistic(cache.output()[0]);
  if (raw < kDiscClipLo) return {kDiscClipLo, 0.0};
  if (raw > kDiscClipHi) return {kDiscClipHi, 0.0};
  return {raw, raw * (1.0 - raw)};
}

void accumulate(const DiscriminatorModel& model, const ForwardCache& cache, double upstream, DiscLoss& out) {
  if (upstream == 0.0) return;
  const double up[1] = {upstream};
  model.net().backward(cache, up, out.grad);
}

DiscLoss empty_loss(const DiscriminatorModel& model) {
  DiscLoss out;
  out.grad.assign(model.net().num_params(), 0.0);
  return out;
}

// Adds  mean over `batch` of -w * log d  (positive = true) or -w * log(1 - d).
void add_bce_term(const DiscriminatorModel& model, std::span<const DiscSample> batch, bool positive,
                  bool use_weight, DiscLoss& out) {
  if (batch.empty()) throw DataError("discriminator loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  ForwardCache cache;
  for (const auto& sample : batch) {
    const double w = use_weight ? sample.value : 1.0;
    if (!std::isfinite(w)) throw DataError("discriminator loss: non-finite sample weight");
    if (w == 0.0) continue;
    const auto e = eval_sample(model, sample, cache);
    if (positive) {
      out.loss += -w * std::log(e.d) * inv_n;
      accumulate(model, cache, -w / e.d * e.dd_dlogit * inv_n, out);
    } else {
      out.loss += -w * std::log(1.0 - e.d) * inv_n;
      accumulate(model, cache, w / (1.0 - e.d) * e.dd_dlogit * inv_n, out);
    }
  }
}

}  // namespace

DiscriminatorModel::DiscriminatorModel(int state_dim, int action_dim, const std::vector<int>& hidden,
                                       RngStream& rng)
    : state_dim_(state_dim) {
  std::vector<int> dims{state_dim + action_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  net_ = MlpNetwork::initialized(dims, Activation::kRelu, rng);
}

DiscriminatorModel::DiscriminatorModel(int state_dim, MlpNetwork net) : state_dim_(state_dim), net_(std::move(net)) {
  if (net_.output_dim() != 1 || net_.input_dim() <= state_dim_) {
    throw ShapeError("discriminator network must map state+action to one value");
  }
}

double DiscriminatorModel::logit(std::span<const double> s, std::span<const double> a) const {
  if (static_cast<int>(s.size()) != state_dim_ || static_cast<int>(a.size()) != action_dim()) {
    throw ShapeError("discriminator: state/action dimension mismatch");
  }
  return net_.forward(concat(s, a))[0];
}

double DiscriminatorModel::raw(std::span<const double> s, std::span<const double> a) const {
  return logistic(logit(s, a));
}

double DiscriminatorModel::operator()(std::span<const double> s, std::span<const double> a) const {
  return clip_probability(logit(s, a));
}

void DiscriminatorModel::save(std::ostream& os) const {
  os << "discriminator state_dim=" << state_dim_ << " clip=" << kDiscClipLo << "," << kDiscClipHi << "\n";
  net_.save(os);
}

DiscriminatorModel DiscriminatorModel::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "missing discriminator header");
  std::istringstream header(line);
  std::string tag, sd;
  header >> tag >> sd;
  if (tag != "discriminator" || sd.rfind("state_dim=", 0) != 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed discriminator header: '" + line + "'");
  }
  const int state_dim = std::stoi(sd.substr(10));
  auto net = MlpNetwork::load(is);
  try {
    return DiscriminatorModel(state_dim, std::move(net));
  } catch (const ShapeError& e) {
    throw LoadError(LoadError::Kind::kDimension, e.what());
  }
}

double disc_forward(const DiscriminatorModel& model, std::span<const double> s, std::span<const double> a) {
  return model(s, a);
}

double clip_probability(double logit) { return std::clamp(logistic(logit), kDiscClipLo, kDiscClipHi); }

double lambda_schedule(long long step, long long cutoff) {
  if (step <= cutoff) return 1.0;
  return 1.0 / (1.0 + std::log(static_cast<double>(step - cutoff + 1)));
}

double bc_weight_from_output(double d) {
  const double c = std::clamp(d, kDiscClipLo, kDiscClipHi);
  return c / (1.0 - c);
}

double bc_weight(const DiscriminatorModel& model, std::span<const double> s, std::span<const double> a) {
  return bc_weight_from_output(model(s, a));
}

double reg_target(double log_expert, double log_supp) { return logistic(log_expert - log_supp); }

DiscLoss offline_disc_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                           std::span<const DiscSample> supp) {
  auto out = empty_loss(model);
  add_bce_term(model, expert, true, false, out);
  add_bce_term(model, supp, false, true, out);
  return out;
}

DiscLoss reg_loss(const DiscriminatorModel& model, std::span<const DiscSample> mixed) {
  if (mixed.empty()) throw DataError("reg_loss: empty batch");
  auto out = empty_loss(model);
  const double inv_n = 1.0 / static_cast<double>(mixed.size());
  ForwardCache cache;
  for (const auto& sample : mixed) {
    const auto e = eval_sample(model, sample, cache);
    const double diff = e.d - sample.value;
    out.loss += diff * diff * inv_n;
    accumulate(model, cache, 2.0 * diff * e.dd_dlogit * inv_n, out);
  }
  return out;
}

DiscLoss combined_offline_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                               std::span<const DiscSample> supp, std::span<const DiscSample> mixed, double lambda) {
  auto out = offline_disc_loss(model, expert, supp);
  if (lambda == 0.0) return out;
  const auto reg = reg_loss(model, mixed);
  out.loss += lambda * reg.loss;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += lambda * reg.grad[i];
  return out;
}

DiscLoss online_disc_loss(const DiscriminatorModel& model, std::span<const DiscSample> expert,
                          std::span<const DiscSample> online) {
  auto out = empty_loss(model);
  add_bce_term(model, expert, true, false, out);
  add_bce_term(model, online, false, true, out);
  return out;
}

double eval_discriminator(const DiscriminatorModel& model, std::span<const DiscSample> held_out_expert,
                          std::span<const DiscSample> held_out_supp) {
  if (held_out_expert.empty() || held_out_supp.empty()) throw DataError("eval_discriminator: empty split");
  double pos = 0.0;
  for (const auto& s : held_out_expert) pos += -std::log(model(s.state, s.action));
  double neg = 0.0;
  for (const auto& s : held_out_supp) neg += -std::log(1.0 - model(s.state, s.action));
  return 0.5 * (pos / static_cast<double>(held_out_expert.size()) + neg / static_cast<double>(held_out_supp.size()));
}

double pointwise_optimum(double p_expert, double p_supp, double alpha_expert, double alpha_supp, double lambda,
                         double gamma, double tol) {
  if (!(p_expert > 0.0 && p_supp > 0.0 && alpha_expert > 0.0 && alpha_supp > 0.0 && gamma > 0.0 && lambda >= 0.0)) {
    throw NumericError("pointwise_optimum: densities and weights must be positive, lambda non-negative");
  }
  const double eta = p_expert / (p_expert + p_supp);
  const double a = alpha_expert * p_expert;
  const double b = alpha_supp * p_supp;
  const double c = 2.0 * lambda * gamma;
  // Strictly increasing in d on (0, 1).
  auto stationarity = [&](double d) { return -a / d + b / (1.0 - d) + c * (d - eta); };
  double lo = 0.0;
  double hi = 1.0;
  constexpr double kEdge = 1e-300;
  if (!(stationarity(kEdge) < 0.0 && stationarity(1.0 - 1e-16) > 0.0)) {
    throw NumericError("pointwise_optimum: no sign change on (0,1)");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (stationarity(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace rail
