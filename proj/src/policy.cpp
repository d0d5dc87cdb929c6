#include "rail/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rail/binary_io.hpp"
#include "rail/demo_set.hpp"
#include "rail/envs.hpp"
#include "rail/errors.hpp"
#include "rail/gaussian.hpp"

namespace rail {

std::vector<double> ActionBounds::clamp(std::span<const double> action) const {
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size() && i < lo.size(); ++i) out[i] = std::clamp(out[i], lo[i], hi[i]);
  return out;
}

GaussianPolicy::GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden,
                               ActionBounds bounds, RngStream& rng, double initial_log_std)
    : log_std_(action_dim, std::clamp(initial_log_std, kLogStdMin, kLogStdMax)), bounds_(std::move(bounds)) {
  std::vector<int> dims{state_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(action_dim);
  mean_net_ = MlpNetwork::initialized(dims, Activation::kTanh, rng);
  if (bounds_.lo.size() != static_cast<std::size_t>(action_dim) || bounds_.hi.size() != bounds_.lo.size()) {
    throw ShapeError("action bounds must have one interval per action dimension");
  }
}

void GaussianPolicy::clamp_log_std() {
  for (double& v : log_std_) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

std::vector<double> GaussianPolicy::mean(std::span<const double> state) const {
  return mean_net_.forward(state);
}

double GaussianPolicy::log_prob(std::span<const double> state, std::span<const double> action) const {
  const auto mu = mean(state);
  return gaussian_log_prob(mu, log_std_, action);
}

std::vector<double> GaussianPolicy::sample_action(std::span<const double> state, RngStream& rng,
                                                  bool deterministic) const {
  auto a = mean(state);
  if (!deterministic) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += std::exp(log_std_[i]) * rng.normal();
  }
  return bounds_.clamp(a);
}

void GaussianPolicy::save(std::ostream& os) const {
  os << "policy state_dim=" << state_dim() << " action_dim=" << action_dim()
     << " label=" << (label_.empty() ? "-" : label_) << "\n";
  mean_net_.save(os);
  io::write_f64s(os, log_std_);
  io::write_f64s(os, bounds_.lo);
  io::write_f64s(os, bounds_.hi);
}

GaussianPolicy GaussianPolicy::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "missing policy header");
  std::istringstream header(line);
  std::string tag, sd, ad, lab;
  header >> tag >> sd >> ad >> lab;
  if (tag != "policy" || sd.rfind("state_dim=", 0) != 0 || ad.rfind("action_dim=", 0) != 0 ||
      lab.rfind("label=", 0) != 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed policy header: '" + line + "'");
  }
  GaussianPolicy p;
  p.mean_net_ = MlpNetwork::load(is);
  const int state_dim = std::stoi(sd.substr(10));
  const int action_dim = std::stoi(ad.substr(11));
  if (p.mean_net_.input_dim() != state_dim || p.mean_net_.output_dim() != action_dim) {
    throw LoadError(LoadError::Kind::kDimension, "policy header dims disagree with network manifest");
  }
  p.label_ = lab.substr(6) == "-" ? std::string() : lab.substr(6);
  p.log_std_.resize(action_dim);
  p.bounds_.lo.resize(action_dim);
  p.bounds_.hi.resize(action_dim);
  io::read_f64s(is, p.log_std_, "policy log_std");
  io::read_f64s(is, p.bounds_.lo, "policy action bounds");
  io::read_f64s(is, p.bounds_.hi, "policy action bounds");
  return p;
}

PolicyLoss weighted_bc_loss(const GaussianPolicy& policy, std::span<const WeightedSample> batch) {
  if (batch.empty()) throw DataError("weighted_bc_loss: empty batch");
  const int ad = policy.action_dim();
  PolicyLoss out;
  out.grad.mean_net.assign(policy.mean_net().num_params(), 0.0);
  out.grad.log_std.assign(ad, 0.0);

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const auto log_std = policy.log_std();
  std::vector<double> inv_var(ad);
  for (int i = 0; i < ad; ++i) inv_var[i] = std::exp(-2.0 * log_std[i]);

  ForwardCache cache;
  std::vector<double> upstream(ad);
  for (const auto& sample : batch) {
    if (!std::isfinite(sample.weight)) throw DataError("weighted_bc_loss: non-finite weight");
    if (sample.weight < 0.0) throw DataError("weighted_bc_loss: negative weight");
    if (static_cast<int>(sample.action.size()) != ad) throw ShapeError("weighted_bc_loss: action dimension mismatch");
    if (sample.weight == 0.0) continue;
    policy.mean_net().forward(sample.state, cache);
    const auto mu = cache.output();
    const double w = sample.weight * inv_n;
    double nll = 0.0;
    for (int i = 0; i < ad; ++i) {
      const double diff = sample.action[i] - mu[i];
      const double sq = diff * diff * inv_var[i];
      nll += 0.5 * (kLog2Pi + 2.0 * log_std[i] + sq);
      // d(-log p)/d mu_i and d(-log p)/d log_std_i
      upstream[i] = -w * diff * inv_var[i];
      out.grad.log_std[i] += w * (1.0 - sq);
    }
    out.loss += w * nll;
    policy.mean_net().backward(cache, upstream, out.grad.mean_net);
  }
  return out;
}

PolicyOptimizer::PolicyOptimizer(const GaussianPolicy& policy, AdamConfig config)
    : mean_net(policy.mean_net().num_params(), config), log_std(policy.action_dim(), config) {}

void PolicyOptimizer::step(GaussianPolicy& policy, const PolicyGradients& grad) {
  adam_step(policy.mean_net().params(), grad.mean_net, mean_net);
  adam_step(policy.log_std(), grad.log_std, log_std);
  policy.clamp_log_std();
}

GaussianPolicy train_reference_policy(const DemoSet& demos, const PolicyTrainConfig& config,
                                      std::uint64_t seed, std::vector<double>* loss_trace) {
  if (demos.samples.empty()) throw ConfigError("train_reference_policy: empty demonstration set");
  if (config.steps <= 0 || config.batch_size <= 0) throw ConfigError("train_reference_policy: budgets must be positive");
  RngStream init_rng(seed, "policy-init");
  RngStream batch_rng(seed, "policy-batches");
  GaussianPolicy policy(demos.header.state_dim, demos.header.action_dim, config.hidden,
                        bounds_for_env(demos.header.env_id, demos.header.action_dim), init_rng);
  PolicyOptimizer opt(policy, AdamConfig{.learning_rate = config.learning_rate});

  std::vector<WeightedSample> batch(config.batch_size);
  const std::size_t n = demos.samples.size();
  for (int step = 0; step < config.steps; ++step) {
    for (auto& ws : batch) {
      const auto& s = demos.samples[batch_rng.index(n)];
      ws = WeightedSample{s.state, s.action, 1.0};
    }
    auto result = weighted_bc_loss(policy, batch);
    if (!std::isfinite(result.loss)) {
      throw NumericError("reference policy loss became non-finite at step " + std::to_string(step));
    }
    if (loss_trace != nullptr) loss_trace->push_back(result.loss);
    opt.step(policy, result.grad);
  }
  return policy;
}

}  // namespace rail
