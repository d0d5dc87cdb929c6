#include "rail/online.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rail/config.hpp"
#include "rail/errors.hpp"

namespace rail {

double kappa(std::span<const double> s, const GmmModel& gmm_expert, const GmmModel& gmm_supp) {
  return 0.5 * (gmm_expert.membership(s) + gmm_supp.membership(s));
}

ShiftDetector::ShiftDetector(ShiftDetectorConfig config) : config_(config) {
  if (config_.consecutive_required < 1) throw ConfigError("consecutive_required must be positive");
  if (config_.buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
}

void ShiftDetector::record(std::span<const double> s, std::span<const double> a, double kappa_value) {
  buffer_.push_back(OnlineSample{{s.begin(), s.end()}, {a.begin(), a.end()}, kappa_value});
  while (buffer_.size() > config_.buffer_capacity) buffer_.pop_front();
}

bool ShiftDetector::observe_step(std::span<const double> s, std::span<const double> a, double kappa_value) {
  if (!(kappa_value < config_.kappa_threshold)) {
    consecutive_ = 0;
    return false;
  }
  ++consecutive_;
  record(s, a, kappa_value);
  if (consecutive_ >= config_.consecutive_required) {
    consecutive_ = 0;
    return true;
  }
  return false;
}

void OnlineUpdateConfig::validate() const {
  if (disc_steps_per_trigger <= 0 || policy_steps_per_trigger <= 0) {
    throw ConfigError("per-trigger step counts must be positive");
  }
  if (batch_size <= 0) throw ConfigError("online batch size must be positive");
  if (!(disc_lr > 0.0 && policy_lr > 0.0)) throw ConfigError("online learning rates must be positive");
}

OnlineLearner::OnlineLearner(GaussianPolicy policy, DiscriminatorModel discriminator, const DemoSet& expert,
                             OnlineUpdateConfig config, std::uint64_t seed)
    : policy_(std::move(policy)),
      disc_(std::move(discriminator)),
      expert_(&expert),
      config_(config),
      disc_opt_(disc_.net().num_params(), AdamConfig{.learning_rate = config.disc_lr}),
      policy_opt_(policy_, AdamConfig{.learning_rate = config.policy_lr}),
      rng_(seed, "online-batches") {
  config_.validate();
  if (expert.samples.empty()) throw ConfigError("online adaptation needs a non-empty expert set");
}

UpdateOutcome OnlineLearner::update(std::span<const OnlineSample> snapshot) {
  if (snapshot.empty()) return UpdateOutcome{false, 0.0, 0.0, "empty snapshot"};
  const auto policy_before = policy_;
  const auto disc_before = disc_;
  const auto disc_opt_before = disc_opt_;
  const auto policy_opt_before = policy_opt_;
  std::string message;
  try {
    return update_unchecked(snapshot);
  } catch (const NumericError& e) {
    message = e.what();
  }
  policy_ = policy_before;
  disc_ = disc_before;
  disc_opt_ = disc_opt_before;
  policy_opt_ = policy_opt_before;
  return UpdateOutcome{false, 0.0, 0.0, "update aborted: " + message};
}

UpdateOutcome OnlineLearner::update_unchecked(std::span<const OnlineSample> snapshot) {
  const auto& E = expert_->samples;
  const int B = config_.batch_size;
  UpdateOutcome out;
  std::vector<DiscSample> eb(B), xb(B);
  for (int t = 0; t < config_.disc_steps_per_trigger; ++t) {
    for (int i = 0; i < B; ++i) {
      const auto& e = E[rng_.index(E.size())];
      const auto& x = snapshot[rng_.index(snapshot.size())];
      eb[i] = DiscSample{e.state, e.action, 1.0};
      xb[i] = DiscSample{x.state, x.action, x.kappa};
    }
    auto r = online_disc_loss(disc_, eb, xb);
    if (!std::isfinite(r.loss)) throw NumericError("online discriminator loss non-finite at step " + std::to_string(t + 1));
    adam_step(disc_.net().params(), r.grad, disc_opt_);
    out.disc_loss = r.loss;
  }

  std::vector<WeightedSample> pool;
  pool.reserve(E.size() + snapshot.size());
  for (const auto& e : E) pool.push_back(WeightedSample{e.state, e.action, bc_weight(disc_, e.state, e.action)});
  for (const auto& x : snapshot) pool.push_back(WeightedSample{x.state, x.action, bc_weight(disc_, x.state, x.action)});
  std::vector<WeightedSample> batch(B);
  for (int t = 0; t < config_.policy_steps_per_trigger; ++t) {
    for (auto& ws : batch) ws = pool[rng_.index(pool.size())];
    auto r = weighted_bc_loss(policy_, batch);
    if (!std::isfinite(r.loss)) throw NumericError("online policy loss non-finite at step " + std::to_string(t + 1));
    policy_opt_.step(policy_, r.grad);
    out.policy_loss = r.loss;
  }
  out.applied = true;
  return out;
}

std::string to_string(AdaptMode mode) {
  switch (mode) {
    case AdaptMode::kOn: return "on";
    case AdaptMode::kOff: return "off";
    case AdaptMode::kAlways: return "always";
  }
  return "?";
}

AdaptMode adapt_mode_from_string(const std::string& name) {
  if (name == "on") return AdaptMode::kOn;
  if (name == "off") return AdaptMode::kOff;
  if (name == "always") return AdaptMode::kAlways;
  throw ConfigError("unknown adapt mode '" + name + "' (valid: on, off, always)");
}

OnlineRunResult run_online(const OfflineArtifacts& artifacts, const DemoSet& expert, const EnvSpec& spec,
                           const OnlineRunConfig& config) {
  if (!artifacts.discriminator || !artifacts.gmm_expert || !artifacts.gmm_supp) {
    throw ConfigError("online run needs a discriminator and both state models");
  }
  if (config.episodes <= 0) throw ConfigError("episodes must be positive");
  if (config.sigma < 0.0) throw ConfigError("sigma must be non-negative");
  const GmmModel& gmm_e = *artifacts.gmm_expert;
  const GmmModel& gmm_s = *artifacts.gmm_supp;

  OnlineLearner learner(artifacts.policy, *artifacts.discriminator, expert, config.update,
                        RngStream(config.seed, "online-update").engine()());
  ShiftDetector detector(config.detector);
  const NoiseWrapper noise(config.sigma);
  RngStream reset_rng(config.seed, "online-reset");
  RngStream noise_rng(config.seed, "online-noise");
  RngStream action_rng(config.seed, "online-actions");

  OnlineRunResult result;
  for (int ep = 0; ep < config.episodes; ++ep) {
    RngStream ep_reset = reset_rng.fork(static_cast<std::uint64_t>(ep));
    auto state = reset(spec, ep_reset);
    detector.reset_count();
    double ret = 0.0;
    for (int t = 0; t < spec.horizon; ++t) {
      const auto observed = noise.observe(state, noise_rng);
      const double k = kappa(observed, gmm_e, gmm_s);
      const auto action = learner.policy().sample_action(observed, action_rng, config.deterministic_actions);
      bool trigger = false;
      switch (config.mode) {
        case AdaptMode::kOff: break;
        case AdaptMode::kOn: trigger = detector.observe_step(observed, action, k); break;
        case AdaptMode::kAlways:
          detector.record(observed, action, k);
          trigger = (t + 1) % config.detector.consecutive_required == 0;
          break;
      }
      TriggerRecord rec{ep + 1, t + 1, k, trigger, false};
      if (trigger) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto snap = detector.snapshot();
        const auto outcome = learner.update(snap);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        ++result.update_count;
        result.update_wall_ms += ms;
        result.update_timing.push_back(UpdateTiming{ep + 1, t + 1, ms});
        if (!outcome.applied) {
          rec.aborted = true;
          ++result.aborted_updates;
        }
      }
      result.trigger_log.push_back(rec);
      auto sr = step(spec, state, action);
      ret += sr.reward;
      state = std::move(sr.next_state);
      if (sr.done) break;
    }
    result.episode_returns.push_back(ret);
  }
  result.final_policy = learner.policy();
  result.final_discriminator = learner.discriminator();
  return result;
}

std::vector<std::size_t> gating_violations(std::span<const TriggerRecord> log, const ShiftDetectorConfig& config) {
  std::vector<std::size_t> bad;
  int run = 0;
  int episode = -1;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    if (r.episode != episode) {
      episode = r.episode;
      run = 0;
    }
    bool expected = false;
    if (r.kappa < config.kappa_threshold) {
      ++run;
      if (run >= config.consecutive_required) {
        expected = true;
        run = 0;
      }
    } else {
      run = 0;
    }
    if (expected != r.triggered) bad.push_back(i);
  }
  return bad;
}

void write_trigger_log(std::span<const TriggerRecord> log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  for (const auto& r : log) {
    os << "episode=" << r.episode << " step=" << r.step << " kappa=" << format_double(r.kappa)
       << " triggered=" << (r.triggered ? 1 : 0) << " aborted=" << (r.aborted ? 1 : 0) << "\n";
  }
}

std::vector<TriggerRecord> read_trigger_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open '" + path.string() + "'");
  std::vector<TriggerRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    TriggerRecord r;
    int trig = 0, abort = 0;
    if (std::sscanf(line.c_str(), "episode=%d step=%d kappa=%lf triggered=%d aborted=%d", &r.episode, &r.step, &r.kappa,
                    &trig, &abort) != 5) {
      throw LoadError(LoadError::Kind::kMalformedHeader, "malformed trigger record: '" + line + "'");
    }
    r.triggered = trig != 0;
    r.aborted = abort != 0;
    out.push_back(r);
  }
  return out;
}

void write_episode_returns(std::span<const double> returns, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < returns.size(); ++i) os << "episode=" << i + 1 << " return=" << format_double(returns[i]) << "\n";
}

}  // namespace rail
