#include "rail/offline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rail/envs.hpp"
#include "rail/errors.hpp"

namespace rail {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<DiscSample> to_disc_samples(const DemoSet& set, const std::vector<double>& values) {
  std::vector<DiscSample> out;
  out.reserve(set.samples.size());
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    out.push_back(DiscSample{set.samples[i].state, set.samples[i].action, values.empty() ? 1.0 : values[i]});
  }
  return out;
}

void write_header(std::ostream& os, const std::string& kind, const std::string& hash, std::uint64_t seed) {
  os << "rail-artifact kind=" << kind << " config_hash=" << hash << " seed=" << seed << "\n";
}

struct ArtifactHeader {
  std::string kind;
  std::string hash;
  std::uint64_t seed = 0;
};

ArtifactHeader read_header(std::istream& is, const std::string& expected_kind) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "empty artifact file");
  std::istringstream hs(line);
  std::string tag, kind, hash, seed;
  hs >> tag >> kind >> hash >> seed;
  if (tag != "rail-artifact" || kind != "kind=" + expected_kind || hash.rfind("config_hash=", 0) != 0 ||
      seed.rfind("seed=", 0) != 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "bad artifact header (expected " + expected_kind + "): '" + line + "'");
  }
  return ArtifactHeader{expected_kind, hash.substr(12), std::stoull(seed.substr(5))};
}

template <typename WriteFn>
std::filesystem::path write_artifact_file(const std::filesystem::path& dir, const char* name, const std::string& kind,
                                          const OfflineArtifacts& a, WriteFn&& write) {
  const auto path = dir / name;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  write_header(os, kind, a.config_hash, a.seed);
  write(os);
  if (!os) throw LoadError(LoadError::Kind::kIo, "write failed for '" + path.string() + "'");
  return path;
}

std::ifstream open_artifact(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open '" + path.string() + "'");
  return is;
}

}  // namespace

OfflineConfig OfflineConfig::from(const KeyValueConfig& kv) {
  OfflineConfig c;
  c.env_id = kv.get_string("env_id", c.env_id);
  c.expert_path = kv.get_string("expert_path", c.expert_path);
  c.supp_path = kv.get_string("supp_path", c.supp_path);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.ref_steps = static_cast<int>(kv.get_int("ref_steps", c.ref_steps));
  c.disc_steps = static_cast<int>(kv.get_int("disc_steps", c.disc_steps));
  c.bc_steps = static_cast<int>(kv.get_int("bc_steps", c.bc_steps));
  c.lambda_cutoff = kv.get_int("lambda_cutoff", c.lambda_cutoff);
  c.gmm_components = static_cast<int>(kv.get_int("gmm_components", c.gmm_components));
  c.gmm_alpha = kv.get_double("gmm_alpha", c.gmm_alpha);
  c.ratio_min = kv.get_double("ratio_min", c.ratio_min);
  c.ratio_max = kv.get_double("ratio_max", c.ratio_max);
  c.policy_lr = kv.get_double("policy_lr", c.policy_lr);
  c.disc_lr = kv.get_double("disc_lr", c.disc_lr);
  c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
  c.policy_hidden = kv.get_int_list("policy_hidden", c.policy_hidden);
  c.disc_hidden = kv.get_int_list("disc_hidden", c.disc_hidden);
  c.held_out_fraction = kv.get_double("held_out_fraction", c.held_out_fraction);
  c.log_every = static_cast<int>(kv.get_int("log_every", c.log_every));
  c.disc_eval_every = static_cast<int>(kv.get_int("disc_eval_every", c.disc_eval_every));
  c.disable_reg = kv.get_bool("disable_reg", c.disable_reg);
  c.plain_bc = kv.get_bool("plain_bc", c.plain_bc);
  static const std::vector<std::string> known{
      "env_id",       "expert_path", "supp_path",     "seed",          "ref_steps",  "disc_steps",
      "bc_steps",     "lambda_cutoff", "gmm_components", "gmm_alpha",  "ratio_min",  "ratio_max",
      "policy_lr",    "disc_lr",     "batch_size",    "policy_hidden", "disc_hidden", "held_out_fraction",
      "log_every",    "disc_eval_every", "disable_reg", "plain_bc"};
  for (const auto& [k, v] : kv.values()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
  }
  c.validate();
  return c;
}

KeyValueConfig OfflineConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("env_id", env_id);
  kv.set("expert_path", expert_path);
  kv.set("supp_path", supp_path);
  kv.set("seed", std::to_string(seed));
  kv.set("ref_steps", std::to_string(ref_steps));
  kv.set("disc_steps", std::to_string(disc_steps));
  kv.set("bc_steps", std::to_string(bc_steps));
  kv.set("lambda_cutoff", std::to_string(lambda_cutoff));
  kv.set("gmm_components", std::to_string(gmm_components));
  kv.set("gmm_alpha", format_double(gmm_alpha));
  kv.set("ratio_min", format_double(ratio_min));
  kv.set("ratio_max", format_double(ratio_max));
  kv.set("policy_lr", format_double(policy_lr));
  kv.set("disc_lr", format_double(disc_lr));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("policy_hidden", join(policy_hidden));
  kv.set("disc_hidden", join(disc_hidden));
  kv.set("held_out_fraction", format_double(held_out_fraction));
  kv.set("log_every", std::to_string(log_every));
  kv.set("disc_eval_every", std::to_string(disc_eval_every));
  kv.set("disable_reg", disable_reg ? "true" : "false");
  kv.set("plain_bc", plain_bc ? "true" : "false");
  return kv;
}

std::string OfflineConfig::hash() const { return hash_hex(to_kv().canonical()); }

void OfflineConfig::validate() const {
  make_env_spec(env_id);
  if (ref_steps <= 0 || disc_steps <= 0 || bc_steps <= 0) throw ConfigError("step budgets must be positive");
  if (batch_size <= 1) throw ConfigError("batch_size must be at least 2");
  if (gmm_components < 1) throw ConfigError("gmm_components must be positive");
  if (!(gmm_alpha > 0.0 && gmm_alpha < 1.0)) throw ConfigError("gmm_alpha must lie in (0,1)");
  if (!(ratio_min > 0.0 && ratio_min <= ratio_max)) throw ConfigError("ratio clamps must satisfy 0 < min <= max");
  if (!(policy_lr > 0.0 && disc_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) throw ConfigError("held_out_fraction must lie in [0,1)");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
}

std::optional<double> OfflineArtifacts::disc_eval_at(long long step) const {
  for (const auto& m : metrics) {
    if (m.stage == "disc_eval" && m.step == step) return m.loss;
  }
  return std::nullopt;
}

std::optional<double> OfflineArtifacts::metric(const std::string& stage) const {
  for (const auto& m : metrics) {
    if (m.stage == stage) return m.loss;
  }
  return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& stage) { return RngStream(seed, stage).engine()(); }

void train_weighted_bc(GaussianPolicy& policy, std::span<const WeightedSample> samples, int steps, int batch_size,
                       double learning_rate, std::uint64_t seed, const std::string& stage,
                       std::vector<MetricRecord>* metrics, int log_every) {
  if (samples.empty()) throw ConfigError(stage + ": no training samples");
  PolicyOptimizer opt(policy, AdamConfig{.learning_rate = learning_rate});
  RngStream batch_rng(seed, "policy-batches");
  std::vector<WeightedSample> batch(batch_size);
  for (int step = 0; step < steps; ++step) {
    for (auto& ws : batch) ws = samples[batch_rng.index(samples.size())];
    auto result = weighted_bc_loss(policy, batch);
    if (!std::isfinite(result.loss)) {
      throw NumericError(stage + ": non-finite loss at step " + std::to_string(step + 1));
    }
    if (metrics != nullptr && ((step + 1) % log_every == 0 || step == 0)) {
      metrics->push_back(MetricRecord{stage, step + 1, result.loss, 0.0});
    }
    opt.step(policy, result.grad);
  }
}

OfflineArtifacts run_offline(const OfflineConfig& config, const DemoSet& expert, const DemoSet& supp) {
  config.validate();
  const auto spec = make_env_spec(config.env_id);
  for (const auto* set : {&expert, &supp}) {
    if (set->header.env_id != spec.name || set->header.state_dim != spec.state_dim ||
        set->header.action_dim != spec.action_dim) {
      throw DataError("demonstrations for '" + set->header.env_id + "' do not match env '" + spec.name + "'");
    }
  }
  if (expert.samples.empty()) throw ConfigError("expert demonstration set is empty");

  OfflineArtifacts out;
  out.config_hash = config.hash();
  out.seed = config.seed;
  const auto run_start = Clock::now();

  PolicyTrainConfig ref_cfg{config.policy_hidden, config.ref_steps, config.batch_size, config.policy_lr};

  if (config.plain_bc) {
    std::vector<WeightedSample> samples;
    for (const auto& s : expert.samples) samples.push_back(WeightedSample{s.state, s.action, 1.0});
    const auto seed = derive_seed(config.seed, "main-policy");
    RngStream init_rng(seed, "policy-init");
    out.policy = GaussianPolicy(spec.state_dim, spec.action_dim, config.policy_hidden, spec.bounds, init_rng);
    const auto t0 = Clock::now();
    train_weighted_bc(out.policy, samples, config.bc_steps, config.batch_size, config.policy_lr, seed, "bc",
                      &out.metrics, config.log_every);
    out.policy.set_label("main");
    out.timing.push_back(TimingRecord{"bc", config.bc_steps, ms_since(t0)});
    out.timing.push_back(TimingRecord{"total", 0, ms_since(run_start)});
    return out;
  }
  if (supp.samples.empty()) throw ConfigError("supplementary demonstration set is empty");

  const auto [expert_train, expert_held] = expert.split_held_out(config.held_out_fraction);
  const auto [supp_train, supp_held] = supp.split_held_out(config.held_out_fraction);

  // Reference policies.
  auto t0 = Clock::now();
  std::vector<double> trace;
  auto ref_e = train_reference_policy(expert_train, ref_cfg, derive_seed(config.seed, "ref-expert"), &trace);
  ref_e.set_label("expert");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if ((i + 1) % config.log_every == 0 || i == 0) out.metrics.push_back(MetricRecord{"ref_expert", static_cast<long long>(i + 1), trace[i], 0.0});
  }
  trace.clear();
  auto ref_s = train_reference_policy(supp_train, ref_cfg, derive_seed(config.seed, "ref-supp"), &trace);
  ref_s.set_label("supplementary");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if ((i + 1) % config.log_every == 0 || i == 0) out.metrics.push_back(MetricRecord{"ref_supp", static_cast<long long>(i + 1), trace[i], 0.0});
  }
  out.ref_expert = std::make_shared<const GaussianPolicy>(std::move(ref_e));
  out.ref_supp = std::make_shared<const GaussianPolicy>(std::move(ref_s));
  out.timing.push_back(TimingRecord{"reference_policies", config.ref_steps, ms_since(t0)});

  // State densities.
  t0 = Clock::now();
  GmmFitOptions gopt;
  gopt.components = config.gmm_components;
  gopt.alpha = config.gmm_alpha;
  GmmFitReport rep;
  auto gmm_e = fit_gmm(expert_train.states(), gopt, derive_seed(config.seed, "gmm-expert"), &rep);
  gmm_e.label = "expert";
  if (rep.covariance_floored) std::cerr << "warning: expert state model hit the covariance floor\n";
  out.metrics.push_back(MetricRecord{"gmm_expert", rep.iterations, -rep.log_likelihood_trace.back(), 0.0});
  auto gmm_s = fit_gmm(supp_train.states(), gopt, derive_seed(config.seed, "gmm-supp"), &rep);
  gmm_s.label = "supplementary";
  if (rep.covariance_floored) std::cerr << "warning: supplementary state model hit the covariance floor\n";
  out.metrics.push_back(MetricRecord{"gmm_supp", rep.iterations, -rep.log_likelihood_trace.back(), 0.0});
  out.gmm_expert = std::make_shared<const GmmModel>(std::move(gmm_e));
  out.gmm_supp = std::make_shared<const GmmModel>(std::move(gmm_s));
  out.timing.push_back(TimingRecord{"gmm", 0, ms_since(t0)});

  const JointDensityModel joint_e(out.ref_expert, out.gmm_expert);
  const JointDensityModel joint_s(out.ref_supp, out.gmm_supp);

  // Frozen per-sample ratios and posterior targets.
  auto ratios_and_targets = [&](const DemoSet& set, std::vector<double>& ratios, std::vector<double>& targets) {
    ratios.resize(set.samples.size());
    targets.resize(set.samples.size());
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
      const auto& s = set.samples[i];
      const double le = joint_e.log_density(s.state, s.action);
      const double ls = joint_s.log_density(s.state, s.action);
      ratios[i] = density_ratio_from_logs(le, ls, config.ratio_min, config.ratio_max);
      targets[i] = reg_target(le, ls);
    }
  };
  std::vector<double> e_ratio, e_target, s_ratio, s_target;
  ratios_and_targets(expert_train, e_ratio, e_target);
  ratios_and_targets(supp_train, s_ratio, s_target);
  const auto expert_pool = to_disc_samples(expert_train, {});
  const auto supp_pool = to_disc_samples(supp_train, s_ratio);
  const auto expert_target_pool = to_disc_samples(expert_train, e_target);
  const auto supp_target_pool = to_disc_samples(supp_train, s_target);
  const auto held_e = to_disc_samples(expert_held, {});
  const auto held_s = to_disc_samples(supp_held, {});
  const bool can_eval = !held_e.empty() && !held_s.empty();

  // Discriminator.
  t0 = Clock::now();
  RngStream disc_init(derive_seed(config.seed, "disc-init"), "init");
  DiscriminatorModel disc(spec.state_dim, spec.action_dim, config.disc_hidden, disc_init);
  AdamState disc_opt(disc.net().num_params(), AdamConfig{.learning_rate = config.disc_lr});
  RngStream disc_rng(derive_seed(config.seed, "disc-batches"), "batches");
  const int B = config.batch_size;
  const int half = B / 2;
  std::vector<DiscSample> eb(B), sb(B), mb(2 * half);
  const long long quarter = std::max(1, config.disc_steps / 4);
  const int eval_every = config.disc_eval_every > 0 ? config.disc_eval_every : std::max(1, config.disc_steps / 20);
  if (can_eval) out.metrics.push_back(MetricRecord{"disc_eval", 0, eval_discriminator(disc, held_e, held_s), 0.0});
  for (long long t = 1; t <= config.disc_steps; ++t) {
    for (int i = 0; i < B; ++i) {
      const auto ei = disc_rng.index(expert_pool.size());
      const auto si = disc_rng.index(supp_pool.size());
      eb[i] = expert_pool[ei];
      sb[i] = supp_pool[si];
      // 50/50 mixing batch for the posterior regularizer.
      if (i < half) {
        mb[i] = expert_target_pool[ei];
        mb[half + i] = supp_target_pool[si];
      }
    }
    const double lambda = config.disable_reg ? 0.0 : lambda_schedule(t, config.lambda_cutoff);
    auto result = combined_offline_loss(disc, eb, sb, mb, lambda);
    if (!std::isfinite(result.loss)) {
      throw NumericError("discriminator: non-finite loss at step " + std::to_string(t));
    }
    adam_step(disc.net().params(), result.grad, disc_opt);
    if (t % config.log_every == 0 || t == 1) out.metrics.push_back(MetricRecord{"disc", t, result.loss, lambda});
    if (can_eval && (t % eval_every == 0 || t == quarter)) {
      out.metrics.push_back(MetricRecord{"disc_eval", t, eval_discriminator(disc, held_e, held_s), lambda});
    }
  }
  out.timing.push_back(TimingRecord{"discriminator", config.disc_steps, ms_since(t0)});

  // Weighted BC over D_E u D_S with frozen discriminator weights.
  t0 = Clock::now();
  std::vector<WeightedSample> samples;
  samples.reserve(expert.samples.size() + supp.samples.size());
  double omega_expert = 0.0;
  std::vector<double> omega_tier(4, 0.0), count_tier(4, 0.0);
  for (const auto& s : expert.samples) {
    const double w = bc_weight(disc, s.state, s.action);
    omega_expert += w;
    samples.push_back(WeightedSample{s.state, s.action, w});
  }
  for (const auto& s : supp.samples) {
    const double w = bc_weight(disc, s.state, s.action);
    omega_tier[static_cast<int>(s.tier)] += w;
    count_tier[static_cast<int>(s.tier)] += 1.0;
    samples.push_back(WeightedSample{s.state, s.action, w});
  }
  out.metrics.push_back(MetricRecord{"omega_expert_set", 0, omega_expert / static_cast<double>(expert.samples.size()), 0.0});
  for (int k = 0; k < 4; ++k) {
    if (count_tier[k] > 0.0) {
      out.metrics.push_back(MetricRecord{"omega_supp_" + to_string(static_cast<Tier>(k)), 0, omega_tier[k] / count_tier[k], 0.0});
    }
  }

  const auto seed = derive_seed(config.seed, "main-policy");
  RngStream init_rng(seed, "policy-init");
  out.policy = GaussianPolicy(spec.state_dim, spec.action_dim, config.policy_hidden, spec.bounds, init_rng);
  train_weighted_bc(out.policy, samples, config.bc_steps, config.batch_size, config.policy_lr, seed, "bc",
                    &out.metrics, config.log_every);
  out.policy.set_label("main");
  out.discriminator = std::move(disc);
  out.timing.push_back(TimingRecord{"bc", config.bc_steps, ms_since(t0)});
  out.timing.push_back(TimingRecord{"total", 0, ms_since(run_start)});
  return out;
}

std::vector<std::filesystem::path> write_artifacts(const OfflineArtifacts& a, const std::filesystem::path& dir) {
  namespace af = artifact_files;
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  written.push_back(write_artifact_file(dir, af::kPolicy, "policy", a, [&](std::ostream& os) { a.policy.save(os); }));
  if (a.discriminator) {
    written.push_back(write_artifact_file(dir, af::kDiscriminator, "discriminator", a,
                                          [&](std::ostream& os) { a.discriminator->save(os); }));
  }
  if (a.ref_expert) {
    written.push_back(write_artifact_file(dir, af::kRefExpert, "policy", a, [&](std::ostream& os) { a.ref_expert->save(os); }));
  }
  if (a.ref_supp) {
    written.push_back(write_artifact_file(dir, af::kRefSupp, "policy", a, [&](std::ostream& os) { a.ref_supp->save(os); }));
  }
  if (a.gmm_expert) {
    written.push_back(write_artifact_file(dir, af::kGmmExpert, "gmm", a, [&](std::ostream& os) { a.gmm_expert->save(os); }));
  }
  if (a.gmm_supp) {
    written.push_back(write_artifact_file(dir, af::kGmmSupp, "gmm", a, [&](std::ostream& os) { a.gmm_supp->save(os); }));
  }
  {
    const auto path = dir / af::kMetrics;
    std::ofstream os(path, std::ios::trunc);
    for (const auto& m : a.metrics) {
      os << "step=" << m.step << " stage=" << m.stage << " loss=" << format_double(m.loss)
         << " lambda=" << format_double(m.lambda) << "\n";
    }
    written.push_back(path);
  }
  {
    const auto path = dir / af::kTiming;
    std::ofstream os(path, std::ios::trunc);
    for (const auto& t : a.timing) os << "step=" << t.step << " stage=" << t.stage << " wall_ms=" << t.wall_ms << "\n";
    written.push_back(path);
  }
  return written;
}

std::vector<std::string> missing_online_artifacts(const std::filesystem::path& dir) {
  namespace af = artifact_files;
  std::vector<std::string> missing;
  for (const char* f : {af::kPolicy, af::kDiscriminator, af::kRefExpert, af::kRefSupp, af::kGmmExpert, af::kGmmSupp,
                        af::kExpertDemos, af::kRefReturns}) {
    if (!std::filesystem::exists(dir / f)) missing.emplace_back(f);
  }
  return missing;
}

OfflineArtifacts load_artifacts(const std::filesystem::path& dir) {
  namespace af = artifact_files;
  OfflineArtifacts a;
  {
    auto is = open_artifact(dir / af::kPolicy);
    const auto h = read_header(is, "policy");
    a.config_hash = h.hash;
    a.seed = h.seed;
    a.policy = GaussianPolicy::load(is);
  }
  if (std::filesystem::exists(dir / af::kDiscriminator)) {
    auto is = open_artifact(dir / af::kDiscriminator);
    read_header(is, "discriminator");
    a.discriminator = DiscriminatorModel::load(is);
  }
  auto load_policy = [&](const char* name) -> std::shared_ptr<const GaussianPolicy> {
    if (!std::filesystem::exists(dir / name)) return nullptr;
    auto is = open_artifact(dir / name);
    read_header(is, "policy");
    return std::make_shared<const GaussianPolicy>(GaussianPolicy::load(is));
  };
  auto load_gmm = [&](const char* name) -> std::shared_ptr<const GmmModel> {
    if (!std::filesystem::exists(dir / name)) return nullptr;
    auto is = open_artifact(dir / name);
    read_header(is, "gmm");
    return std::make_shared<const GmmModel>(GmmModel::load(is));
  };
  a.ref_expert = load_policy(af::kRefExpert);
  a.ref_supp = load_policy(af::kRefSupp);
  a.gmm_expert = load_gmm(af::kGmmExpert);
  a.gmm_supp = load_gmm(af::kGmmSupp);
  return a;
}

}  // namespace rail
