#include "rail/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rail/errors.hpp"

namespace rail {
namespace {

DemoSet rollouts(const EnvSpec& spec, Tier tier, int episodes, std::uint64_t seed, const ActionFn& act) {
  DemoSet set;
  set.header = DemoHeader{spec.name, spec.state_dim, spec.action_dim, {TierCount{tier, episodes}}, seed};
  const NoiseWrapper clean(0.0);
  RngStream reset_root(seed, "tier-reset");
  RngStream unused(seed, "tier-noise");
  for (int e = 0; e < episodes; ++e) {
    auto reset_rng = reset_root.fork(static_cast<std::uint64_t>(e));
    const auto rec = run_episode(spec, act, reset_rng, clean, unused);
    for (std::size_t t = 0; t < rec.transitions.size(); ++t) {
      const auto& tr = rec.transitions[t];
      set.samples.push_back(DemoSample{tr.true_state, tr.action, e, static_cast<std::int32_t>(t), tier});
    }
  }
  return set;
}

}  // namespace

DemoSet generate_tier(const EnvSpec& spec, Tier tier, int episodes, std::uint64_t seed, const TierOptions& options) {
  if (episodes < 1) throw ConfigError("generate_tier: episodes must be at least 1");
  RngStream action_rng(seed, "tier-actions");
  switch (tier) {
    case Tier::kExpert:
      return rollouts(spec, tier, episodes, seed, [&](std::span<const double> s) { return scripted_expert(spec, s); });
    case Tier::kMedium:
      return rollouts(spec, tier, episodes, seed, [&](std::span<const double> s) {
        auto a = scripted_expert(spec, s);
        for (double& v : a) v += action_rng.normal(0.0, options.medium_action_noise);
        return a;
      });
    case Tier::kRandom:
      return rollouts(spec, tier, episodes, seed, [&](std::span<const double> s) {
        (void)s;
        std::vector<double> a(spec.action_dim);
        for (int i = 0; i < spec.action_dim; ++i) a[i] = action_rng.uniform(spec.bounds.lo[i], spec.bounds.hi[i]);
        return a;
      });
    case Tier::kMediumReplayLike: {
      // Under-trained BC checkpoint rolled out stochastically.
      const auto expert = generate_tier(spec, Tier::kExpert, options.replay_expert_episodes,
                                        RngStream(seed, "replay-expert").engine()(), options);
      PolicyTrainConfig cfg;
      cfg.hidden = options.policy_hidden;
      cfg.steps = std::max(1, options.reference_policy_steps / 5);
      const auto policy = train_reference_policy(expert, cfg, RngStream(seed, "replay-policy").engine()());
      return rollouts(spec, tier, episodes, seed,
                      [&](std::span<const double> s) { return policy.sample_action(s, action_rng); });
    }
  }
  throw ConfigError("unhandled tier");
}

DemoSet mix_supplementary(std::span<const DemoSet> tiers, std::span<const double> proportions) {
  if (tiers.empty()) throw DataError("mix_supplementary: no tiers");
  if (proportions.size() != tiers.size()) throw DataError("mix_supplementary: one proportion per tier required");
  DemoSet out;
  out.header.env_id = tiers.front().header.env_id;
  out.header.state_dim = tiers.front().header.state_dim;
  out.header.action_dim = tiers.front().header.action_dim;
  std::uint64_t seed_mix = 0;
  int episode_base = 0;
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    const auto& t = tiers[i];
    if (t.header.env_id != out.header.env_id || t.header.state_dim != out.header.state_dim ||
        t.header.action_dim != out.header.action_dim) {
      throw DataError("mix_supplementary: tier " + std::to_string(i) + " has env '" + t.header.env_id +
                      "', expected '" + out.header.env_id + "'");
    }
    if (!(proportions[i] >= 0.0 && proportions[i] <= 1.0)) throw DataError("mix_supplementary: proportions lie in [0,1]");
    seed_mix = seed_mix * 0x100000001b3ULL ^ t.header.seed;
    // Renumber each input episode id into the output range.
    std::map<int, int> remap;
    int kept_total = 0;
    int input_base = 0;
    for (const auto& tc : t.header.tiers) {
      const int keep = static_cast<int>(std::lround(proportions[i] * tc.episodes));
      for (int e = 0; e < keep; ++e) remap[input_base + e] = episode_base + kept_total + e;
      if (keep > 0) out.header.tiers.push_back(TierCount{tc.tier, keep});
      kept_total += keep;
      input_base += tc.episodes;
    }
    for (const auto& s : t.samples) {
      const auto it = remap.find(s.episode_id);
      if (it == remap.end()) continue;
      auto copy = s;
      copy.episode_id = it->second;
      out.samples.push_back(std::move(copy));
    }
    episode_base += kept_total;
  }
  out.header.seed = seed_mix;
  return out;
}

std::vector<double> episode_returns(const DemoSet& set, const EnvSpec& spec) {
  std::vector<double> returns(set.header.episodes(), 0.0);
  for (const auto& s : set.samples) returns[s.episode_id] += step(spec, s.state, s.action).reward;
  return returns;
}

ReferenceReturns compute_reference_returns(const EnvSpec& spec, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("reference returns need at least one episode");
  ReferenceReturns ref{spec.name, 0.0, 0.0, episodes, seed};
  const NoiseWrapper clean(0.0);
  RngStream root(seed, "reference-returns");
  RngStream action_rng(seed, "reference-random-actions");
  RngStream unused(seed, "reference-noise");
  for (int e = 0; e < episodes; ++e) {
    auto r1 = root.fork(static_cast<std::uint64_t>(e));
    auto r2 = r1;
    ref.expert_return +=
        run_episode(spec, [&](std::span<const double> s) { return scripted_expert(spec, s); }, r1, clean, unused)
            .total_return;
    ref.random_return += run_episode(
                             spec,
                             [&](std::span<const double>) {
                               std::vector<double> a(spec.action_dim);
                               for (int i = 0; i < spec.action_dim; ++i) {
                                 a[i] = action_rng.uniform(spec.bounds.lo[i], spec.bounds.hi[i]);
                               }
                               return a;
                             },
                             r2, clean, unused)
                             .total_return;
  }
  ref.expert_return /= episodes;
  ref.random_return /= episodes;
  return ref;
}

void save_reference_returns(const ReferenceReturns& ref, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  char buf[512];
  std::snprintf(buf, sizeof(buf), "env_id=%s expert_return=%.17g random_return=%.17g episodes=%d seed=%llu\n",
                ref.env_id.c_str(), ref.expert_return, ref.random_return, ref.episodes,
                static_cast<unsigned long long>(ref.seed));
  os << buf;
}

ReferenceReturns load_reference_returns(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  for (std::string tok; is >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw LoadError(LoadError::Kind::kMalformedHeader, "bad token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  try {
    return ReferenceReturns{kv.at("env_id"), std::stod(kv.at("expert_return")), std::stod(kv.at("random_return")),
                            std::stoi(kv.at("episodes")), std::stoull(kv.at("seed"))};
  } catch (const std::exception& e) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed reference-returns file: " + std::string(e.what()));
  }
}

}  // namespace rail
