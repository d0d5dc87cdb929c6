#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rail/demo_set.hpp"
#include "rail/envs.hpp"
#include "rail/policy.hpp"

namespace rail {

struct TierOptions {
  double medium_action_noise = 0.3;
  // Budget of the fully trained reference policy; the medium_replay_like
  // checkpoint is taken at 20% of it.
  int reference_policy_steps = 5000;
  int replay_expert_episodes = 10;
  std::vector<int> policy_hidden{64, 64};
};

// Rolls `episodes` noise-free episodes of the given tier.
DemoSet generate_tier(const EnvSpec& spec, Tier tier, int episodes, std::uint64_t seed,
                      const TierOptions& options = {});

// Concatenates tiers, keeping the first round(p * episodes) episodes of each
// input; episode ids are renumbered in order. Throws DataError on env or
// dimension mismatch.
DemoSet mix_supplementary(std::span<const DemoSet> tiers, std::span<const double> proportions);

// Per-episode returns of the demonstrations, in episode order.
std::vector<double> episode_returns(const DemoSet& set, const EnvSpec& spec);

struct ReferenceReturns {
  std::string env_id;
  double expert_return = 0.0;
  double random_return = 0.0;
  int episodes = 0;
  std::uint64_t seed = 0;

  bool operator==(const ReferenceReturns&) const = default;
};

ReferenceReturns compute_reference_returns(const EnvSpec& spec, int episodes, std::uint64_t seed);
void save_reference_returns(const ReferenceReturns& ref, const std::filesystem::path& path);
ReferenceReturns load_reference_returns(const std::filesystem::path& path);

}  // namespace rail
