#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace rail {

enum class Tier { kExpert, kMedium, kMediumReplayLike, kRandom };

std::string to_string(Tier tier);
// Throws ConfigError naming the valid tiers.
Tier tier_from_string(const std::string& name);

struct DemoSample {
  std::vector<double> state;
  std::vector<double> action;
  std::int32_t episode_id = 0;
  std::int32_t step_index = 0;
  Tier tier = Tier::kExpert;

  bool operator==(const DemoSample&) const = default;
};

// Contiguous episode ranges per tier: episodes [0, n0) belong to tiers[0],
// [n0, n0+n1) to tiers[1], and so on.
struct TierCount {
  Tier tier;
  int episodes;

  bool operator==(const TierCount&) const = default;
};

struct DemoHeader {
  std::string env_id;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<TierCount> tiers;
  std::uint64_t seed = 0;

  int episodes() const;
  Tier tier_of_episode(int episode_id) const;
  bool operator==(const DemoHeader&) const = default;
};

class DemoSet {
 public:
  DemoHeader header;
  std::vector<DemoSample> samples;

  std::vector<std::vector<double>> states() const;
  // Splits by episode: the last `fraction` of each tier's episodes (at least
  // one when the tier has two or more) go to the held-out part.
  std::pair<DemoSet, DemoSet> split_held_out(double fraction) const;

  bool operator==(const DemoSet&) const = default;
};

// One text header line of key=value pairs, then fixed-width little-endian
// rows: i32 episode, i32 step, i32 state_dim, i32 action_dim, f64 state,
// f64 action.
void save_demoset(const DemoSet& set, std::ostream& os);
void save_demoset(const DemoSet& set, const std::filesystem::path& path);
DemoSet load_demoset(std::istream& is);
DemoSet load_demoset(const std::filesystem::path& path);

}  // namespace rail
