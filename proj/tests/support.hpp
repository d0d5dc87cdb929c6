#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rail/demo_set.hpp"
#include "rail/rng.hpp"

namespace test_support {

// Runs `prop(rng, case_index)` on `cases` independently seeded generators.
template <typename Prop>
void for_all(std::uint64_t seed, int cases, const char* name, Prop&& prop) {
  for (int i = 0; i < cases; ++i) {
    rail::RngStream rng(seed, std::string(name) + "#" + std::to_string(i));
    prop(rng, i);
  }
}

inline std::vector<double> random_vector(rail::RngStream& rng, int n, double sd = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.normal(0.0, sd);
  return v;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rail_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Synthetic set on a made-up env id (unbounded actions): states drawn from
// N(0, state_sd^2 I), actions from `act` plus optional Gaussian noise.
template <typename Act>
rail::DemoSet synthetic_demos(rail::RngStream& rng, int n, int state_dim, int action_dim, Act&& act,
                              double state_sd = 1.0, double action_noise = 0.0) {
  rail::DemoSet set;
  set.header.env_id = "synthetic";
  set.header.state_dim = state_dim;
  set.header.action_dim = action_dim;
  set.header.tiers = {{rail::Tier::kExpert, n}};
  for (int i = 0; i < n; ++i) {
    rail::DemoSample s;
    s.state = random_vector(rng, state_dim, state_sd);
    s.action = act(s.state);
    for (auto& a : s.action) a += rng.normal(0.0, action_noise);
    s.episode_id = i;
    set.samples.push_back(std::move(s));
  }
  return set;
}

}  // namespace test_support
