#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rail {

// Seeded random stream. A (seed, stream_id) pair always yields the same
// sequence; distinct stream ids give decorrelated sequences.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);
  RngStream(std::uint64_t seed, std::string_view stream_name);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform index in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

  // Derives a child stream; used to give each episode / component its own
  // reproducible sequence.
  RngStream fork(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

std::uint64_t hash_name(std::string_view name);

}  // namespace rail
