#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rail/errors.hpp"

namespace rail::io {

// Little-endian primitives. Every binary artifact in the project goes
// through these so files are portable across hosts.

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

inline void write_f64(std::ostream& os, double v) {
  const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
  os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
}

inline void write_i32(std::ostream& os, std::int32_t v) {
  const auto le = to_little_endian(v);
  os.write(reinterpret_cast<const char*>(&le), sizeof(le));
}

inline void write_f64s(std::ostream& os, std::span<const double> values) {
  for (double v : values) write_f64(os, v);
}

// Reads `count` doubles; throws LoadError(kTruncated) naming the shortfall.
inline void read_f64s(std::istream& is, std::span<double> out, const std::string& what) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(bits))) {
      const auto missing = (out.size() - i) * sizeof(bits) - static_cast<std::size_t>(is.gcount());
      throw LoadError(LoadError::Kind::kTruncated,
                      what + ": truncated, missing " + std::to_string(missing) + " bytes");
    }
    out[i] = std::bit_cast<double>(to_little_endian(bits));
  }
}

inline double read_f64(std::istream& is, const std::string& what) {
  double v = 0.0;
  read_f64s(is, std::span<double>(&v, 1), what);
  return v;
}

}  // namespace rail::io
