#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "fdrelay/types.hpp"

namespace fdrelay {

/// Independent random streams used by one realization. The numeric values are
/// part of the seed derivation and must not be renumbered.
enum class StreamRole : std::uint64_t {
  channels = 1,
  estimation = 2,
  source_bits = 3,
  relay_bits = 4,
  noise = 5,
  impairment = 6,
};

inline std::string_view to_string(StreamRole role) {
  switch (role) {
    case StreamRole::channels: return "channels";
    case StreamRole::estimation: return "estimation";
    case StreamRole::source_bits: return "source_bits";
    case StreamRole::relay_bits: return "relay_bits";
    case StreamRole::noise: return "noise";
    case StreamRole::impairment: return "impairment";
  }
  return "unknown";
}

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-style seed derivation: a pure function of (master, index, role), so
/// a realization's draws never depend on which worker ran it or in what order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, StreamRole role) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ mix64(index + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ mix64(static_cast<std::uint64_t>(role) * 0x8cb92ba72f3d8dd7ULL));
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }

  /// Circularly symmetric CN(0, variance): real and imaginary parts each
  /// carry variance/2.
  cplx complex_gaussian(double variance) {
    const double sd = std::sqrt(0.5 * variance);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {sd * re, sd * im};
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline RngStream seed_for(std::uint64_t master_seed, std::uint64_t realization_index,
                          StreamRole role) {
  return RngStream(derive_seed(master_seed, realization_index, role));
}

}  // namespace fdrelay
