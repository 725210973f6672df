#pragma once

// Seed splitting. One master seed feeds every random stream in a run:
//
//   stream_seed(master, id) = splitmix64_mix(master ^ (id * golden))
//
// where splitmix64_mix is the SplitMix64 output finalizer and golden is
// 0x9E3779B97F4A7C15. Each stream is an independent std::mt19937_64.

#include <cstdint>
#include <random>

namespace wncs::rng {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream identifiers. Per-node streams add the node index to a base id.
enum class Stream : std::uint64_t {
  topology = 1,
  shadowing = 2,
  exploration = 3,
  replay = 4,
  policy = 5,
  weights_base = 0x100,
  fading_base = 0x10000,
};

inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream_id) noexcept {
  return splitmix64_mix(master ^ (stream_id * 0x9E3779B97F4A7C15ULL));
}

inline Engine make_stream(std::uint64_t master, Stream s, std::uint64_t offset = 0) {
  return Engine(stream_seed(master, static_cast<std::uint64_t>(s) + offset));
}

inline double uniform01(Engine& eng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(eng);
}

}  // namespace wncs::rng
