#pragma once

#include <cstdint>
#include <random>

namespace rsum {

// Engine used for every stochastic ingredient. Streams are derived from a
// master seed and a stream index, so chunked parallel work is reproducible
// independently of the number of worker threads.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += UINT64_C(0x9E3779B97F4A7C15));
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

// Stream k of master seed `seed`.
inline Engine make_stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  std::uint64_t a = splitmix64(state);
  state ^= index * UINT64_C(0xD1B54A32D192ED03);
  std::uint64_t b = splitmix64(state);
  std::uint64_t c = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return Engine(seq);
}

// Uniform on the open interval (0,1).
inline double uniform_open(Engine& rng) {
  for (;;) {
    double u = std::generate_canonical<double, 53>(rng);
    if (u > 0.0) return u;
  }
}

}  // namespace rsum
