#pragma once

#include <cstdint>
#include <random>

namespace vrs {

using Rng = std::mt19937_64;

// splitmix64 step, used for seed derivation and stateless hashing.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a stream tag.
// Distinct tags give statistically unrelated streams for the same base.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream * 0xD6E8FEB86659FD93ULL + 1));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

// Well-known stream tags so independent subsystems never share a stream.
namespace seed_stream {
constexpr std::uint64_t kWorld = 1;
constexpr std::uint64_t kRequests = 2;
constexpr std::uint64_t kClicks = 3;
constexpr std::uint64_t kTwoTower = 4;
constexpr std::uint64_t kPolicy = 5;
constexpr std::uint64_t kCalibration = 6;
constexpr std::uint64_t kCounter = 7;
constexpr std::uint64_t kRewardTrain = 8;
constexpr std::uint64_t kArm = 9;
}  // namespace seed_stream

// Deterministic per-key uniform in [0,1); independent of any engine state.
inline double hash_uniform(std::uint64_t key, std::uint64_t salt) {
  const std::uint64_t h = splitmix64(splitmix64(key) ^ splitmix64(salt ^ 0xA24BAED4963EE407ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Deterministic per-key standard normal via Box-Muller on two hash uniforms.
double hash_normal(std::uint64_t key, std::uint64_t salt);

}  // namespace vrs
