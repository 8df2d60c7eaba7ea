#pragma once

#include <cstdint>
#include <random>

namespace cspcr {

// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named randomness sub-streams. Every consumer derives its own stream from
// (master seed, tag, indices), so no two pipeline stages share generator
// state and results never depend on evaluation order.
enum class Stream : std::uint64_t {
  row = 1,          // per-row counterfeit draws and tie breaking
  resample = 2,     // importance resampling (IS method)
  split = 3,        // dataset splitting
  cv_folds = 4,     // cross-validation fold shuffling
  source_pool = 5,  // simulation draws
  target_pool = 6,
  labeled = 7,
  ratio_fit = 8,
  trial = 9,        // per-trial seed in experiments
  test = 10,        // seed handed to the test engine inside a trial
  mc = 11,          // Monte Carlo quantile draws
};

inline std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(master ^ (static_cast<std::uint64_t>(tag) * 0xd1342543de82ef95ULL));
  s = splitmix64(s ^ a);
  return splitmix64(s ^ b);
}

inline std::mt19937_64 make_rng(std::uint64_t master, Stream tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  return std::mt19937_64(derive_seed(master, tag, a, b));
}

}  // namespace cspcr
