#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace fapi {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Purpose tags so the same (seed, round, client) triple yields unrelated
/// streams for different uses.
enum class Stream : std::uint64_t {
  kEvaluate = 1,
  kCandidates = 2,
  kSelect = 3,
  kRollout = 4,
  kWarmup = 5,
  kReturn = 6,
  kGenerate = 7,
};

inline std::uint64_t stream_seed(std::uint64_t global, std::uint64_t round,
                                 std::uint64_t client, Stream stream,
                                 std::uint64_t extra = 0) {
  return derive_seed({global, round, client, static_cast<std::uint64_t>(stream), extra});
}

/// Random source with platform-independent derived draws. The standard
/// distributions are implementation-defined, so every draw is built here
/// directly from mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Draws an index from an unnormalized-safe probability vector.
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last_positive = i;
      if (u < probs[i]) return i;
      u -= probs[i];
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fapi
