#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace barcodelm {

// splitmix64 finalizer. All randomness in the library flows through this
// generator so that runs are reproducible bit-for-bit across platforms;
// the std distributions are implementation-defined and are not used.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Combine a seed with a substream tag. mix(seed, a) != mix(seed, b) for
// a != b with overwhelming probability; used to derive independent streams
// for rows, epochs, parameter init, dropout sites, ...
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL + (tag << 6) + (tag >> 2));
  return splitmix64(s);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Stage fan-out for the CLI: one global seed, one documented hash per stage
// name, so partial re-runs of a pipeline stay reproducible.
inline std::uint64_t derive_stage_seed(std::uint64_t global_seed, std::string_view stage) {
  return mix_seed(global_seed, fnv1a64(stage));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1). 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). n must be > 0.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (cached second variate).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k elements of a random permutation of [0, n).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(idx);
    if (k < n) idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace barcodelm
