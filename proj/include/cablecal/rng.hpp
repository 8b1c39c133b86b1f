#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cablecal {

/// splitmix64 finalizer; used for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a component seed from the global seed and a stable tag
/// (FNV-1a of the tag, mixed with the parent seed).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(parent ^ mix64(h));
}

/// Deterministic generator. Distribution code is written out here rather than
/// using <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's rejection keeps the mapping unbiased.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Marsaglia polar method.
  double normal();

  /// Zero-mean uniform noise with standard deviation sigma.
  double uniform_noise(double sigma);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = uniform(-1.0, 1.0);
    v = uniform(-1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = __builtin_sqrt(-2.0 * __builtin_log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

inline double Rng::uniform_noise(double sigma) {
  // std of U(-a, a) is a / sqrt(3).
  return uniform(-1.0, 1.0) * 1.7320508075688772 * sigma;
}

}  // namespace cablecal
