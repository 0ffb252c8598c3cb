#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace skyloop {

/// Seeded stream with portable uniform/normal draws. Each named sub-stream derives its
/// own seed, so adding draws to one stream never perturbs another.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name) : engine_(derive(seed, name)) {}
  explicit RandomStream(std::uint64_t seed) : engine_(derive(seed, "")) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; no cached second value, so draws stay aligned.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double sigma) { return sigma * normal(); }

  std::uint64_t next() { return engine_(); }

  static std::uint64_t derive(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over the name
    for (unsigned char c : name) h = (h ^ c) * 1099511628211ull;
    std::uint64_t z = seed ^ h;
    z += 0x9E3779B97F4A7C15ull;  // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace skyloop
