#pragma once

#include <cmath>
#include <cstdint>

namespace dcd {

/// Self-contained deterministic random stream (splitmix64 core, Box-Muller
/// normals). Output is identical across platforms for a given seed, which is
/// what makes experiment generation bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Derives an independent sub-stream from (seed, stream tag). Experiment
  /// generators split one user seed into topology / data / constraint
  /// streams with fixed tags so that each part is reproducible in isolation.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    Rng mix(seed ^ (0xa0761d6478bd642fULL * (stream + 1)));
    mix.next_u64();
    return mix.next_u64();
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

namespace stream {
inline constexpr std::uint64_t kTopology = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kConstraints = 3;
inline constexpr std::uint64_t kRetry = 4;
}  // namespace stream

}  // namespace dcd
