#pragma once

#include <cstdint>
#include <random>

namespace sae::numeric {

/// splitmix64 mix of (root, index); used to give each replicate its own stream.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept;

/// Seeded stream; one per thread or replicate, never shared.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  static RandomStream substream(std::uint64_t root, std::uint64_t index) {
    return RandomStream(derive_seed(root, index));
  }

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sae::numeric
