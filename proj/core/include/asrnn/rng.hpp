#pragma once

#include <cstdint>
#include <random>

namespace asrnn {

/// Stateless 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a master seed and a component tag.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t tag) noexcept;

/// Fixed component tags for split_seed. Values are part of the reproducibility contract.
enum class SeedTag : std::uint64_t {
  kInit = 1,
  kData = 2,
  kPermutation = 3,
  kEval = 4,
};

inline std::uint64_t split_seed(std::uint64_t master, SeedTag tag) noexcept {
  return split_seed(master, static_cast<std::uint64_t>(tag));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace asrnn
