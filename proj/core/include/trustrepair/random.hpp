#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace trustrepair {

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Child seed for stream `stream` of task `task` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t task,
                          std::uint64_t stream = 0) noexcept;

/// Seeded engine with portable draws. The standard distributions are
/// implementation-defined, so uniform variates are built directly from the
/// engine bits to keep simulated data identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Index drawn from an (already normalized) probability vector.
  std::size_t categorical(std::span<const double> probs) noexcept;
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) noexcept;

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF draw from `probs` using a pre-drawn uniform `u` in [0, 1).
std::size_t categorical_from_uniform(std::span<const double> probs,
                                     double u) noexcept;

}  // namespace trustrepair
