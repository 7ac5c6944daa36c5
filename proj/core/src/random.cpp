#include "trustrepair/random.hpp"

namespace trustrepair {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t task,
                          std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(mix_seed(root) ^ task) ^ (stream * 0x632be59bd9b4e019ULL));
}

double Rng::uniform() noexcept {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::categorical(std::span<const double> probs) noexcept {
  return categorical_from_uniform(probs, uniform());
}

std::size_t Rng::index(std::size_t n) noexcept {
  // Lemire's nearly-divisionless method would be faster; the modulo bias
  // here is below 2^-40 for the small n used.
  return static_cast<std::size_t>(engine_() % n);
}

std::size_t categorical_from_uniform(std::span<const double> probs,
                                     double u) noexcept {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  // Rounding left u above the accumulated mass.
  return last_positive;
}

}  // namespace trustrepair
