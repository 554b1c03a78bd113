#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace rcp {

/// SplitMix64 finalizer. Used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combine two seeds into a new, well-mixed seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Deterministic random source.
///
/// The engine is the 64-bit Mersenne Twister (std::mt19937_64), whose output
/// sequence is fixed by the C++ standard. All distributions are implemented
/// here rather than taken from <random> because the standard leaves their
/// algorithms unspecified, which would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). Unbiased (Lemire's rejection method).
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, 1) by Marsaglia-Tsang, with the shape<1 boost.
  double gamma(double shape);

  /// Beta(a, b) as G_a / (G_a + G_b).
  double beta(double a, double b);

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream derived from this stream's seed (not its state),
  /// so that fork(k) is the same regardless of how many draws were consumed.
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace rcp
