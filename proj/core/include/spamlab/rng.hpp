#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include <boost/random/normal_distribution.hpp>

namespace spamlab {

/// splitmix64 finalizer; used for stateless seed derivation and hashed bit streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a list of integers.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Complex circular Gaussian samples with a platform-independent sequence.
/// std::normal_distribution is implementation-defined, so Boost's ziggurat
/// transform is used over the standard-specified mt19937_64 stream.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  /// One complex sample with E|z|^2 = variance.
  std::complex<double> next(double variance) {
    const double s = std::sqrt(0.5 * variance);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
  }

  /// Adds noise of the given per-sample complex variance to `out`.
  void add_to(std::span<std::complex<double>> out, double variance) {
    const double s = std::sqrt(0.5 * variance);
    for (auto& v : out) {
      const double re = normal_(engine_);
      const double im = normal_(engine_);
      v += std::complex<double>(s * re, s * im);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace spamlab
