#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>

#include "rctsyn/common.hpp"

namespace rctsyn {

/// splitmix64 finalizer. Good avalanche behaviour, cheap, and fully
/// portable, which keeps derived seeds identical across platforms.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a list of task
/// coordinates (stage tag, epsilon index, replicate index, ...). Each part is
/// folded in with a splitmix64 round so that nearby coordinates map to
/// unrelated seeds. Used everywhere a component needs its own stream: the
/// result depends only on (master, parts), never on draw order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t p : parts) {
    h = mix64(h ^ (p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
  }
  return h;
}

/// Deterministic random source: a std::mt19937_64 engine (its output sequence
/// is pinned by the standard, so results are bit-stable across compilers)
/// plus hand-rolled transformations. The standard library *distributions* are
/// deliberately not used: their algorithms are implementation-defined, and
/// byte-identical reruns are part of this library's contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on the open interval (0,1): 53 random bits, then offset by half
  /// a step so 0 and 1 are unreachable. Safe to pass straight into log().
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  /// Uniform integer in [0, bound) by masked rejection; unbiased.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t mask = std::bit_ceil(bound) - 1;
    for (;;) {
      const std::uint64_t v = eng_() & mask;
      if (v < bound) return v;
    }
  }

  /// Standard normal via Box-Muller.
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform01()));
    return r * std::cos(2.0 * std::numbers::pi * uniform01());
  }

  double exponential(double mean) { return -mean * std::log(uniform01()); }

  /// Laplace(0, scale) by CDF inversion.
  double laplace(double scale) {
    const double u = uniform01() - 0.5;
    return (u < 0 ? scale : -scale) * std::log1p(-2.0 * std::abs(u));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Gamma(shape, scale) via Marsaglia-Tsang squeeze; shapes below one are
  /// boosted through Gamma(shape+1) and a power of a uniform.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) {
      throw NumericError("gamma draw requires positive shape and scale");
    }
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / (3.0 * std::sqrt(d));
    for (;;) {
      const double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform01();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v * scale;
      }
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  /// Binomial(n, 1/2), exact for any n representable in a double.
  ///
  /// Small n: popcount of n fair random bits, which is the definition.
  /// Large n: inversion by chop-down from the mode, walking outward with
  /// incremental pmf ratios; expected O(sqrt(n)) steps, so a single draw is
  /// cheap even for n around 2^48 cell counts.
  std::uint64_t binomial_half(std::uint64_t n) {
    if (n == 0) return 0;
    if (n <= (1ull << 16)) {
      std::uint64_t k = 0;
      std::uint64_t full = n / 64, rest = n % 64;
      for (std::uint64_t w = 0; w < full; ++w) {
        k += static_cast<std::uint64_t>(std::popcount(eng_()));
      }
      if (rest) {
        k += static_cast<std::uint64_t>(
            std::popcount(eng_() & ((1ull << rest) - 1ull)));
      }
      return k;
    }
    const double nd = static_cast<double>(n);
    const double m = std::floor(nd * 0.5);
    const double log_fm = std::lgamma(nd + 1.0) - std::lgamma(m + 1.0) -
                          std::lgamma(nd - m + 1.0) - nd * std::log(2.0);
    const double fm = std::exp(log_fm);
    double u = uniform01();
    u -= fm;
    if (u <= 0.0) return static_cast<std::uint64_t>(m);
    double fu = fm, fd = fm;  // running pmf values above / below the mode
    double ku = m, kd = m;
    for (;;) {
      if (ku < nd) {
        fu *= (nd - ku) / (ku + 1.0);
        ku += 1.0;
        u -= fu;
        if (u <= 0.0) return static_cast<std::uint64_t>(ku);
      }
      if (kd > 0.0) {
        fd *= kd / (nd - kd + 1.0);
        kd -= 1.0;
        u -= fd;
        if (u <= 0.0) return static_cast<std::uint64_t>(kd);
      }
      if ((ku >= nd && kd <= 0.0) || (fu < 1e-300 && fd < 1e-300)) {
        // Mass leaked to rounding; land on the nearer unfinished walker.
        return static_cast<std::uint64_t>(fu >= fd ? ku : kd);
      }
    }
  }

  /// Index draw from explicit probabilities (assumed to sum to one).
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform01();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return probs.empty() ? 0 : probs.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rctsyn
