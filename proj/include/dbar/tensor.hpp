#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dbar {

/// Flat vector of 64-bit reals: inputs x, perturbations eta, network outputs.
using Vec64 = std::vector<double>;
using Label = std::uint32_t;

/// max_i |v_i|. Throws InvalidArgument on an empty vector.
double linf_norm(std::span<const double> v);

/// Throws InvalidArgument naming `what` if any entry is NaN or Inf.
void require_finite(std::span<const double> v, const char* what);
bool all_finite(std::span<const double> v);

Vec64 add(std::span<const double> a, std::span<const double> b);
Vec64 negate(std::span<const double> v);

/// Coordinate-wise clamp into [lo, hi].
Vec64 clamp_box(std::span<const double> v, double lo, double hi);

/// SplitMix64: a counter-based generator. The counter advances by the
/// 64-bit golden-ratio increment and each output is a bijective mix of the
/// counter, so a stream is fully determined by its seed and the number of
/// draws taken.
///
///   uniform01      = (next_u64() >> 11) * 2^-53                  in [0, 1)
///   normal         = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)            one Box-Muller
///                    branch, two uniforms per draw, no cached spare
///   uniform_index  = floor(next_u64() * n / 2^64); n == 1 draws nothing
///   split(stream)  = Rng(mix(counter ^ mix(stream + golden)))    parent untouched
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  std::size_t uniform_index(std::size_t n);

  Rng split(std::uint64_t stream) const;

  /// In-place Fisher-Yates shuffle driven by uniform_index.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

std::uint64_t splitmix_mix(std::uint64_t z);

/// d i.i.d. N(0, 1) draws. Throws InvalidArgument when d == 0.
Vec64 standard_normal_sample(Rng& rng, std::size_t d);

}  // namespace dbar
