#include "dbar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dbar/error.hpp"

namespace dbar {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

void require_same_len(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("length mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
}
}  // namespace

double linf_norm(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("linf_norm of empty vector");
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw InvalidArgument(std::string(what) + " contains non-finite entries");
}

Vec64 add(std::span<const double> a, std::span<const double> b) {
  require_same_len(a, b);
  Vec64 out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec64 negate(std::span<const double> v) {
  Vec64 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
  return out;
}

Vec64 clamp_box(std::span<const double> v, double lo, double hi) {
  Vec64 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], lo, hi);
  return out;
}

std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  return splitmix_mix(state_);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index over an empty range");
  if (n == 1) return 0;
  const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(splitmix_mix(state_ ^ splitmix_mix(stream + kGolden)));
}

Vec64 standard_normal_sample(Rng& rng, std::size_t d) {
  if (d == 0) throw InvalidArgument("standard_normal_sample with d = 0");
  Vec64 out(d);
  for (auto& z : out) z = rng.normal();
  return out;
}

}  // namespace dbar
