#pragma once

#include <array>
#include <string>

#include "dbar/dataset.hpp"

namespace dbar {

/// Desk-scale synthetic tasks.
///   blobs2d: two Gaussian blobs at (0.25, 0.25) and (0.75, 0.75), unit box.
///   rings2d: concentric rings of radius 0.15 and 0.35 around (0.5, 0.5), unit box.
///   sine-ts: length-32 sine waves of 1 vs 2 cycles with random phase, unbounded.
/// Labels alternate 0, 1, 0, ... so classes stay balanced.
enum class DataKind { Blobs2d, Rings2d, SineTs };

std::string to_string(DataKind k);
DataKind data_kind_from_string(const std::string& s);

inline constexpr std::array<std::array<double, 2>, 2> kBlobCenters{{{0.25, 0.25}, {0.75, 0.75}}};
inline constexpr std::size_t kSineLength = 32;

/// Default noise level per kind (blob std 0.05, ring radial std 0.02, sine additive std 0.1).
double default_noise(DataKind kind);

Dataset generate_dataset(DataKind kind, std::size_t n, double noise, Rng& rng);

}  // namespace dbar
