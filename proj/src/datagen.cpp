#include "dbar/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dbar/error.hpp"

namespace dbar {

std::string to_string(DataKind k) {
  switch (k) {
    case DataKind::Blobs2d: return "blobs2d";
    case DataKind::Rings2d: return "rings2d";
    case DataKind::SineTs: return "sine-ts";
  }
  return "?";
}

DataKind data_kind_from_string(const std::string& s) {
  if (s == "blobs2d") return DataKind::Blobs2d;
  if (s == "rings2d") return DataKind::Rings2d;
  if (s == "sine-ts") return DataKind::SineTs;
  throw ConfigError("unknown data kind '" + s + "' (blobs2d|rings2d|sine-ts)");
}

double default_noise(DataKind kind) {
  switch (kind) {
    case DataKind::Blobs2d: return 0.05;
    case DataKind::Rings2d: return 0.02;
    case DataKind::SineTs: return 0.1;
  }
  return 0.0;
}

Dataset generate_dataset(DataKind kind, std::size_t n, double noise, Rng& rng) {
  if (n == 0) throw InvalidArgument("dataset size must be positive");
  if (!(noise >= 0.0)) throw InvalidArgument("noise must be non-negative");
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<Example> examples;
  examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.label = static_cast<Label>(i % 2);
    switch (kind) {
      case DataKind::Blobs2d: {
        const auto& c = kBlobCenters[ex.label];
        ex.x = {std::clamp(c[0] + noise * rng.normal(), 0.0, 1.0), std::clamp(c[1] + noise * rng.normal(), 0.0, 1.0)};
        break;
      }
      case DataKind::Rings2d: {
        const double radius = (ex.label == 0 ? 0.15 : 0.35) + noise * rng.normal();
        const double angle = two_pi * rng.uniform01();
        ex.x = {std::clamp(0.5 + radius * std::cos(angle), 0.0, 1.0),
                std::clamp(0.5 + radius * std::sin(angle), 0.0, 1.0)};
        break;
      }
      case DataKind::SineTs: {
        const double cycles = ex.label == 0 ? 1.0 : 2.0;
        const double phase = two_pi * rng.uniform01();
        ex.x.resize(kSineLength);
        for (std::size_t t = 0; t < kSineLength; ++t) {
          const double s = static_cast<double>(t) / static_cast<double>(kSineLength);
          ex.x[t] = std::sin(two_pi * cycles * s + phase) + noise * rng.normal();
        }
        break;
      }
    }
    examples.push_back(std::move(ex));
  }
  const std::size_t d = kind == DataKind::SineTs ? kSineLength : 2;
  const auto mode = kind == DataKind::SineTs ? DomainMode::Unbounded : DomainMode::UnitBox;
  return Dataset(std::move(examples), d, 2, mode);
}

}  // namespace dbar
