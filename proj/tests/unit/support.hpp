#pragma once

#include <atomic>
#include <cmath>
#include <numbers>
#include <span>

#include "dbar/oracle.hpp"

namespace dbar::test {

/// Label 1 iff the first coordinate is at least `boundary`.
class StepOracle final : public Oracle {
 public:
  explicit StepOracle(double boundary = 0.5, std::size_t d = 1) : boundary_(boundary), d_(d) {}
  Label predict(std::span<const double> x) const override { return x[0] >= boundary_ ? 1u : 0u; }
  std::size_t input_dim() const override { return d_; }
  std::size_t num_classes() const override { return 2; }

 private:
  double boundary_;
  std::size_t d_;
};

/// Wraps an oracle and records every access, so tests can check that attacks
/// only ever call predict.
class SentinelOracle final : public Oracle {
 public:
  explicit SentinelOracle(const Oracle& inner) : inner_(inner) {}
  Label predict(std::span<const double> x) const override {
    ++predicts;
    return inner_.predict(x);
  }
  std::size_t input_dim() const override {
    ++metadata;
    return inner_.input_dim();
  }
  std::size_t num_classes() const override {
    ++metadata;
    return inner_.num_classes();
  }

  mutable std::atomic<std::size_t> predicts{0};
  mutable std::atomic<std::size_t> metadata{0};

 private:
  const Oracle& inner_;
};

/// log N(eta | mu, sigma^2) computed straight from the density, not from the
/// closed-form log expression.
inline double normal_logpdf(double eta, double mu, double sigma) {
  const double z = (eta - mu) / sigma;
  return std::log(std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi)));
}

inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dbar::test
