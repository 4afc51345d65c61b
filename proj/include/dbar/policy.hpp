#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dbar/nn.hpp"
#include "dbar/tensor.hpp"

namespace dbar {

/// Constant: one learnable (mean, log_std) pair shared by every state.
/// Conditioned: an actor network maps the state to 2d outputs, the first d
/// being the mean and the last d the raw log standard deviation.
enum class PolicyMode { Constant, Conditioned };

std::string to_string(PolicyMode m);
PolicyMode policy_mode_from_string(const std::string& s);

struct LogStdRange {
  double min = -20.0;
  double max = 4.0;
  bool operator==(const LogStdRange&) const = default;
};

struct ActionSample {
  Vec64 eta;
  double logp = 0.0;
};

/// Distribution heads at one state; log_std is already clamped.
struct GaussianHeads {
  Vec64 mean;
  Vec64 log_std;
};

/// d log p / d mean and d log p / d log_std, per coordinate.
struct HeadGradients {
  Vec64 d_mean;
  Vec64 d_log_std;
};

struct PolicyInit {
  PolicyMode mode = PolicyMode::Constant;
  std::size_t d = 0;
  double init_mean = 0.0;
  double init_std = 0.5;
  std::vector<std::size_t> actor_hidden{32};
  Activation activation = Activation::Tanh;
  LogStdRange range{};
};

/// Diagonal Gaussian perturbation distribution N(eta | mean(x), diag(std(x)^2)).
/// Parameters are exposed as one flat vector so the PPO update can run Adam
/// over them regardless of mode.
class GaussianPolicy {
 public:
  static GaussianPolicy constant(Vec64 mean, Vec64 log_std, LogStdRange range = {});
  static GaussianPolicy conditioned(Mlp actor, LogStdRange range = {});

  PolicyMode mode() const { return mode_; }
  std::size_t dim() const { return d_; }
  const LogStdRange& range() const { return range_; }
  const Mlp* actor() const { return actor_ ? &*actor_ : nullptr; }

  std::span<double> params();
  std::span<const double> params() const;
  std::size_t num_params() const { return params().size(); }

  GaussianHeads heads(std::span<const double> x) const;
  ActionSample sample(std::span<const double> x, Rng& rng) const;
  double log_density(std::span<const double> x, std::span<const double> eta) const;
  HeadGradients logp_head_gradients(std::span<const double> x, std::span<const double> eta) const;

  /// grad += scale * d log p(eta | x) / d params. The clamp on log_std
  /// passes no gradient once a coordinate sits outside the range.
  void accumulate_logp_gradient(std::span<const double> x, std::span<const double> eta, double scale,
                                std::span<double> grad) const;

  bool operator==(const GaussianPolicy& other) const = default;

 private:
  GaussianPolicy() = default;
  void require_dims(std::span<const double> x) const;
  Vec64 raw_log_std(std::span<const double> x, Vec64* mean_out) const;

  PolicyMode mode_ = PolicyMode::Constant;
  std::size_t d_ = 0;
  LogStdRange range_{};
  std::vector<double> constant_params_;  // [mean(d), raw log_std(d)]
  std::optional<Mlp> actor_;
};

/// Builds the initial policy: mean(x) = init_mean and std(x) = init_std for
/// every state. Conditioned mode gets zero output weights with the output
/// bias carrying (init_mean, log init_std). The log_std range is widened to
/// keep log(init_std) strictly inside it. Throws InvalidArgument when
/// init_std <= 0 or d == 0.
GaussianPolicy init_policy(const PolicyInit& init, Rng& rng);

/// Gaussian density of eta under explicit heads.
double diag_gaussian_log_density(std::span<const double> mean, std::span<const double> log_std,
                                 std::span<const double> eta);

}  // namespace dbar
