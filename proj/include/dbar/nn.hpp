#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbar/tensor.hpp"

namespace dbar {

enum class Activation { Tanh, ReLU };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully-connected network with a hidden-layer activation and a linear
/// output layer. All parameters live in one flat buffer so optimizers and
/// gradient containers share a layout: for each layer, weights (out x in,
/// row-major) followed by the bias.
class Mlp {
 public:
  /// Zero-initialized network. dims = {in, hidden..., out}, at least two entries.
  Mlp(std::vector<std::size_t> dims, Activation hidden);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp glorot(std::vector<std::size_t> dims, Activation hidden, Rng& rng);

  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  Activation activation() const { return activation_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + dims_[layer] * dims_[layer + 1]; }

  /// Throws InvalidArgument on a dimension mismatch.
  Vec64 forward(std::span<const double> x) const;

  bool operator==(const Mlp& other) const = default;

 private:
  std::vector<std::size_t> dims_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Flat gradient buffer with the same layout as Mlp::params().
struct Gradients {
  std::vector<double> values;

  static Gradients zeros_like(const Mlp& net) { return {std::vector<double>(net.num_params(), 0.0)}; }
};

/// Gradient of dot(upstream, forward(net, x)) with respect to every parameter.
Gradients backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream);

/// Same as backward, but adds the gradient into `grad` (length num_params).
void backward_accumulate(const Mlp& net, std::span<const double> x, std::span<const double> upstream,
                         std::span<double> grad);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a flat parameter vector (minimization).
class AdamState {
 public:
  AdamState(std::size_t num_params, AdamConfig cfg);

  /// Throws UpdateRejected (leaving params and moments untouched) if any
  /// gradient entry is non-finite.
  void step(std::span<double> params, std::span<const double> grads);

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

}  // namespace dbar
