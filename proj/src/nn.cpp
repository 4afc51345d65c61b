#include "dbar/nn.hpp"

#include <cmath>

#include "dbar/error.hpp"

namespace dbar {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::ReLU;
  throw ParseError("unknown activation '" + s + "'");
}

Mlp::Mlp(std::vector<std::size_t> dims, Activation hidden) : dims_(std::move(dims)), activation_(hidden) {
  if (dims_.size() < 2) throw InvalidArgument("an Mlp needs at least input and output dims");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] == 0 || dims_[l + 1] == 0) throw InvalidArgument("Mlp layer dims must be positive");
    offsets_.push_back(total);
    total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> dims, Activation hidden, Rng& rng) {
  Mlp net(std::move(dims), hidden);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(net.dims_[l] + net.dims_[l + 1]));
    for (auto& w : net.weights(l)) w = rng.uniform(-limit, limit);
  }
  return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_[layer], dims_[layer] * dims_[layer + 1]);
}
std::span<const double> Mlp::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(offsets_[layer], dims_[layer] * dims_[layer + 1]);
}
std::span<double> Mlp::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}

namespace {

double activate(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }

// Derivative expressed through the activation output h = act(z).
double activate_grad(Activation a, double h) { return a == Activation::Tanh ? 1.0 - h * h : (h > 0.0 ? 1.0 : 0.0); }

// Computes the post-activation value of every layer; acts.back() is the output.
std::vector<Vec64> forward_trace(const Mlp& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) {
    throw InvalidArgument("Mlp input has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(net.input_dim()));
  }
  std::vector<Vec64> acts;
  acts.reserve(net.num_layers() + 1);
  acts.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& in = acts.back();
    const std::size_t n_in = net.dims()[l], n_out = net.dims()[l + 1];
    const auto w = net.weights(l);
    const auto b = net.bias(l);
    Vec64 out(n_out);
    const bool last = l + 1 == net.num_layers();
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = b[o];
      const double* row = w.data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[o] = last ? z : activate(net.activation(), z);
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace

Vec64 Mlp::forward(std::span<const double> x) const { return std::move(forward_trace(*this, x).back()); }

void backward_accumulate(const Mlp& net, std::span<const double> x, std::span<const double> upstream,
                         std::span<double> grad) {
  if (upstream.size() != net.output_dim()) {
    throw InvalidArgument("upstream has length " + std::to_string(upstream.size()) + ", expected " +
                          std::to_string(net.output_dim()));
  }
  if (grad.size() != net.num_params()) throw InvalidArgument("gradient buffer does not match the network");
  const auto acts = forward_trace(net, x);

  Vec64 delta(upstream.begin(), upstream.end());
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const std::size_t n_in = net.dims()[l], n_out = net.dims()[l + 1];
    const auto& in = acts[l];
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);
    for (std::size_t o = 0; o < n_out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < n_in; ++i) gw[o * n_in + i] += delta[o] * in[i];
    }
    if (l == 0) break;
    const auto w = net.weights(l);
    Vec64 prev(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      for (std::size_t i = 0; i < n_in; ++i) prev[i] += w[o * n_in + i] * delta[o];
    }
    for (std::size_t i = 0; i < n_in; ++i) prev[i] *= activate_grad(net.activation(), in[i]);
    delta = std::move(prev);
  }
}

Gradients backward(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
  auto g = Gradients::zeros_like(net);
  backward_accumulate(net, x, upstream, g.values);
  return g;
}

AdamState::AdamState(std::size_t num_params, AdamConfig cfg)
    : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("Adam state does not match parameter count");
  }
  if (!all_finite(grads)) throw UpdateRejected("non-finite gradient rejected by Adam");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) { state.step(net.params(), grads.values); }

}  // namespace dbar
