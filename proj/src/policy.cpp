#include "dbar/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dbar/error.hpp"

namespace dbar {

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

std::string to_string(PolicyMode m) { return m == PolicyMode::Constant ? "constant" : "conditioned"; }

PolicyMode policy_mode_from_string(const std::string& s) {
  if (s == "constant") return PolicyMode::Constant;
  if (s == "conditioned") return PolicyMode::Conditioned;
  throw ParseError("unknown policy mode '" + s + "'");
}

double diag_gaussian_log_density(std::span<const double> mean, std::span<const double> log_std,
                                 std::span<const double> eta) {
  if (mean.size() != eta.size() || log_std.size() != eta.size()) {
    throw InvalidArgument("log density: length mismatch");
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double z = (eta[i] - mean[i]) / std::exp(log_std[i]);
    lp += -kHalfLog2Pi - log_std[i] - 0.5 * z * z;
  }
  return lp;
}

GaussianPolicy GaussianPolicy::constant(Vec64 mean, Vec64 log_std, LogStdRange range) {
  if (mean.empty() || mean.size() != log_std.size()) throw InvalidArgument("constant policy: bad head sizes");
  if (!(range.min < range.max)) throw InvalidArgument("log_std range is empty");
  GaussianPolicy p;
  p.mode_ = PolicyMode::Constant;
  p.d_ = mean.size();
  p.range_ = range;
  p.constant_params_ = std::move(mean);
  p.constant_params_.insert(p.constant_params_.end(), log_std.begin(), log_std.end());
  return p;
}

GaussianPolicy GaussianPolicy::conditioned(Mlp actor, LogStdRange range) {
  if (actor.output_dim() != 2 * actor.input_dim()) {
    throw InvalidArgument("conditioned actor must map d inputs to 2d outputs");
  }
  if (!(range.min < range.max)) throw InvalidArgument("log_std range is empty");
  GaussianPolicy p;
  p.mode_ = PolicyMode::Conditioned;
  p.d_ = actor.input_dim();
  p.range_ = range;
  p.actor_ = std::move(actor);
  return p;
}

std::span<double> GaussianPolicy::params() {
  return actor_ ? actor_->params() : std::span<double>(constant_params_);
}

std::span<const double> GaussianPolicy::params() const {
  return actor_ ? actor_->params() : std::span<const double>(constant_params_);
}

void GaussianPolicy::require_dims(std::span<const double> x) const {
  if (x.size() != d_) {
    throw InvalidArgument("policy state has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(d_));
  }
}

Vec64 GaussianPolicy::raw_log_std(std::span<const double> x, Vec64* mean_out) const {
  require_dims(x);
  if (mode_ == PolicyMode::Constant) {
    if (mean_out) mean_out->assign(constant_params_.begin(), constant_params_.begin() + d_);
    return Vec64(constant_params_.begin() + d_, constant_params_.end());
  }
  auto out = actor_->forward(x);
  if (mean_out) mean_out->assign(out.begin(), out.begin() + d_);
  return Vec64(out.begin() + d_, out.end());
}

GaussianHeads GaussianPolicy::heads(std::span<const double> x) const {
  GaussianHeads h;
  h.log_std = raw_log_std(x, &h.mean);
  for (auto& s : h.log_std) s = std::clamp(s, range_.min, range_.max);
  return h;
}

ActionSample GaussianPolicy::sample(std::span<const double> x, Rng& rng) const {
  const auto h = heads(x);
  const auto z = standard_normal_sample(rng, d_);
  ActionSample s;
  s.eta.resize(d_);
  for (std::size_t i = 0; i < d_; ++i) s.eta[i] = h.mean[i] + std::exp(h.log_std[i]) * z[i];
  s.logp = log_density(x, s.eta);
  return s;
}

double GaussianPolicy::log_density(std::span<const double> x, std::span<const double> eta) const {
  if (eta.size() != d_) throw InvalidArgument("perturbation length does not match policy");
  const auto h = heads(x);
  return diag_gaussian_log_density(h.mean, h.log_std, eta);
}

HeadGradients GaussianPolicy::logp_head_gradients(std::span<const double> x, std::span<const double> eta) const {
  if (eta.size() != d_) throw InvalidArgument("perturbation length does not match policy");
  const auto h = heads(x);
  HeadGradients g{Vec64(d_), Vec64(d_)};
  for (std::size_t i = 0; i < d_; ++i) {
    const double inv_var = std::exp(-2.0 * h.log_std[i]);
    const double diff = eta[i] - h.mean[i];
    g.d_mean[i] = diff * inv_var;
    g.d_log_std[i] = diff * diff * inv_var - 1.0;
  }
  return g;
}

void GaussianPolicy::accumulate_logp_gradient(std::span<const double> x, std::span<const double> eta,
                                              double scale, std::span<double> grad) const {
  if (grad.size() != num_params()) throw InvalidArgument("policy gradient buffer has the wrong size");
  Vec64 mean;
  const auto raw = raw_log_std(x, &mean);
  const auto g = logp_head_gradients(x, eta);
  if (mode_ == PolicyMode::Constant) {
    for (std::size_t i = 0; i < d_; ++i) {
      grad[i] += scale * g.d_mean[i];
      if (raw[i] > range_.min && raw[i] < range_.max) grad[d_ + i] += scale * g.d_log_std[i];
    }
    return;
  }
  Vec64 upstream(2 * d_);
  for (std::size_t i = 0; i < d_; ++i) {
    upstream[i] = scale * g.d_mean[i];
    upstream[d_ + i] = (raw[i] > range_.min && raw[i] < range_.max) ? scale * g.d_log_std[i] : 0.0;
  }
  backward_accumulate(*actor_, x, upstream, grad);
}

GaussianPolicy init_policy(const PolicyInit& init, Rng& rng) {
  if (!(init.init_std > 0.0) || !std::isfinite(init.init_std)) {
    throw InvalidArgument("init_std must be positive");
  }
  if (init.d == 0) throw InvalidArgument("policy dimension must be positive");
  const double log_std = std::log(init.init_std);
  LogStdRange range = init.range;
  range.max = std::max(range.max, log_std + 1.0);
  range.min = std::min(range.min, log_std - 1.0);

  if (init.mode == PolicyMode::Constant) {
    return GaussianPolicy::constant(Vec64(init.d, init.init_mean), Vec64(init.d, log_std), range);
  }
  std::vector<std::size_t> dims{init.d};
  dims.insert(dims.end(), init.actor_hidden.begin(), init.actor_hidden.end());
  dims.push_back(2 * init.d);
  Mlp actor = Mlp::glorot(dims, init.activation, rng);
  const std::size_t last = actor.num_layers() - 1;
  std::fill(actor.weights(last).begin(), actor.weights(last).end(), 0.0);
  auto bias = actor.bias(last);
  for (std::size_t i = 0; i < init.d; ++i) {
    bias[i] = init.init_mean;
    bias[init.d + i] = log_std;
  }
  return GaussianPolicy::conditioned(std::move(actor), range);
}

}  // namespace dbar
