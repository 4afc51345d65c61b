#include "dbar/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "dbar/error.hpp"

namespace dbar {

std::string to_string(SurrogateForm f) { return f == SurrogateForm::ClippedRatio ? "clipped-ratio" : "standard"; }

SurrogateForm surrogate_form_from_string(const std::string& s) {
  if (s == "clipped-ratio") return SurrogateForm::ClippedRatio;
  if (s == "standard") return SurrogateForm::StandardPPO;
  throw ParseError("unknown surrogate form '" + s + "' (clipped-ratio|standard)");
}

std::string to_string(CriticMode m) { return m == CriticMode::Scalar ? "scalar" : "network"; }

CriticMode critic_mode_from_string(const std::string& s) {
  if (s == "scalar") return CriticMode::Scalar;
  if (s == "network") return CriticMode::Network;
  throw ParseError("unknown critic mode '" + s + "' (scalar|network)");
}

void PpoConfig::validate() const {
  if (minibatch < 1) throw ConfigError("L (minibatch size) must be >= 1");
  if (samples_per_iter < minibatch) {
    throw ConfigError("M >= L violated: M = " + std::to_string(samples_per_iter) + ", L = " + std::to_string(minibatch));
  }
  if (epochs < 1) throw ConfigError("K (training epochs) must be >= 1");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

RolloutBuffer collect_rollout(AttackEnv& env, const GaussianPolicy& policy, std::size_t samples, Rng& rng,
                              std::size_t workers) {
  RolloutBuffer buffer;
  buffer.records.reserve(samples);

  auto draw = [&](Rng& r, RolloutRecord& rec) {
    rec.state = env.next_state(r);
    rec.x = env.state(rec.state);
    auto act = policy.sample(rec.x, r);
    rec.eta = std::move(act.eta);
    rec.lp = act.logp;
  };

  if (workers <= 1) {
    for (std::size_t j = 0; j < samples; ++j) {
      RolloutRecord rec;
      draw(rng, rec);
      try {
        const auto step = env.reward(rec.state, rec.eta);
        rec.r = step.reward;
        rec.misled = step.success;
        rec.linf = step.linf;
      } catch (const BudgetExceeded&) {
        buffer.truncated = true;
        break;
      }
      buffer.records.push_back(std::move(rec));
    }
    return buffer;
  }

  const std::size_t chunk = (samples + workers - 1) / workers;
  std::vector<std::vector<RolloutRecord>> parts(workers);
  std::vector<char> truncated(workers, 0);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(samples, w * chunk);
    const std::size_t end = std::min(samples, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      Rng local = rng.split(w);
      for (std::size_t j = begin; j < end; ++j) {
        RolloutRecord rec;
        draw(local, rec);
        try {
          const auto step = env.evaluate(rec.state, rec.eta, env.config().alpha);
          rec.r = step.reward;
          rec.misled = step.success;
          rec.linf = step.linf;
        } catch (const BudgetExceeded&) {
          truncated[w] = 1;
          break;
        }
        parts[w].push_back(std::move(rec));
      }
    });
  }
  for (auto& t : pool) t.join();
  rng.next_u64();

  for (std::size_t w = 0; w < workers; ++w) {
    buffer.truncated = buffer.truncated || truncated[w];
    for (auto& rec : parts[w]) {
      StepResult step;
      step.reward = rec.r;
      step.success = rec.misled;
      step.linf = rec.linf;
      env.record(rec.state, rec.eta, step);
      buffer.records.push_back(std::move(rec));
    }
  }
  return buffer;
}

Critic Critic::scalar(double value) {
  Critic c;
  c.mode_ = CriticMode::Scalar;
  c.scalar_ = {value};
  return c;
}

Critic Critic::network(std::size_t d, const std::vector<std::size_t>& hidden, Activation act, Rng& rng) {
  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  Mlp net = Mlp::glorot(dims, act, rng);
  const std::size_t last = net.num_layers() - 1;
  std::fill(net.weights(last).begin(), net.weights(last).end(), 0.0);
  std::fill(net.bias(last).begin(), net.bias(last).end(), 0.0);
  return from_mlp(std::move(net));
}

Critic Critic::from_mlp(Mlp net) {
  if (net.output_dim() != 1) throw InvalidArgument("critic network must have a scalar output");
  Critic c;
  c.mode_ = CriticMode::Network;
  c.scalar_.clear();
  c.net_ = std::move(net);
  return c;
}

double Critic::value(std::span<const double> x) const {
  return mode_ == CriticMode::Scalar ? scalar_[0] : net_->forward(x)[0];
}

std::span<double> Critic::params() { return net_ ? net_->params() : std::span<double>(scalar_); }
std::span<const double> Critic::params() const {
  return net_ ? net_->params() : std::span<const double>(scalar_);
}

void Critic::accumulate_value_gradient(std::span<const double> x, double scale, std::span<double> grad) const {
  if (mode_ == CriticMode::Scalar) {
    grad[0] += scale;
    return;
  }
  const double up[1] = {scale};
  backward_accumulate(*net_, x, up, grad);
}

double advantage(const RolloutRecord& record, const Critic& critic) { return record.r - critic.value(record.x); }

double ratio(const GaussianPolicy& policy, const RolloutRecord& record, std::size_t* clamped) {
  const double diff = policy.log_density(record.x, record.eta) - record.lp;
  if (std::abs(diff) > kMaxLogRatio && clamped) ++*clamped;
  return std::exp(std::clamp(diff, -kMaxLogRatio, kMaxLogRatio));
}

double clip_term(double w, double eps) { return std::clamp(w, 1.0 - eps, 1.0 + eps); }

double actor_objective(double w, double a, double eps, SurrogateForm form) {
  const double c = clip_term(w, eps);
  if (form == SurrogateForm::ClippedRatio) return std::min(w, c) * a;
  return std::min(w * a, c * a);
}

double actor_objective_dw(double w, double a, double eps, SurrogateForm form) {
  const double c = clip_term(w, eps);
  const bool c_is_w = w >= 1.0 - eps && w <= 1.0 + eps;
  if (form == SurrogateForm::ClippedRatio) {
    if (w <= c) return a;
    return c_is_w ? a : 0.0;
  }
  if (w * a <= c * a) return a;
  return c_is_w ? a : 0.0;
}

double fit_critic_scalar(const RolloutBuffer& buffer) {
  if (buffer.empty()) throw InvalidArgument("cannot fit a critic to an empty buffer");
  double sum = 0.0;
  for (const auto& r : buffer.records) sum += r.r;
  return sum / static_cast<double>(buffer.size());
}

double mean_surrogate(const GaussianPolicy& policy, const Critic& critic, const RolloutBuffer& buffer, double eps,
                      SurrogateForm form) {
  if (buffer.empty()) throw InvalidArgument("surrogate of an empty buffer");
  double total = 0.0;
  for (const auto& rec : buffer.records) total += actor_objective(ratio(policy, rec), advantage(rec, critic), eps, form);
  return total / static_cast<double>(buffer.size());
}

PpoLearner::PpoLearner(GaussianPolicy policy, Critic critic, PpoConfig cfg)
    : policy_(std::move(policy)),
      critic_(std::move(critic)),
      cfg_(cfg),
      actor_opt_(policy_.num_params(), AdamConfig{.lr = cfg.actor_lr}),
      critic_opt_(critic_.num_params(), AdamConfig{.lr = cfg.critic_lr}) {
  cfg_.validate();
}

UpdateStats PpoLearner::update(const RolloutBuffer& buffer, Rng& rng) {
  if (buffer.empty()) throw InvalidArgument("update needs a nonempty buffer");
  const auto policy_snapshot = policy_;
  const auto critic_snapshot = critic_;
  const auto actor_opt_snapshot = actor_opt_;
  const auto critic_opt_snapshot = critic_opt_;

  // Optional per-buffer standardization of advantages, with statistics
  // taken against the critic as it stands before this update.
  double adv_shift = 0.0, adv_scale = 1.0;
  if (cfg_.normalize_advantages) {
    double sum = 0.0, sq = 0.0;
    for (const auto& rec : buffer.records) {
      const double a = advantage(rec, critic_);
      sum += a;
      sq += a * a;
    }
    const double n = static_cast<double>(buffer.size());
    adv_shift = sum / n;
    adv_scale = 1.0 / (std::sqrt(std::max(sq / n - adv_shift * adv_shift, 0.0)) + 1e-8);
  }

  UpdateStats stats;
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t L = cfg_.minibatch;
  const std::size_t batches = buffer.size() / L;
  std::size_t evaluations = 0, clipped = 0;
  double ratio_sum = 0.0, objective_sum = 0.0, critic_sum = 0.0;

  auto rollback = [&] {
    policy_ = policy_snapshot;
    critic_ = critic_snapshot;
    actor_opt_ = actor_opt_snapshot;
    critic_opt_ = critic_opt_snapshot;
    stats.rolled_back = true;
  };

  std::vector<double> actor_grad(policy_.num_params());
  std::vector<double> critic_grad(critic_.num_params());
  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b) {
      std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
      std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
      double batch_objective = 0.0, batch_mse = 0.0, batch_adv = 0.0;
      const double inv_l = 1.0 / static_cast<double>(L);

      for (std::size_t k = b * L; k < (b + 1) * L; ++k) {
        const auto& rec = buffer.records[order[k]];
        const double v = critic_.value(rec.x);
        const double a = (rec.r - v - adv_shift) * adv_scale;
        const double log_ratio = policy_.log_density(rec.x, rec.eta) - rec.lp;
        const bool clamped = std::abs(log_ratio) > kMaxLogRatio;
        stats.ratio_clamps += clamped;
        const double w = std::exp(std::clamp(log_ratio, -kMaxLogRatio, kMaxLogRatio));
        const double obj = actor_objective(w, a, cfg_.clip_eps, cfg_.form);

        batch_objective += obj;
        batch_adv += a;
        batch_mse += (rec.r - v) * (rec.r - v);
        ratio_sum += w;
        clipped += clip_term(w, cfg_.clip_eps) != w;
        ++evaluations;

        // Ascent on the surrogate = descent on its negation; dw/dlp' = w.
        const double dobj = clamped ? 0.0 : actor_objective_dw(w, a, cfg_.clip_eps, cfg_.form) * w;
        if (dobj != 0.0) policy_.accumulate_logp_gradient(rec.x, rec.eta, -dobj * inv_l, actor_grad);
        critic_.accumulate_value_gradient(rec.x, -2.0 * (rec.r - v) * inv_l, critic_grad);
      }
      batch_objective *= inv_l;
      batch_mse *= inv_l;
      if (epoch == 0 && b == 0) {
        stats.first_minibatch_objective = batch_objective;
        stats.first_minibatch_advantage = batch_adv * inv_l;
      }
      if (!std::isfinite(batch_objective) || !std::isfinite(batch_mse)) {
        rollback();
        return stats;
      }
      try {
        actor_opt_.step(policy_.params(), actor_grad);
        ++stats.actor_updates;
        critic_opt_.step(critic_.params(), critic_grad);
        ++stats.critic_updates;
      } catch (const UpdateRejected&) {
        rollback();
        return stats;
      }
      if (!all_finite(policy_.params()) || !all_finite(critic_.params())) {
        rollback();
        return stats;
      }
      objective_sum += batch_objective;
      critic_sum += batch_mse;
    }
  }
  if (evaluations > 0) {
    const double n = static_cast<double>(evaluations);
    stats.mean_ratio = ratio_sum / n;
    stats.clip_fraction = static_cast<double>(clipped) / n;
    stats.actor_objective = objective_sum / static_cast<double>(stats.actor_updates);
    stats.critic_loss = critic_sum / static_cast<double>(stats.critic_updates);
  }
  return stats;
}

}  // namespace dbar
