#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <vector>

#include "dbar/env.hpp"
#include "dbar/nn.hpp"
#include "dbar/policy.hpp"

namespace dbar {

/// ClippedRatio: min(w, clip(w, 1-eps, 1+eps)) * a
/// StandardPPO:  min(w * a, clip(w, 1-eps, 1+eps) * a)
/// They agree whenever a >= 0 and split when a < 0 and w > 1 - eps.
enum class SurrogateForm { ClippedRatio, StandardPPO };

std::string to_string(SurrogateForm f);
SurrogateForm surrogate_form_from_string(const std::string& s);

struct PpoConfig {
  std::size_t samples_per_iter = 64;  // M
  std::size_t epochs = 10;            // K
  std::size_t minibatch = 10;         // L
  double clip_eps = 0.02;
  SurrogateForm form = SurrogateForm::ClippedRatio;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  bool normalize_advantages = false;
  std::size_t workers = 1;

  /// Throws ConfigError naming the violated constraint (M >= L >= 1, 0 < eps < 1, K >= 1).
  void validate() const;
  std::size_t minibatches_per_epoch() const { return samples_per_iter / minibatch; }
};

struct RolloutRecord {
  std::size_t state = 0;
  Vec64 x;
  Vec64 eta;
  double r = 0.0;
  double lp = 0.0;  // log-density under the collecting policy
  bool misled = false;
  double linf = 0.0;
};

struct RolloutBuffer {
  std::vector<RolloutRecord> records;
  bool truncated = false;  // the attack budget ran out mid-collection

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Up to M (state, action, reward, log-prob) records. The policy is read-only
/// here. With workers > 1 each worker draws from rng.split(worker) and the
/// best-so-far table is merged in worker order after the batch.
RolloutBuffer collect_rollout(AttackEnv& env, const GaussianPolicy& policy, std::size_t samples, Rng& rng,
                              std::size_t workers = 1);

enum class CriticMode { Scalar, Network };

std::string to_string(CriticMode m);
CriticMode critic_mode_from_string(const std::string& s);

/// Baseline V(x). The scalar form ignores the state (context-free attacks
/// have a single state); the network form is an Mlp with one output.
class Critic {
 public:
  static Critic scalar(double value = 0.0);
  /// Glorot hidden layers, zero output layer, so V starts at 0 everywhere.
  static Critic network(std::size_t d, const std::vector<std::size_t>& hidden, Activation act, Rng& rng);
  static Critic from_mlp(Mlp net);

  CriticMode mode() const { return mode_; }
  double value(std::span<const double> x) const;
  std::span<double> params();
  std::span<const double> params() const;
  std::size_t num_params() const { return params().size(); }
  const Mlp* net() const { return net_ ? &*net_ : nullptr; }

  /// grad += scale * dV(x)/dparams
  void accumulate_value_gradient(std::span<const double> x, double scale, std::span<double> grad) const;

 private:
  CriticMode mode_ = CriticMode::Scalar;
  std::vector<double> scalar_{0.0};
  std::optional<Mlp> net_;
};

/// a = r - V(x)
double advantage(const RolloutRecord& record, const Critic& critic);

inline constexpr double kMaxLogRatio = 30.0;

/// w = exp(log_density(policy, x, eta) - lp), with the exponent clamped to
/// [-30, 30]; `clamped` is incremented whenever the clamp engages.
double ratio(const GaussianPolicy& policy, const RolloutRecord& record, std::size_t* clamped = nullptr);

double clip_term(double w, double eps);
double actor_objective(double w, double a, double eps, SurrogateForm form);
/// d actor_objective / d w (one-sided choice at kinks: the unclipped branch).
double actor_objective_dw(double w, double a, double eps, SurrogateForm form);

/// Closed-form MSE minimizer for the scalar critic: the mean reward.
double fit_critic_scalar(const RolloutBuffer& buffer);

struct UpdateStats {
  std::size_t actor_updates = 0;
  std::size_t critic_updates = 0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;     // share of samples whose clip term differs from w
  double actor_objective = 0.0;   // mean surrogate over all minibatch evaluations
  double critic_loss = 0.0;       // mean MSE over all minibatch evaluations
  double first_minibatch_objective = 0.0;
  double first_minibatch_advantage = 0.0;
  std::size_t ratio_clamps = 0;
  bool rolled_back = false;
};

/// Owns the policy, critic and both Adam states across iterations.
class PpoLearner {
 public:
  PpoLearner(GaussianPolicy policy, Critic critic, PpoConfig cfg);

  /// K epochs; each epoch reshuffles the buffer and walks floor(|B|/L)
  /// minibatches. Per minibatch: recompute lp' and v, a = r - v,
  /// w = exp(lp' - lp), ascend the mean surrogate, descend MSE(r, v).
  /// A non-finite loss or gradient restores the pre-update snapshot and sets
  /// rolled_back.
  UpdateStats update(const RolloutBuffer& buffer, Rng& rng);

  const GaussianPolicy& policy() const { return policy_; }
  const Critic& critic() const { return critic_; }
  const PpoConfig& config() const { return cfg_; }

 private:
  GaussianPolicy policy_;
  Critic critic_;
  PpoConfig cfg_;
  AdamState actor_opt_;
  AdamState critic_opt_;
};

/// Mean ClippedRatio/StandardPPO surrogate of `policy` on a frozen buffer
/// against a fixed critic (used by diagnostics and the ascent property test).
double mean_surrogate(const GaussianPolicy& policy, const Critic& critic, const RolloutBuffer& buffer, double eps,
                      SurrogateForm form);

}  // namespace dbar
