#include "dbar/env.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dbar/error.hpp"

namespace dbar {

void EnvConfig::validate() const {
  if (!(success_threshold > 0.0)) throw ConfigError("success threshold must be positive");
  if (!(norm_floor > 0.0)) throw ConfigError("norm floor must be positive");
  if (!(alpha >= 1.0)) throw ConfigError("alpha must be >= 1");
}

double reward_value(bool misled, double linf, double norm_floor, double alpha) {
  const double indicator = misled ? 1.0 : 0.0;
  return (2.0 * alpha * indicator - 1.0) / std::max(linf, norm_floor);
}

AttackEnv::AttackEnv(const Oracle& oracle, QueryCounter& counter, EnvConfig cfg)
    : oracle_(&oracle), counter_(&counter), cfg_(cfg), evaluations_(std::make_unique<std::atomic<std::uint64_t>>(0)) {
  cfg_.validate();
}

AttackEnv AttackEnv::context_free(const Example& benign, const Oracle& oracle, QueryCounter& attack_counter,
                                  QueryCounter& setup_counter, EnvConfig cfg) {
  AttackEnv env(oracle, attack_counter, cfg);
  const Label predicted = predict_counted(oracle, setup_counter, benign.x);
  if (predicted != benign.label) {
    throw PreconditionError("benign example is misclassified (oracle says " + std::to_string(predicted) +
                            ", label is " + std::to_string(benign.label) + ")");
  }
  if (cfg.target && *cfg.target == predicted) {
    throw PreconditionError("benign example is already classified as the target label");
  }
  env.states_.push_back({benign.x, predicted});
  env.best_.resize(1);
  return env;
}

AttackEnv AttackEnv::context_aware(const Dataset& pool, const Oracle& oracle, QueryCounter& attack_counter,
                                   QueryCounter& setup_counter, EnvConfig cfg, std::vector<std::size_t>* dropped) {
  if (pool.empty()) throw InvalidArgument("context-aware environment needs a nonempty pool");
  AttackEnv env(oracle, attack_counter, cfg);
  env.context_aware_ = true;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& ex = pool[i];
    const Label predicted = predict_counted(oracle, setup_counter, ex.x);
    const bool usable = predicted == ex.label && !(cfg.target && *cfg.target == predicted);
    if (usable) {
      env.states_.push_back({ex.x, predicted});
    } else if (dropped) {
      dropped->push_back(i);
    }
  }
  if (env.states_.empty()) throw PreconditionError("every pool member is misclassified");
  env.best_.resize(env.states_.size());
  return env;
}

std::size_t AttackEnv::next_state(Rng& rng) const {
  if (states_.empty()) throw InvalidArgument("environment has no states");
  return context_aware_ ? rng.uniform_index(states_.size()) : 0;
}

Vec64 AttackEnv::query_point(std::size_t state, std::span<const double> eta) const {
  auto q = add(states_.at(state).x, eta);
  if (cfg_.domain == DomainMode::UnitBox) {
    for (auto& v : q) v = std::clamp(v, 0.0, 1.0);
  }
  return q;
}

bool AttackEnv::misled(std::size_t state, Label label) const {
  return cfg_.target ? label == *cfg_.target : label != states_[state].label;
}

StepResult AttackEnv::evaluate(std::size_t state, std::span<const double> eta, double alpha) const {
  if (!(alpha >= 1.0)) throw InvalidArgument("alpha must be >= 1");
  if (eta.size() != oracle_->input_dim()) throw InvalidArgument("perturbation has the wrong dimension");
  require_finite(eta, "perturbation");
  const auto q = query_point(state, eta);
  StepResult step;
  step.label = predict_counted(*oracle_, *counter_, q);
  evaluations_->fetch_add(1);
  step.success = misled(state, step.label);
  step.linf = linf_norm(eta);
  step.reward = reward_value(step.success, step.linf, cfg_.norm_floor, alpha);
  return step;
}

void AttackEnv::record(std::size_t state, std::span<const double> eta, const StepResult& step) {
  auto& best = best_.at(state);
  if (step.success && step.linf < best.linf) {
    best.found = true;
    best.linf = step.linf;
    best.eta.assign(eta.begin(), eta.end());
  }
}

StepResult AttackEnv::reward(std::size_t state, std::span<const double> eta) {
  return reward_generalized(state, eta, cfg_.alpha);
}

StepResult AttackEnv::reward_generalized(std::size_t state, std::span<const double> eta, double alpha) {
  auto step = evaluate(state, eta, alpha);
  record(state, eta, step);
  return step;
}

}  // namespace dbar
