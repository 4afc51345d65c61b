#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dbar/env.hpp"
#include "dbar/oracle.hpp"
#include "dbar/policy.hpp"
#include "dbar/ppo.hpp"

namespace dbar {

struct AttackConfig {
  PpoConfig ppo{};
  EnvConfig env{};
  double init_mean = 0.0;
  double init_std = 0.5;
  std::uint64_t budget = kDefaultBudget;
  std::uint64_t seed = 0;
  /// 0 means budget / M, so the budget is the binding limit.
  std::size_t iterations = 0;
  /// Unset: Constant/Scalar for context-free, Conditioned/Network for context-aware.
  std::optional<PolicyMode> policy_mode;
  std::optional<CriticMode> critic_mode;
  std::vector<std::size_t> actor_hidden{32};
  std::vector<std::size_t> critic_hidden{32};
  /// Fresh draws from the trained distribution scored by the evaluator.
  std::size_t eval_draws = 100;

  /// Throws ConfigError; checks budget >= M plus the Ppo/Env constraints.
  void validate() const;
  std::size_t resolved_iterations() const;
};

/// Per-iteration training telemetry (one JSON line each in CLI logs).
struct IterationStats {
  std::size_t iteration = 0;
  std::size_t samples = 0;
  double mean_reward = 0.0;
  double mean_linf = 0.0;
  double success_rate_in_batch = 0.0;
  double clip_fraction = 0.0;
  double mean_ratio = 0.0;
  double actor_objective = 0.0;
  double critic_loss = 0.0;
  std::size_t actor_updates = 0;
  std::size_t critic_updates = 0;
  std::uint64_t queries_used = 0;
  bool rolled_back = false;
  double policy_mean_linf = 0.0;  // ||mean(x)||_inf averaged over states
};

using IterationCallback = std::function<void(const IterationStats&)>;

/// Outcome for one benign state.
struct StateOutcome {
  Vec64 x;
  Label benign_label = 0;
  bool misled = false;            // a misleading perturbation was found
  bool success = false;           // ... and its l-inf norm is within the threshold
  double best_linf = 0.0;         // +inf when nothing misled
  Vec64 best_eta;
  bool mean_misled = false;       // the distribution mean, replayed by the evaluator
  double mean_linf = 0.0;
  double sampled_success_rate = 0.0;
  double sampled_misled_rate = 0.0;
};

struct AttackReport {
  std::string attack;             // dbar-context-free | dbar-context-aware | random
  std::uint64_t seed = 0;
  double threshold = 0.0;
  bool success = false;           // context-aware: any state succeeded
  bool misled = false;
  double best_linf = 0.0;
  Vec64 best_eta;
  std::uint64_t budget = 0;
  std::uint64_t queries_used = 0;
  std::uint64_t reward_evaluations = 0;
  std::uint64_t setup_queries = 0;  // benign-label checks, outside the budget
  std::uint64_t eval_queries = 0;   // evaluator-side, outside the budget
  std::size_t iterations_run = 0;
  bool budget_exhausted = false;
  std::size_t rollbacks = 0;
  double sampled_success_rate = 0.0;
  double sampled_misled_rate = 0.0;
  std::vector<StateOutcome> states;
  std::vector<std::size_t> dropped;  // pool indices filtered as misclassified
};

struct AttackResult {
  AttackReport report;
  std::optional<GaussianPolicy> policy;
  std::vector<IterationStats> history;
};

/// Context-free attack on one benign example: N rounds of collect then
/// update in the single-state environment. `resume` replaces the freshly
/// initialized policy. Throws PreconditionError if the oracle misclassifies
/// the example, ConfigError when budget < M.
AttackResult attack_context_free(const Example& example, const Oracle& oracle, const AttackConfig& cfg,
                                 const IterationCallback& on_iteration = {},
                                 const std::optional<GaussianPolicy>& resume = std::nullopt);

/// Context-aware attack over a pool: one state-conditioned policy trained on
/// uniformly drawn states. Misclassified members are dropped (listed in the
/// report); throws PreconditionError if none remain.
AttackResult attack_context_aware(const Dataset& pool, const Oracle& oracle, const AttackConfig& cfg,
                                  const IterationCallback& on_iteration = {},
                                  const std::optional<GaussianPolicy>& resume = std::nullopt);

/// Uniform perturbations in [-tau, tau]^d until the first misleading one or
/// the budget runs out.
AttackReport baseline_random(const Example& example, const Oracle& oracle, const AttackConfig& cfg);

/// Draws n perturbations from p(.|x). Takes no oracle: generating a
/// real-time attack costs zero queries.
std::vector<Vec64> sample_perturbations(const GaussianPolicy& policy, std::span<const double> x, std::size_t n,
                                        Rng& rng);

struct PerturbationScore {
  std::size_t draws = 0;
  std::size_t misled = 0;
  std::size_t successes = 0;  // misled and within the threshold
  double success_rate() const { return draws ? static_cast<double>(successes) / draws : 0.0; }
  double misled_rate() const { return draws ? static_cast<double>(misled) / draws : 0.0; }
};

/// Evaluator-side scoring: one query per perturbation on `eval_counter`.
PerturbationScore score_perturbations(const Oracle& oracle, QueryCounter& eval_counter, std::span<const double> x,
                                      Label benign_label, const std::vector<Vec64>& perturbations,
                                      const EnvConfig& env);

struct RealtimeResult {
  std::vector<Vec64> perturbations;
  PerturbationScore score;
};

/// sample_perturbations followed by evaluator scoring.
RealtimeResult realtime_attack(const GaussianPolicy& policy, std::span<const double> x, Label benign_label,
                               std::size_t n_draws, Rng& rng, const Oracle& oracle, QueryCounter& eval_counter,
                               const EnvConfig& env);

/// Context-free defaults: M=64, K=10, L=10, eps=0.02, init_mean=0,
/// init_std=0.5, budget 20000, threshold 0.04.
AttackConfig default_attack_config();

/// Seed streams used by every attack so runs are replayable.
enum class SeedStream : std::uint64_t { PolicyInit = 1, Training = 2, Evaluation = 3, CriticInit = 4 };
Rng stream_rng(std::uint64_t seed, SeedStream stream);

}  // namespace dbar
