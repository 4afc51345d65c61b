#pragma once

#include <atomic>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dbar/dataset.hpp"
#include "dbar/oracle.hpp"

namespace dbar {

inline constexpr double kImageThreshold = 0.04;       // 10/255 l-inf ball for [0,1] images
inline constexpr double kTimeSeriesThreshold = 0.1;

struct EnvConfig {
  /// Targeted attacks count a query as misleading only when it hits this label.
  std::optional<Label> target;
  DomainMode domain = DomainMode::UnitBox;
  double norm_floor = 1e-8;
  double success_threshold = kImageThreshold;
  /// Weight on the success indicator; 1 gives the plain reward.
  double alpha = 1.0;

  /// Throws ConfigError on a non-positive threshold/floor or alpha < 1.
  void validate() const;
};

struct StepResult {
  double reward = 0.0;
  bool success = false;  // the oracle was misled (no threshold applied)
  double linf = 0.0;     // of the proposed, unclamped perturbation
  Label label = 0;
};

/// Smallest misleading perturbation seen for one state.
struct BestPerturbation {
  bool found = false;
  Vec64 eta;
  double linf = std::numeric_limits<double>::infinity();
};

/// r = (2 * alpha * misled - 1) / max(||eta||_inf, norm_floor)
double reward_value(bool misled, double linf, double norm_floor, double alpha = 1.0);

/// Attack environment. Context-free has a single state (the benign example);
/// context-aware draws the next state uniformly from a pool, independent of
/// the current state and action. Benign labels are queried once at
/// construction and charged to `setup_counter`, never to the attack budget.
class AttackEnv {
 public:
  /// Throws PreconditionError when the oracle does not assign benign.label
  /// (or, for targeted attacks, already outputs the target).
  static AttackEnv context_free(const Example& benign, const Oracle& oracle, QueryCounter& attack_counter,
                                QueryCounter& setup_counter, EnvConfig cfg);

  /// Keeps pool members the oracle classifies correctly; `dropped` receives
  /// the indices that were filtered. Throws PreconditionError if none remain.
  static AttackEnv context_aware(const Dataset& pool, const Oracle& oracle, QueryCounter& attack_counter,
                                 QueryCounter& setup_counter, EnvConfig cfg,
                                 std::vector<std::size_t>* dropped = nullptr);

  bool context_aware() const { return context_aware_; }
  std::size_t num_states() const { return states_.size(); }
  const Vec64& state(std::size_t i) const { return states_.at(i).x; }
  Label benign_label(std::size_t i) const { return states_.at(i).label; }
  const EnvConfig& config() const { return cfg_; }
  const QueryCounter& counter() const { return *counter_; }
  const Oracle& oracle() const { return *oracle_; }

  /// Context-free: always state 0, no randomness consumed. Context-aware: a
  /// uniform draw over the pool.
  std::size_t next_state(Rng& rng) const;

  /// The input actually submitted: x + eta, clamped to [0,1]^d in UnitBox mode.
  Vec64 query_point(std::size_t state, std::span<const double> eta) const;

  /// One oracle query without touching best-so-far; safe to call concurrently.
  /// Throws BudgetExceeded when the attack budget is spent.
  StepResult evaluate(std::size_t state, std::span<const double> eta, double alpha) const;
  /// Merges a step into the best-so-far table (single writer).
  void record(std::size_t state, std::span<const double> eta, const StepResult& step);

  StepResult reward(std::size_t state, std::span<const double> eta);
  StepResult reward_generalized(std::size_t state, std::span<const double> eta, double alpha);

  const BestPerturbation& best(std::size_t state) const { return best_.at(state); }
  std::uint64_t reward_evaluations() const { return evaluations_->load(); }

 private:
  AttackEnv(const Oracle& oracle, QueryCounter& counter, EnvConfig cfg);
  bool misled(std::size_t state, Label label) const;

  const Oracle* oracle_;
  QueryCounter* counter_;
  EnvConfig cfg_;
  bool context_aware_ = false;
  std::vector<Example> states_;  // x with the oracle's benign label
  std::vector<BestPerturbation> best_;
  std::unique_ptr<std::atomic<std::uint64_t>> evaluations_;
};

}  // namespace dbar
