#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "dbar/dataset.hpp"
#include "dbar/nn.hpp"
#include "dbar/tensor.hpp"

namespace dbar {

inline constexpr std::uint64_t kDefaultBudget = 20000;

/// Label-only classifier M: R^d -> [m]. predict must be deterministic for a
/// fixed input and safe to call concurrently. Nothing else about the model is
/// visible to an attack.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Label predict(std::span<const double> x) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
};

/// Atomic query accountant. used never exceeds budget: the check and the
/// increment are one compare-exchange, so concurrent callers cannot overshoot.
class QueryCounter {
 public:
  explicit QueryCounter(std::uint64_t budget = kDefaultBudget);

  QueryCounter(const QueryCounter&) = delete;
  QueryCounter& operator=(const QueryCounter&) = delete;

  /// Reserves one query; false once the budget is spent.
  bool try_acquire();
  /// Reserves one query or throws BudgetExceeded.
  void acquire();

  std::uint64_t used() const { return used_.load(std::memory_order_acquire); }
  std::uint64_t budget() const { return budget_; }
  std::uint64_t remaining() const { return budget_ - used(); }
  bool exhausted() const { return used() >= budget_; }

 private:
  std::atomic<std::uint64_t> used_{0};
  std::uint64_t budget_;
};

/// One logical query: validates the dimension, charges exactly one unit to
/// `counter`, then asks the oracle.
Label predict_counted(const Oracle& oracle, QueryCounter& counter, std::span<const double> x);

/// In-process MLP classifier; the label is the argmax of the output scores
/// (lowest index wins ties).
class MlpTarget final : public Oracle {
 public:
  explicit MlpTarget(Mlp net, double train_accuracy = 0.0);

  Label predict(std::span<const double> x) const override;
  std::size_t input_dim() const override { return net_.input_dim(); }
  std::size_t num_classes() const override { return net_.output_dim(); }

  const Mlp& net() const { return net_; }
  double train_accuracy() const { return train_accuracy_; }

 private:
  Mlp net_;
  double train_accuracy_;
};

struct TrainOptions {
  std::size_t batch_size = 32;
  Activation activation = Activation::ReLU;
};

/// Fits an MlpTarget with softmax cross-entropy and Adam on shuffled
/// minibatches. layers.front() must equal d and layers.back() must equal m.
/// Throws TrainingDiverged when the loss becomes non-finite or blows past
/// kDivergedLoss.
MlpTarget train_target(const Dataset& dataset, const std::vector<std::size_t>& layers, std::size_t epochs,
                       double lr, Rng& rng, TrainOptions options = {});

inline constexpr double kDivergedLoss = 1e6;

/// Fraction of examples the oracle labels correctly (uncounted; for training diagnostics).
double accuracy(const Oracle& oracle, const Dataset& dataset);

}  // namespace dbar
