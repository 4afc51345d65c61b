#include "dbar/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dbar/error.hpp"

namespace dbar {

QueryCounter::QueryCounter(std::uint64_t budget) : budget_(budget) {
  if (budget == 0) throw InvalidArgument("query budget must be positive");
}

bool QueryCounter::try_acquire() {
  auto cur = used_.load(std::memory_order_relaxed);
  while (cur < budget_) {
    if (used_.compare_exchange_weak(cur, cur + 1, std::memory_order_acq_rel)) return true;
  }
  return false;
}

void QueryCounter::acquire() {
  if (!try_acquire()) throw BudgetExceeded("query budget of " + std::to_string(budget_) + " exhausted");
}

Label predict_counted(const Oracle& oracle, QueryCounter& counter, std::span<const double> x) {
  if (x.size() != oracle.input_dim()) {
    throw InvalidArgument("query has length " + std::to_string(x.size()) + ", oracle expects " +
                          std::to_string(oracle.input_dim()));
  }
  counter.acquire();
  return oracle.predict(x);
}

MlpTarget::MlpTarget(Mlp net, double train_accuracy) : net_(std::move(net)), train_accuracy_(train_accuracy) {}

Label MlpTarget::predict(std::span<const double> x) const {
  const auto scores = net_.forward(x);
  return static_cast<Label>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

double accuracy(const Oracle& oracle, const Dataset& dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : dataset.examples()) hits += oracle.predict(ex.x) == ex.label;
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

MlpTarget train_target(const Dataset& dataset, const std::vector<std::size_t>& layers, std::size_t epochs,
                       double lr, Rng& rng, TrainOptions options) {
  if (dataset.empty()) throw InvalidArgument("cannot train a target on an empty dataset");
  if (layers.size() < 2 || layers.front() != dataset.dim() || layers.back() != dataset.num_classes()) {
    throw InvalidArgument("target layers must start at d and end at m");
  }
  if (!(lr > 0.0) || options.batch_size == 0) throw InvalidArgument("lr and batch size must be positive");

  Mlp net = Mlp::glorot(layers, options.activation, rng);
  AdamState adam(net.num_params(), AdamConfig{.lr = lr});
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t m = dataset.num_classes();

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      auto grad = Gradients::zeros_like(net);
      Vec64 upstream(m);
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = dataset[order[k]];
        const auto z = net.forward(ex.x);
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double zi : z) denom += std::exp(zi - zmax);
        const double log_denom = std::log(denom) + zmax;
        epoch_loss += log_denom - z[ex.label];
        for (std::size_t c = 0; c < m; ++c) {
          upstream[c] = (std::exp(z[c] - log_denom) - (c == ex.label ? 1.0 : 0.0)) * inv_batch;
        }
        backward_accumulate(net, ex.x, upstream, grad.values);
      }
      if (!std::isfinite(epoch_loss) || !all_finite(grad.values)) {
        throw TrainingDiverged("target training diverged in epoch " + std::to_string(epoch));
      }
      adam_step(net, grad, adam);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || epoch_loss > kDivergedLoss || !all_finite(net.params())) {
      throw TrainingDiverged("target training diverged in epoch " + std::to_string(epoch) +
                             " (mean loss " + std::to_string(epoch_loss) + ")");
    }
  }
  MlpTarget target(std::move(net));
  return MlpTarget(target.net(), accuracy(target, dataset));
}

}  // namespace dbar
