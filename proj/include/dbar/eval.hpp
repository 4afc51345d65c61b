#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dbar/attack.hpp"
#include "dbar/dataset.hpp"

namespace dbar {

struct AsrRow {
  std::string dataset_id;
  std::string target_id;
  std::string attack_id;
  double asr = 0.0;             // successes / n, exactly
  double mean_queries = 0.0;
  double mean_best_linf = 0.0;  // over examples where something misled; NaN if none did
  std::size_t n = 0;
  std::size_t successes = 0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_hash;
};

/// Runs one attack on one example; `index` is the example's dataset index.
using AttackFn = std::function<AttackReport(const Example& example, std::size_t index)>;

/// Indices of the first n examples the oracle labels correctly. Throws
/// InvalidArgument stating the available count when fewer exist.
std::vector<std::size_t> select_correct(const Dataset& dataset, const Oracle& oracle, std::size_t n);

struct AsrIds {
  std::string dataset_id = "data";
  std::string target_id = "target";
  std::string attack_id = "attack";
  std::uint64_t seed = 0;
};

/// Attacks n correctly classified examples independently. An example counts
/// as a success when its best perturbation misleads the oracle and has
/// ||eta||_inf <= tau. `reports` (optional) receives every per-example report.
AsrRow eval_asr(const Dataset& dataset, const Oracle& oracle, const AttackFn& attack, double tau, std::size_t n,
                const AsrIds& ids, std::vector<AttackReport>* reports = nullptr);

std::string asr_table_csv(const std::vector<AsrRow>& rows);

struct TransferResult {
  std::string source_id;
  std::string dest_id;
  std::size_t n_draws = 0;
  std::size_t n = 0;
  std::size_t successes = 0;
  double asr = 0.0;  // share of examples with at least one qualifying draw
  std::uint64_t dest_queries = 0;
};

/// Applies n_draws perturbations per example, sampled from the matching
/// policy (or the single shared policy), to the destination oracle. Charges
/// exactly examples.size() * n_draws queries to `dest_counter` and none to
/// any source oracle. Throws InvalidArgument on a dimension mismatch.
TransferResult eval_transfer(const std::vector<GaussianPolicy>& policies, const std::vector<Example>& examples,
                             const Oracle& dest, QueryCounter& dest_counter, std::size_t n_draws,
                             const EnvConfig& env, Rng& rng);

/// Zero-mean Constant policy with the same per-coordinate std as `policy` at x.
GaussianPolicy matched_noise_policy(const GaussianPolicy& policy, std::span<const double> x);

std::string transfer_csv(const std::vector<TransferResult>& rows);

enum class SweepParam { InitStd, L, K };

std::string to_string(SweepParam p);
SweepParam sweep_param_from_string(const std::string& s);

struct SweepPoint {
  std::size_t iteration = 0;
  double mean_linf = 0.0;         // mean ||eta||_inf of the batch
  double policy_mean_linf = 0.0;  // ||mean(x)||_inf after the update
  double seconds = 0.0;           // monotonic clock, cumulative within the run
  std::size_t actor_updates = 0;
};

struct SweepResult {
  SweepParam param = SweepParam::InitStd;
  std::vector<double> values;
  std::vector<std::vector<SweepPoint>> series;
  std::vector<AttackReport> reports;
};

/// Applies `value` to the swept field of `base`.
AttackConfig with_sweep_value(const AttackConfig& base, SweepParam param, double value);

/// One context-free run per value on the same example. Every value is
/// validated before the first run; violations raise ConfigError.
SweepResult sweep(SweepParam param, const std::vector<double>& values, const AttackConfig& base,
                  const Example& example, const Oracle& oracle);

std::string sweep_csv(const SweepResult& result);

}  // namespace dbar
