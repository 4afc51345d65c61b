#include "dbar/eval.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <charconv>

#include "dbar/error.hpp"

namespace dbar {

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::size_t> select_correct(const Dataset& dataset, const Oracle& oracle, std::size_t n) {
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < dataset.size() && picked.size() < n; ++i) {
    if (oracle.predict(dataset[i].x) == dataset[i].label) picked.push_back(i);
  }
  if (picked.size() < n) {
    throw InvalidArgument("requested " + std::to_string(n) + " correctly classified examples, only " +
                          std::to_string(picked.size()) + " available");
  }
  return picked;
}

AsrRow eval_asr(const Dataset& dataset, const Oracle& oracle, const AttackFn& attack, double tau, std::size_t n,
                const AsrIds& ids, std::vector<AttackReport>* reports) {
  if (n == 0) throw InvalidArgument("eval_asr needs n > 0");
  const auto picked = select_correct(dataset, oracle, n);

  AsrRow row;
  row.dataset_id = ids.dataset_id;
  row.target_id = ids.target_id;
  row.attack_id = ids.attack_id;
  row.n = n;
  row.threshold = tau;
  row.seed = ids.seed;
  row.dataset_hash = hex64(dataset.content_hash());

  double queries = 0.0, linf_sum = 0.0;
  std::size_t misled = 0;
  for (std::size_t idx : picked) {
    auto report = attack(dataset[idx], idx);
    queries += static_cast<double>(report.queries_used);
    if (report.misled) {
      ++misled;
      linf_sum += report.best_linf;
    }
    row.successes += report.misled && report.best_linf <= tau;
    if (reports) reports->push_back(std::move(report));
  }
  row.asr = static_cast<double>(row.successes) / static_cast<double>(n);
  row.mean_queries = queries / static_cast<double>(n);
  row.mean_best_linf = misled ? linf_sum / static_cast<double>(misled) : std::numeric_limits<double>::quiet_NaN();
  return row;
}

std::string asr_table_csv(const std::vector<AsrRow>& rows) {
  std::string out = "dataset,target,attack,asr,mean_queries,mean_best_linf,n,successes,threshold,seed,dataset_hash\n";
  for (const auto& r : rows) {
    out += r.dataset_id + "," + r.target_id + "," + r.attack_id + "," + num(r.asr) + "," + num(r.mean_queries) + "," +
           num(r.mean_best_linf) + "," + std::to_string(r.n) + "," + std::to_string(r.successes) + "," +
           num(r.threshold) + "," + std::to_string(r.seed) + "," + r.dataset_hash + "\n";
  }
  return out;
}

GaussianPolicy matched_noise_policy(const GaussianPolicy& policy, std::span<const double> x) {
  auto heads = policy.heads(x);
  return GaussianPolicy::constant(Vec64(policy.dim(), 0.0), std::move(heads.log_std), policy.range());
}

TransferResult eval_transfer(const std::vector<GaussianPolicy>& policies, const std::vector<Example>& examples,
                             const Oracle& dest, QueryCounter& dest_counter, std::size_t n_draws,
                             const EnvConfig& env, Rng& rng) {
  if (policies.empty()) throw InvalidArgument("eval_transfer needs at least one policy");
  if (policies.size() != 1 && policies.size() != examples.size()) {
    throw InvalidArgument("need one policy per example or a single shared policy");
  }
  for (const auto& p : policies) {
    if (p.dim() != dest.input_dim()) {
      throw InvalidArgument("policy dimension " + std::to_string(p.dim()) + " does not match destination oracle (" +
                            std::to_string(dest.input_dim()) + ")");
    }
  }
  TransferResult res;
  res.n_draws = n_draws;
  res.n = examples.size();
  const auto used_before = dest_counter.used();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& policy = policies.size() == 1 ? policies[0] : policies[i];
    const auto draws = sample_perturbations(policy, examples[i].x, n_draws, rng);
    const auto score = score_perturbations(dest, dest_counter, examples[i].x, examples[i].label, draws, env);
    res.successes += score.successes > 0;
  }
  res.asr = res.n ? static_cast<double>(res.successes) / static_cast<double>(res.n) : 0.0;
  res.dest_queries = dest_counter.used() - used_before;
  return res;
}

std::string transfer_csv(const std::vector<TransferResult>& rows) {
  std::string out = "source,dest,n,n_draws,successes,transfer_asr,dest_queries\n";
  for (const auto& r : rows) {
    out += r.source_id + "," + r.dest_id + "," + std::to_string(r.n) + "," + std::to_string(r.n_draws) + "," +
           std::to_string(r.successes) + "," + num(r.asr) + "," + std::to_string(r.dest_queries) + "\n";
  }
  return out;
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::InitStd: return "init_std";
    case SweepParam::L: return "L";
    case SweepParam::K: return "K";
  }
  return "?";
}

SweepParam sweep_param_from_string(const std::string& s) {
  if (s == "init_std" || s == "init-std") return SweepParam::InitStd;
  if (s == "L") return SweepParam::L;
  if (s == "K") return SweepParam::K;
  throw ConfigError("unknown sweep parameter '" + s + "' (init_std|L|K)");
}

AttackConfig with_sweep_value(const AttackConfig& base, SweepParam param, double value) {
  AttackConfig cfg = base;
  auto as_count = [&](const char* name) {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw ConfigError(std::string(name) + " must be a positive integer, got " + num(value));
    }
    return static_cast<std::size_t>(value);
  };
  switch (param) {
    case SweepParam::InitStd: cfg.init_std = value; break;
    case SweepParam::L: cfg.ppo.minibatch = as_count("L"); break;
    case SweepParam::K: cfg.ppo.epochs = as_count("K"); break;
  }
  return cfg;
}

SweepResult sweep(SweepParam param, const std::vector<double>& values, const AttackConfig& base,
                  const Example& example, const Oracle& oracle) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<AttackConfig> configs;
  for (double v : values) {
    configs.push_back(with_sweep_value(base, param, v));
    configs.back().validate();
  }

  SweepResult result;
  result.param = param;
  result.values = values;
  for (const auto& cfg : configs) {
    std::vector<SweepPoint> series;
    const auto start = std::chrono::steady_clock::now();
    auto on_iteration = [&](const IterationStats& st) {
      SweepPoint p;
      p.iteration = st.iteration;
      p.mean_linf = st.mean_linf;
      p.policy_mean_linf = st.policy_mean_linf;
      p.actor_updates = st.actor_updates;
      p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      series.push_back(p);
    };
    auto run = attack_context_free(example, oracle, cfg, on_iteration);
    result.series.push_back(std::move(series));
    result.reports.push_back(std::move(run.report));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "param,value,iteration,mean_linf,policy_mean_linf,seconds,actor_updates\n";
  for (std::size_t v = 0; v < result.values.size(); ++v) {
    for (const auto& p : result.series[v]) {
      out += to_string(result.param) + "," + num(result.values[v]) + "," + std::to_string(p.iteration) + "," +
             num(p.mean_linf) + "," + num(p.policy_mean_linf) + "," + num(p.seconds) + "," +
             std::to_string(p.actor_updates) + "\n";
    }
  }
  return out;
}

}  // namespace dbar
