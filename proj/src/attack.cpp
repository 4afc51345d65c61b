#include "dbar/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dbar/error.hpp"

namespace dbar {

namespace {

constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

struct TrainingOutcome {
  GaussianPolicy policy;
  std::vector<IterationStats> history;
  std::size_t iterations_run = 0;
  std::size_t rollbacks = 0;
};

double mean_policy_linf(const GaussianPolicy& policy, const AttackEnv& env) {
  double total = 0.0;
  for (std::size_t s = 0; s < env.num_states(); ++s) total += linf_norm(policy.heads(env.state(s)).mean);
  return total / static_cast<double>(env.num_states());
}

TrainingOutcome train_dbar(AttackEnv& env, PolicyMode mode, CriticMode critic_mode, const AttackConfig& cfg,
                           const IterationCallback& on_iteration, const std::optional<GaussianPolicy>& resume) {
  const std::size_t d = env.state(0).size();
  Rng init_rng = stream_rng(cfg.seed, SeedStream::PolicyInit);
  GaussianPolicy policy = [&] {
    if (!resume) {
      return init_policy(PolicyInit{.mode = mode,
                                    .d = d,
                                    .init_mean = cfg.init_mean,
                                    .init_std = cfg.init_std,
                                    .actor_hidden = cfg.actor_hidden,
                                    .activation = Activation::Tanh},
                         init_rng);
    }
    if (resume->dim() != d) throw ConfigError("resumed policy dimension does not match the data");
    return *resume;
  }();

  Rng critic_rng = stream_rng(cfg.seed, SeedStream::CriticInit);
  Critic critic = critic_mode == CriticMode::Scalar
                      ? Critic::scalar()
                      : Critic::network(d, cfg.critic_hidden, Activation::Tanh, critic_rng);

  PpoLearner learner(std::move(policy), std::move(critic), cfg.ppo);
  Rng train_rng = stream_rng(cfg.seed, SeedStream::Training);
  TrainingOutcome out{learner.policy(), {}, 0, 0};

  const std::size_t iterations = cfg.resolved_iterations();
  for (std::size_t it = 0; it < iterations; ++it) {
    if (env.counter().exhausted()) break;
    const auto buffer =
        collect_rollout(env, learner.policy(), cfg.ppo.samples_per_iter, train_rng, cfg.ppo.workers);
    if (buffer.empty()) break;
    ++out.iterations_run;

    UpdateStats upd;
    if (buffer.size() >= cfg.ppo.minibatch) upd = learner.update(buffer, train_rng);
    out.rollbacks += upd.rolled_back;

    IterationStats st;
    st.iteration = it + 1;
    st.samples = buffer.size();
    std::size_t misled = 0;
    for (const auto& rec : buffer.records) {
      st.mean_reward += rec.r;
      st.mean_linf += rec.linf;
      misled += rec.misled;
    }
    const double n = static_cast<double>(buffer.size());
    st.mean_reward /= n;
    st.mean_linf /= n;
    st.success_rate_in_batch = static_cast<double>(misled) / n;
    st.clip_fraction = upd.clip_fraction;
    st.mean_ratio = upd.mean_ratio;
    st.actor_objective = upd.actor_objective;
    st.critic_loss = upd.critic_loss;
    st.actor_updates = upd.actor_updates;
    st.critic_updates = upd.critic_updates;
    st.queries_used = env.counter().used();
    st.rolled_back = upd.rolled_back;
    st.policy_mean_linf = mean_policy_linf(learner.policy(), env);
    out.history.push_back(st);
    if (on_iteration) on_iteration(st);
    if (buffer.truncated) break;
  }
  out.policy = learner.policy();
  return out;
}

// Folds best-so-far into per-state outcomes and, when a policy is given,
// replays the trained distribution through a separate evaluator counter.
void summarize(const AttackEnv& env, const GaussianPolicy* policy, const AttackConfig& cfg, AttackReport& report) {
  Rng eval_rng = stream_rng(cfg.seed, SeedStream::Evaluation);
  QueryCounter eval_counter(kUnlimited);
  const auto& ecfg = env.config();

  report.threshold = ecfg.success_threshold;
  report.best_linf = std::numeric_limits<double>::infinity();
  report.states.clear();
  double success_rate_sum = 0.0, misled_rate_sum = 0.0;
  for (std::size_t s = 0; s < env.num_states(); ++s) {
    StateOutcome o;
    o.x = env.state(s);
    o.benign_label = env.benign_label(s);
    const auto& best = env.best(s);
    o.misled = best.found;
    o.best_linf = best.linf;
    o.best_eta = best.eta;
    o.success = best.found && best.linf <= ecfg.success_threshold;
    report.success = report.success || o.success;
    report.misled = report.misled || o.misled;
    if (best.found && best.linf < report.best_linf) {
      report.best_linf = best.linf;
      report.best_eta = best.eta;
    }

    if (policy) {
      const auto mean = policy->heads(o.x).mean;
      const auto mean_score = score_perturbations(env.oracle(), eval_counter, o.x, o.benign_label, {mean}, ecfg);
      o.mean_misled = mean_score.misled == 1;
      o.mean_linf = linf_norm(mean);
      if (cfg.eval_draws > 0) {
        const auto draws = sample_perturbations(*policy, o.x, cfg.eval_draws, eval_rng);
        const auto score = score_perturbations(env.oracle(), eval_counter, o.x, o.benign_label, draws, ecfg);
        o.sampled_success_rate = score.success_rate();
        o.sampled_misled_rate = score.misled_rate();
      }
    }
    success_rate_sum += o.sampled_success_rate;
    misled_rate_sum += o.sampled_misled_rate;
    report.states.push_back(std::move(o));
  }
  const double n = static_cast<double>(env.num_states());
  report.sampled_success_rate = success_rate_sum / n;
  report.sampled_misled_rate = misled_rate_sum / n;
  report.eval_queries = eval_counter.used();
  report.queries_used = env.counter().used();
  report.reward_evaluations = env.reward_evaluations();
  report.budget = env.counter().budget();
  report.budget_exhausted = env.counter().exhausted();
}

AttackResult run_dbar(AttackEnv& env, std::string name, PolicyMode mode, CriticMode critic_mode,
                      const AttackConfig& cfg, const IterationCallback& on_iteration,
                      const std::optional<GaussianPolicy>& resume, const QueryCounter& setup_counter) {
  auto trained = train_dbar(env, mode, critic_mode, cfg, on_iteration, resume);
  AttackResult result;
  result.report.attack = std::move(name);
  result.report.seed = cfg.seed;
  result.report.iterations_run = trained.iterations_run;
  result.report.rollbacks = trained.rollbacks;
  result.report.setup_queries = setup_counter.used();
  summarize(env, &trained.policy, cfg, result.report);
  result.policy = std::move(trained.policy);
  result.history = std::move(trained.history);
  return result;
}

}  // namespace

void AttackConfig::validate() const {
  ppo.validate();
  env.validate();
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
  if (budget < ppo.samples_per_iter) {
    throw ConfigError("budget >= M violated: budget = " + std::to_string(budget) +
                      ", M = " + std::to_string(ppo.samples_per_iter));
  }
}

std::size_t AttackConfig::resolved_iterations() const {
  return iterations > 0 ? iterations : static_cast<std::size_t>(budget / ppo.samples_per_iter);
}

AttackConfig default_attack_config() { return AttackConfig{}; }

Rng stream_rng(std::uint64_t seed, SeedStream stream) {
  return Rng(seed).split(static_cast<std::uint64_t>(stream));
}

AttackResult attack_context_free(const Example& example, const Oracle& oracle, const AttackConfig& cfg,
                                 const IterationCallback& on_iteration, const std::optional<GaussianPolicy>& resume) {
  cfg.validate();
  QueryCounter counter(cfg.budget);
  QueryCounter setup(kUnlimited);
  auto env = AttackEnv::context_free(example, oracle, counter, setup, cfg.env);
  return run_dbar(env, "dbar-context-free", cfg.policy_mode.value_or(PolicyMode::Constant),
                  cfg.critic_mode.value_or(CriticMode::Scalar), cfg, on_iteration, resume, setup);
}

AttackResult attack_context_aware(const Dataset& pool, const Oracle& oracle, const AttackConfig& cfg,
                                  const IterationCallback& on_iteration, const std::optional<GaussianPolicy>& resume) {
  cfg.validate();
  QueryCounter counter(cfg.budget);
  QueryCounter setup(kUnlimited);
  std::vector<std::size_t> dropped;
  auto env = AttackEnv::context_aware(pool, oracle, counter, setup, cfg.env, &dropped);
  auto result = run_dbar(env, "dbar-context-aware", cfg.policy_mode.value_or(PolicyMode::Conditioned),
                         cfg.critic_mode.value_or(CriticMode::Network), cfg, on_iteration, resume, setup);
  result.report.dropped = std::move(dropped);
  return result;
}

AttackReport baseline_random(const Example& example, const Oracle& oracle, const AttackConfig& cfg) {
  cfg.env.validate();
  QueryCounter counter(cfg.budget);
  QueryCounter setup(kUnlimited);
  auto env = AttackEnv::context_free(example, oracle, counter, setup, cfg.env);
  const double tau = cfg.env.success_threshold;
  Rng rng = stream_rng(cfg.seed, SeedStream::Training);
  const std::size_t d = example.x.size();

  AttackReport report;
  report.attack = "random";
  report.seed = cfg.seed;
  report.setup_queries = setup.used();
  Vec64 eta(d);
  while (!counter.exhausted()) {
    for (auto& e : eta) e = rng.uniform(-tau, tau);
    if (env.reward(0, eta).success) break;
  }
  report.iterations_run = static_cast<std::size_t>(env.reward_evaluations());
  summarize(env, nullptr, cfg, report);
  return report;
}

std::vector<Vec64> sample_perturbations(const GaussianPolicy& policy, std::span<const double> x, std::size_t n,
                                        Rng& rng) {
  std::vector<Vec64> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(policy.sample(x, rng).eta);
  return out;
}

PerturbationScore score_perturbations(const Oracle& oracle, QueryCounter& eval_counter, std::span<const double> x,
                                      Label benign_label, const std::vector<Vec64>& perturbations,
                                      const EnvConfig& env) {
  PerturbationScore score;
  for (const auto& eta : perturbations) {
    auto q = add(x, eta);
    if (env.domain == DomainMode::UnitBox) q = clamp_box(q, 0.0, 1.0);
    const Label label = predict_counted(oracle, eval_counter, q);
    const bool misled = env.target ? label == *env.target : label != benign_label;
    ++score.draws;
    score.misled += misled;
    score.successes += misled && linf_norm(eta) <= env.success_threshold;
  }
  return score;
}

RealtimeResult realtime_attack(const GaussianPolicy& policy, std::span<const double> x, Label benign_label,
                               std::size_t n_draws, Rng& rng, const Oracle& oracle, QueryCounter& eval_counter,
                               const EnvConfig& env) {
  RealtimeResult res;
  res.perturbations = sample_perturbations(policy, x, n_draws, rng);
  res.score = score_perturbations(oracle, eval_counter, x, benign_label, res.perturbations, env);
  return res;
}

}  // namespace dbar
