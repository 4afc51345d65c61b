// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dbar/attack.hpp"
#include "dbar/datagen.hpp"
#include "dbar/eval.hpp"
#include "dbar/http.hpp"
#include "dbar/nn.hpp"
#include "dbar/ppo.hpp"
#include "dbar/serialize.hpp"
#include "support.hpp"

using namespace dbar;

namespace {

namespace fs = std::filesystem;

// Pinned tolerances and limits.
constexpr double kRewardTol = 1e-12;
constexpr double kLogDensityTol = 1e-9;
constexpr double kHeadGradTol = 1e-6;
constexpr double kBackpropTol = 1e-4;
constexpr double kRatioTol = 1e-12;
constexpr std::uint64_t kBudgetCap = 20000;
constexpr double kBlobTau = 0.35355339059327373;  // half the centroid distance, sqrt(0.5) / 2
constexpr std::uint64_t kContextAwareSeed = 2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every attack report produced by criteria 6 to 9 passes through here.
struct BudgetAudit {
  std::size_t runs = 0;
  std::size_t violations = 0;
  std::uint64_t max_queries = 0;

  void add(const AttackReport& r) {
    ++runs;
    max_queries = std::max(max_queries, r.queries_used);
    if (r.queries_used != r.reward_evaluations || r.queries_used > kBudgetCap) ++violations;
  }
};

BudgetAudit g_audit;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Label 0 on the benign point itself; elsewhere 1 when `flip` is set.
class FlipOracle final : public Oracle {
 public:
  FlipOracle(Vec64 benign, bool flip) : benign_(std::move(benign)), flip_(flip) {}
  Label predict(std::span<const double> x) const override {
    return flip_ && !std::equal(x.begin(), x.end(), benign_.begin()) ? 1u : 0u;
  }
  std::size_t input_dim() const override { return benign_.size(); }
  std::size_t num_classes() const override { return 2; }

 private:
  Vec64 benign_;
  bool flip_;
};

Outcome reward_exactness() {
  struct Case {
    bool misled;
    double linf;
    double expected;
  };
  // expected = (2 * misled - 1) / max(linf, 1e-8), worked by hand
  const std::vector<Case> table{
      {true, 0.5, 2.0},      {false, 0.5, -2.0},  {true, 0.04, 25.0},   {false, 0.04, -25.0},
      {true, 1.0, 1.0},      {false, 1.0, -1.0},  {true, 0.1, 10.0},    {false, 0.1, -10.0},
      {true, 0.25, 4.0},     {false, 0.25, -4.0}, {true, 2.0, 0.5},     {false, 2.0, -0.5},
      {true, 0.2, 5.0},      {false, 0.01, -100}, {true, 0.125, 8.0},   {false, 4.0, -0.25},
      {true, 0.8, 1.25},     {true, 1e-9, 1e8},   {false, 1e-10, -1e8}, {true, 0.0625, 16.0},
  };
  std::size_t bad = 0;
  double worst = 0.0;
  for (const auto& c : table) {
    const Vec64 x{0.3, 0.6};
    FlipOracle oracle(x, c.misled);
    QueryCounter counter(10), setup(10);
    auto env = AttackEnv::context_free(Example{x, 0}, oracle, counter, setup, EnvConfig{});
    const Vec64 eta{c.linf, -0.5 * c.linf};
    const auto step = env.reward(0, eta);
    const double err = test::rel_err(step.reward, c.expected, 1.0);
    worst = std::max(worst, err);
    bad += err > kRewardTol || step.success != c.misled;
  }
  return {bad == 0, fmt("%zu cases, worst rel err %.2e", table.size(), worst)};
}

Outcome log_density_and_gradients() {
  Rng rng(2024);
  double worst_lp = 0.0, worst_grad = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + rng.uniform_index(4);
    Vec64 mu(d), ls(d), eta(d);
    double expected = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      mu[i] = rng.uniform(-2, 2);
      ls[i] = rng.uniform(-2, 1);
      eta[i] = mu[i] + std::exp(ls[i]) * rng.uniform(-3, 3);
      expected += test::normal_logpdf(eta[i], mu[i], std::exp(ls[i]));
    }
    const auto p = GaussianPolicy::constant(mu, ls);
    const Vec64 x(d, 0.0);
    worst_lp = std::max(worst_lp, test::rel_err(p.log_density(x, eta), expected, 1.0));

    const auto g = p.logp_head_gradients(x, eta);
    // Five-point central stencil.
    const double h = 1e-3;
    for (std::size_t i = 0; i < d; ++i) {
      for (bool wrt_mean : {true, false}) {
        auto at = [&](double step) {
          Vec64 m = mu, l = ls;
          (wrt_mean ? m : l)[i] += step;
          return diag_gaussian_log_density(m, l, eta);
        };
        const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        const double analytic = wrt_mean ? g.d_mean[i] : g.d_log_std[i];
        worst_grad = std::max(worst_grad, test::rel_err(analytic, fd, 1e-4));
      }
    }
  }
  return {worst_lp <= kLogDensityTol && worst_grad <= kHeadGradTol,
          fmt("1000 cases, log-density err %.2e, head-gradient rel err %.2e", worst_lp, worst_grad)};
}

Outcome backprop() {
  Rng rng(7);
  const std::vector<std::vector<std::size_t>> shapes{{2, 16, 2}, {3, 8, 2}, {2, 32, 32, 2}, {4, 12, 6, 3}, {1, 5, 1}};
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto& dims = shapes[t % shapes.size()];
    auto net = Mlp::glorot(dims, t % 2 ? Activation::ReLU : Activation::Tanh, rng);
    for (auto& w : net.params()) w += rng.uniform(-0.1, 0.1);
    Vec64 x(dims.front()), up(dims.back());
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : up) v = rng.uniform(-1, 1);
    const auto g = backward(net, x, up);
    auto f = [&] {
      const auto y = net.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    const double h = 1e-5;
    for (std::size_t k = 0; k < net.num_params(); ++k) {
      const double orig = net.params()[k];
      net.params()[k] = orig + h;
      const double fp = f();
      net.params()[k] = orig - h;
      const double fm = f();
      net.params()[k] = orig;
      worst = std::max(worst, test::rel_err(g.values[k], (fp - fm) / (2 * h), 1e-6));
    }
  }
  return {worst <= kBackpropTol, fmt("100 nets, worst rel err %.2e", worst)};
}

Outcome ratio_identities() {
  test::StepOracle oracle;
  QueryCounter counter(1000), setup(10);
  auto env = AttackEnv::context_free(Example{{0.3}, 0}, oracle, counter, setup, EnvConfig{});
  Rng rng(11);
  const auto policy = GaussianPolicy::constant(Vec64{0.1}, Vec64{std::log(0.5)});
  const auto buf = collect_rollout(env, policy, 640, rng);
  double worst_ratio = 0.0;
  for (const auto& rec : buf.records) worst_ratio = std::max(worst_ratio, std::abs(ratio(policy, rec) - 1.0));

  std::size_t clip_bad = 0, form_bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const double w = rng.uniform(0, 4), eps = rng.uniform(1e-3, 0.9), a = rng.uniform(0, 100);
    const double c = clip_term(w, eps);
    clip_bad += c < 1.0 - eps || c > 1.0 + eps;
    form_bad += actor_objective(w, a, eps, SurrogateForm::ClippedRatio) !=
                actor_objective(w, a, eps, SurrogateForm::StandardPPO);
  }
  return {worst_ratio <= kRatioTol && clip_bad == 0 && form_bad == 0,
          fmt("max |w-1| %.2e over %zu records, clip violations %zu, form mismatches %zu / 10000", worst_ratio,
              buf.size(), clip_bad, form_bad)};
}

Outcome update_counts() {
  test::StepOracle oracle;
  QueryCounter counter(1000), setup(10);
  auto env = AttackEnv::context_free(Example{{0.3}, 0}, oracle, counter, setup, EnvConfig{});
  Rng rng(12);
  const auto policy = GaussianPolicy::constant(Vec64{0.0}, Vec64{std::log(0.5)});
  const auto buf = collect_rollout(env, policy, 64, rng);
  PpoLearner learner(policy, Critic::scalar(), PpoConfig{});
  const auto s = learner.update(buf, rng);
  return {s.actor_updates == 60 && s.critic_updates == 60 && !s.rolled_back,
          fmt("actor %zu, critic %zu", s.actor_updates, s.critic_updates)};
}

Outcome toy_convergence() {
  test::StepOracle oracle;
  std::size_t successes = 0, below_bound = 0, in_range = 0;
  double lo = INFINITY, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cfg = default_attack_config();
    cfg.budget = 5000;
    cfg.seed = seed;
    cfg.env.success_threshold = 0.25;
    const auto r = attack_context_free(Example{{0.3}, 0}, oracle, cfg).report;
    g_audit.add(r);
    successes += r.success;
    if (r.misled) {
      below_bound += r.best_linf < 0.2;
      lo = std::min(lo, r.best_linf);
      hi = std::max(hi, r.best_linf);
    }
    in_range += r.success && r.best_linf >= 0.2 && r.best_linf <= 0.25;
  }
  return {in_range >= 9 && below_bound == 0,
          fmt("%zu/10 succeed, %zu with best_linf in [0.2, 0.25], range [%.4f, %.4f]", successes, in_range, lo, hi)};
}

struct Blobs {
  Dataset data;
  MlpTarget target;
};

const Blobs& blobs() {
  static const Blobs b = [] {
    Rng drng(1);
    auto ds = generate_dataset(DataKind::Blobs2d, 400, default_noise(DataKind::Blobs2d), drng);
    Rng trng(2);
    auto target = train_target(ds, {2, 16, 2}, 50, 1e-2, trng);
    return Blobs{std::move(ds), std::move(target)};
  }();
  return b;
}

AttackConfig blob_config() {
  auto cfg = default_attack_config();
  cfg.env.success_threshold = kBlobTau;
  return cfg;
}

Outcome protocol_replica() {
  const auto& b = blobs();
  const double acc = accuracy(b.target, b.data);
  const auto cfg = blob_config();
  auto run = [&](bool dbar_attack) {
    return eval_asr(b.data, b.target,
                    [&](const Example& ex, std::size_t idx) {
                      auto c = cfg;
                      c.seed = idx;
                      auto r = dbar_attack ? attack_context_free(ex, b.target, c).report : baseline_random(ex, b.target, c);
                      g_audit.add(r);
                      return r;
                    },
                    kBlobTau, 50, AsrIds{});
  };
  const auto dbar_row = run(true);
  const auto random_row = run(false);
  return {acc >= 0.99 && dbar_row.asr >= random_row.asr && dbar_row.asr >= 0.9,
          fmt("accuracy %.4f, DBAR ASR %.2f (mean best_linf %.4f), random ASR %.2f (mean best_linf %.4f), %s", acc,
              dbar_row.asr, dbar_row.mean_best_linf, random_row.asr, random_row.mean_best_linf,
              dbar_row.asr > random_row.asr ? "strictly ahead" : "tied")};
}

Outcome zero_query_realtime() {
  const auto& b = blobs();
  const auto& all = b.data.examples();
  const Dataset pool(std::vector<Example>(all.begin(), all.begin() + 200), 2, 2, DomainMode::UnitBox);
  auto cfg = blob_config();
  cfg.seed = kContextAwareSeed;
  cfg.ppo.form = SurrogateForm::StandardPPO;
  const auto trained = attack_context_aware(pool, b.target, cfg);
  g_audit.add(trained.report);

  test::SentinelOracle sentinel(b.target);
  QueryCounter eval_counter(1000000);
  Rng rng = stream_rng(cfg.seed, SeedStream::Evaluation);
  std::size_t attacker_queries = 0, held_out = 0;
  double rate_sum = 0.0;
  for (std::size_t i = 200; i < all.size(); ++i) {
    if (b.target.predict(all[i].x) != all[i].label) continue;
    const auto before = sentinel.predicts.load();
    const auto draws = sample_perturbations(*trained.policy, all[i].x, 100, rng);
    attacker_queries += sentinel.predicts.load() - before;
    rate_sum += score_perturbations(sentinel, eval_counter, all[i].x, all[i].label, draws, cfg.env).success_rate();
    ++held_out;
  }
  const double rate = rate_sum / static_cast<double>(held_out);
  return {attacker_queries == 0 && eval_counter.used() == 100 * held_out && rate >= 0.5,
          fmt("attacker queries %zu, held-out %zu, sampled success %.3f (training queries %llu)", attacker_queries,
              held_out, rate, static_cast<unsigned long long>(trained.report.queries_used))};
}

Outcome transfer_ordering() {
  const auto& b = blobs();
  Rng trng(3);
  const auto dest = train_target(b.data, {2, 32, 32, 2}, 50, 1e-2, trng);
  std::vector<Example> examples;
  for (const auto& ex : b.data.examples()) {
    if (examples.size() == 50) break;
    if (b.target.predict(ex.x) == ex.label && dest.predict(ex.x) == ex.label) examples.push_back(ex);
  }
  const auto cfg = blob_config();
  std::vector<GaussianPolicy> policies, noise;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto c = cfg;
    c.seed = i;
    auto r = attack_context_free(examples[i], b.target, c);
    g_audit.add(r.report);
    noise.push_back(matched_noise_policy(*r.policy, examples[i].x));
    policies.push_back(std::move(*r.policy));
  }
  QueryCounter dbar_counter(1000000), noise_counter(1000000);
  Rng r1(5), r2(5);
  const auto dbar_res = eval_transfer(policies, examples, dest, dbar_counter, 10, cfg.env, r1);
  const auto noise_res = eval_transfer(noise, examples, dest, noise_counter, 10, cfg.env, r2);
  return {examples.size() == 50 && dbar_res.asr > noise_res.asr && dbar_res.dest_queries == 500,
          fmt("%zu examples x 10 draws, DBAR transfer ASR %.2f vs matched noise %.2f", examples.size(), dbar_res.asr,
              noise_res.asr)};
}

Outcome budget_law() {
  return {g_audit.runs > 0 && g_audit.violations == 0,
          fmt("%zu runs audited, %zu violations, max queries_used %llu", g_audit.runs, g_audit.violations,
              static_cast<unsigned long long>(g_audit.max_queries))};
}

Outcome http_loopback() {
  auto target = std::make_shared<MlpTarget>(blobs().target);
  PredictServer server(target);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  std::size_t agree = 0;
  {
    HttpOracle remote("http://127.0.0.1:" + std::to_string(port));
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
      const Vec64 x{rng.uniform01(), rng.uniform01()};
      agree += remote.predict(x) == target->predict(x);
    }
  }
  server.stop();
  return {agree == 100, fmt("%zu/100 labels agree", agree)};
}

Outcome reproducibility() {
  const auto dir = fs::temp_directory_path() / "dbar_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  auto cli = [](std::vector<std::string> args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    if (out) *out = o.str();
    return code;
  };

  if (cli({"gen-data", "--kind", "blobs2d", "--n", "200", "--seed", "1", "--out", path("blobs.csv")}) != kExitOk ||
      cli({"train-target", "--data", path("blobs.csv"), "--out", path("a.json"), "--seed", "2"}) != kExitOk ||
      cli({"train-target", "--data", path("blobs.csv"), "--out", path("b.json"), "--layers", "2,32,32,2", "--seed",
           "3"}) != kExitOk) {
    return {false, "fixture commands failed"};
  }

  const std::string data = path("blobs.csv"), a = path("a.json"), b = path("b.json");
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"attack", {"attack", "--data", data, "--model", a, "--index", "4", "--budget", "1280", "--threshold", "0.35",
                  "--log-iterations", "--policy-out", "@policy"}},
      {"attack-batch", {"attack", "--mode", "random", "--data", data, "--model", a, "--count", "5", "--threshold",
                        "0.35"}},
      {"attack-context-aware", {"attack", "--mode", "context-aware", "--data", data, "--model", a, "--pool-size", "20",
                                "--budget", "640", "--threshold", "0.35"}},
      {"realtime-attack", {"realtime-attack", "--policy", "@policy", "--data", data, "--model", a, "--count", "5",
                           "--threshold", "0.35"}},
      {"eval-transfer", {"eval-transfer", "--data", data, "--source-model", a, "--dest-model", b, "--count", "3",
                         "--budget", "640", "--threshold", "0.35"}},
      {"sweep", {"sweep", "--param", "K", "--values", "1,2", "--data", data, "--model", a, "--budget", "640",
                 "--threshold", "0.35"}},
  };
  std::size_t identical = 0;
  std::string failed;
  for (const auto& [name, base] : commands) {
    std::string reports[2], outs[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      auto args = base;
      for (auto& arg : args) {
        if (arg == "@policy") arg = name == "attack" ? path("policy" + std::to_string(rep) + ".json") : path("policy.json");
      }
      const auto report = path(name + std::to_string(rep) + ".json");
      args.push_back("--report");
      args.push_back(report);
      ok = ok && cli(args, &outs[rep]) == kExitOk;
      if (ok) reports[rep] = read_text_file(report);
    }
    if (name == "attack" && ok) {
      fs::copy_file(path("policy0.json"), path("policy.json"), fs::copy_options::overwrite_existing);
    }
    if (ok && reports[0] == reports[1] && outs[0] == outs[1]) {
      ++identical;
    } else {
      failed += " " + name;
    }
  }
  const bool policies_same = read_text_file(path("policy0.json")) == read_text_file(path("policy1.json"));
  return {identical == commands.size() && policies_same,
          fmt("%zu/%zu commands byte-identical (reports and stdout), saved policies %s%s", identical, commands.size(),
              policies_same ? "identical" : "differ", failed.empty() ? "" : ("; differ:" + failed).c_str())};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "reward exactness", 1, reward_exactness},
      {2, "log-density and head-gradient exactness", 10, log_density_and_gradients},
      {3, "backprop correctness", 30, backprop},
      {4, "ratio and clip identities", 5, ratio_identities},
      {5, "update-count arithmetic", 5, update_counts},
      {6, "1D convergence", 60, toy_convergence},
      {7, "desk-scale protocol replica", 600, protocol_replica},
      {8, "zero-query real-time attack", 600, zero_query_realtime},
      {9, "transfer ordering", 600, transfer_ordering},
      {10, "budget law", 1, budget_law},
      {11, "HTTP loopback", 10, http_loopback},
      {12, "reproducibility", 600, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.2fs (limit %.0fs)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
