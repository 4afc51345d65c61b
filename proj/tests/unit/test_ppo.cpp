#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "dbar/attack.hpp"
#include "dbar/error.hpp"
#include "dbar/ppo.hpp"
#include "support.hpp"

using namespace dbar;

namespace {

constexpr std::uint64_t kLots = std::numeric_limits<std::uint64_t>::max();

struct Toy {
  test::StepOracle oracle;
  QueryCounter counter;
  QueryCounter setup{kLots};
  AttackEnv env;
  explicit Toy(std::uint64_t budget = 100000)
      : counter(budget), env(AttackEnv::context_free(Example{{0.3}, 0}, oracle, counter, setup, EnvConfig{})) {}
};

GaussianPolicy toy_policy(double mean = 0.0, double sd = 0.5) {
  return GaussianPolicy::constant(Vec64{mean}, Vec64{std::log(sd)});
}

RolloutBuffer toy_buffer(std::size_t n, std::uint64_t seed, double mean = 0.0, double sd = 0.5) {
  Toy t;
  Rng rng(seed);
  return collect_rollout(t.env, toy_policy(mean, sd), n, rng);
}

}  // namespace

TEST_CASE("collect_rollout records and truncation") {
  Toy t(3);
  Rng rng(1);
  const auto policy = toy_policy();
  const auto buf = collect_rollout(t.env, policy, 5, rng);
  CHECK(buf.size() == 3u);
  CHECK(buf.truncated);
  for (const auto& rec : buf.records) {
    CHECK(rec.x == Vec64{0.3});
    CHECK(rec.state == 0u);
    CHECK(rec.lp == policy.log_density(rec.x, rec.eta));
    CHECK(rec.linf == std::abs(rec.eta[0]));
    CHECK(rec.misled == (0.3 + rec.eta[0] >= 0.5));
  }

  Toy full;
  Rng again(1);
  const auto whole = collect_rollout(full.env, policy, 5, again);
  CHECK(whole.size() == 5u);
  CHECK_FALSE(whole.truncated);
  CHECK(full.env.reward_evaluations() == 5u);
}

TEST_CASE("parallel collection respects the budget") {
  Toy t(50);
  Rng rng(2);
  const auto buf = collect_rollout(t.env, toy_policy(), 64, rng, 4);
  CHECK(buf.truncated);
  CHECK(buf.size() == 50u);
  CHECK(t.counter.used() == 50u);
  CHECK(t.env.reward_evaluations() == 50u);
}

TEST_CASE("advantage values") {
  RolloutRecord rec;
  rec.x = Vec64{0.3};
  rec.r = 2.0;
  CHECK(advantage(rec, Critic::scalar(2.0)) == 0.0);
  rec.r = 25.0;
  CHECK(advantage(rec, Critic::scalar(5.0)) == 20.0);
}

TEST_CASE("ratio values") {
  const auto p = toy_policy(0.1, 0.4);
  RolloutRecord rec;
  rec.x = Vec64{0.0};
  rec.eta = Vec64{0.25};
  rec.lp = p.log_density(rec.x, rec.eta);
  CHECK(std::abs(ratio(p, rec) - 1.0) <= 1e-12);
  rec.lp -= std::numbers::ln2;
  CHECK(ratio(p, rec) == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(9);
  for (int t = 0; t < 500; ++t) {
    const double m0 = rng.uniform(-1, 1), s0 = rng.uniform(0.2, 2), m1 = rng.uniform(-1, 1), s1 = rng.uniform(0.2, 2);
    const auto old_p = toy_policy(m0, s0);
    const auto new_p = toy_policy(m1, s1);
    RolloutRecord r;
    r.x = Vec64{0.0};
    r.eta = Vec64{rng.uniform(-1.5, 1.5)};
    r.lp = old_p.log_density(r.x, r.eta);
    const double expected = std::exp(test::normal_logpdf(r.eta[0], m1, s1)) / std::exp(test::normal_logpdf(r.eta[0], m0, s0));
    if (std::abs(std::log(expected)) > 25.0) continue;
    CHECK(test::rel_err(ratio(new_p, r), expected) <= 1e-9);
  }

  std::size_t clamps = 0;
  rec.lp = p.log_density(rec.x, rec.eta) - 50.0;
  CHECK(ratio(p, rec, &clamps) == doctest::Approx(std::exp(30.0)).epsilon(1e-12));
  rec.lp = p.log_density(rec.x, rec.eta) + 50.0;
  CHECK(ratio(p, rec, &clamps) == doctest::Approx(std::exp(-30.0)).epsilon(1e-12));
  CHECK(clamps == 2u);
}

TEST_CASE("surrogate objective values") {
  const auto lit = SurrogateForm::ClippedRatio, std_form = SurrogateForm::StandardPPO;
  CHECK(actor_objective(1.5, 10.0, 0.02, lit) == doctest::Approx(10.2).epsilon(1e-14));
  CHECK(actor_objective(0.9, 10.0, 0.02, lit) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(actor_objective(1.5, -10.0, 0.02, lit) == doctest::Approx(-10.2).epsilon(1e-14));
  CHECK(actor_objective(1.5, -10.0, 0.02, std_form) == doctest::Approx(-15.0).epsilon(1e-14));

  Rng rng(12);
  for (int t = 0; t < 10000; ++t) {
    const double w = rng.uniform(0, 3), eps = rng.uniform(0.01, 0.5);
    const double c = clip_term(w, eps);
    CHECK(c >= 1.0 - eps);
    CHECK(c <= 1.0 + eps);
    const double a = rng.uniform(0, 50);
    CHECK(actor_objective(w, a, eps, lit) == actor_objective(w, a, eps, std_form));
  }
}

TEST_CASE("surrogate derivative matches finite differences away from kinks") {
  Rng rng(13);
  const double h = 1e-7;
  for (auto form : {SurrogateForm::ClippedRatio, SurrogateForm::StandardPPO}) {
    for (int t = 0; t < 2000; ++t) {
      const double w = rng.uniform(0.5, 1.5), a = rng.uniform(-5, 5), eps = 0.1;
      if (std::abs(w - (1 - eps)) < 1e-5 || std::abs(w - (1 + eps)) < 1e-5) continue;
      const double fd = (actor_objective(w + h, a, eps, form) - actor_objective(w - h, a, eps, form)) / (2 * h);
      CHECK(std::abs(actor_objective_dw(w, a, eps, form) - fd) <= 1e-5);
    }
  }
}

TEST_CASE("update counts") {
  const auto buf = toy_buffer(64, 3);
  Rng rng(4);
  PpoLearner learner(toy_policy(), Critic::scalar(), PpoConfig{});
  const auto s = learner.update(buf, rng);
  CHECK(s.actor_updates == 60u);
  CHECK(s.critic_updates == 60u);
  CHECK_FALSE(s.rolled_back);

  PpoConfig one;
  one.minibatch = 64;
  one.epochs = 3;
  PpoLearner whole(toy_policy(), Critic::scalar(), one);
  CHECK(whole.update(buf, rng).actor_updates == 3u);
}

TEST_CASE("first minibatch objective equals the mean advantage") {
  const auto buf = toy_buffer(64, 5);
  for (auto form : {SurrogateForm::ClippedRatio, SurrogateForm::StandardPPO}) {
    PpoConfig cfg;
    cfg.form = form;
    PpoLearner learner(toy_policy(), Critic::scalar(0.7), cfg);
    Rng rng(6);
    const auto s = learner.update(buf, rng);
    CHECK(s.first_minibatch_objective == doctest::Approx(s.first_minibatch_advantage).epsilon(1e-12));
  }
}

TEST_CASE("scalar critic fit") {
  RolloutBuffer two;
  two.records.resize(2);
  two.records[0].r = 2.0;
  two.records[1].r = -2.0;
  CHECK(fit_critic_scalar(two) == 0.0);
  RolloutBuffer one;
  one.records.resize(1);
  one.records[0].r = 25.0;
  CHECK(fit_critic_scalar(one) == 25.0);
  CHECK_THROWS_AS(fit_critic_scalar(RolloutBuffer{}), InvalidArgument);

  const auto buf = toy_buffer(64, 7);
  const Critic fitted = Critic::scalar(fit_critic_scalar(buf));
  double mean_adv = 0.0;
  for (const auto& rec : buf.records) mean_adv += advantage(rec, fitted);
  CHECK(std::abs(mean_adv / buf.size()) <= 1e-9);
}

TEST_CASE("network critic converges to the closed-form mean") {
  const auto buf = toy_buffer(64, 8);
  const double target = fit_critic_scalar(buf);
  Mlp net({1, 1}, Activation::Tanh);
  auto critic = Critic::from_mlp(net);
  std::vector<double> grad(critic.num_params());
  const double n = static_cast<double>(buf.size());
  for (int step = 0; step < 5000; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& rec : buf.records) {
      critic.accumulate_value_gradient(rec.x, -2.0 * (rec.r - critic.value(rec.x)) / n, grad);
    }
    for (std::size_t k = 0; k < grad.size(); ++k) critic.params()[k] -= 0.2 * grad[k];
  }
  CHECK(std::abs(critic.value(Vec64{0.3}) - target) <= 1e-6);
}

TEST_CASE("small steps ascend the surrogate") {
  int ascended = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto buf = toy_buffer(64, 100 + trial, 0.1, 0.3);
    const auto critic = Critic::scalar(fit_critic_scalar(buf));
    PpoConfig cfg;
    cfg.epochs = 1;
    cfg.minibatch = 64;
    cfg.actor_lr = 1e-4;
    const auto before = toy_policy(0.1, 0.3);
    PpoLearner learner(before, critic, cfg);
    Rng rng(trial);
    learner.update(buf, rng);
    const double f0 = mean_surrogate(before, critic, buf, cfg.clip_eps, cfg.form);
    const double f1 = mean_surrogate(learner.policy(), critic, buf, cfg.clip_eps, cfg.form);
    ascended += f1 >= f0;
  }
  CHECK(ascended >= 45);
}

TEST_CASE("scalar critic loss is non-increasing over epochs") {
  const auto buf = toy_buffer(64, 21);
  PpoConfig cfg;
  cfg.epochs = 1;
  PpoLearner learner(toy_policy(), Critic::scalar(), cfg);
  auto mse = [&] {
    double s = 0.0;
    for (const auto& rec : buf.records) {
      const double e = rec.r - learner.critic().value(rec.x);
      s += e * e;
    }
    return s / buf.size();
  };
  Rng rng(22);
  double prev = mse();
  for (int k = 0; k < 10; ++k) {
    learner.update(buf, rng);
    const double cur = mse();
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("updates are deterministic") {
  const auto buf = toy_buffer(64, 30);
  auto run = [&] {
    PpoLearner learner(toy_policy(), Critic::scalar(), PpoConfig{});
    Rng rng(31);
    for (int i = 0; i < 3; ++i) learner.update(buf, rng);
    return std::vector<double>(learner.policy().params().begin(), learner.policy().params().end());
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite updates roll back") {
  const auto buf = toy_buffer(64, 40);
  PpoConfig cfg;
  cfg.actor_lr = 1e308;
  const auto start = toy_policy();
  PpoLearner learner(start, Critic::scalar(), cfg);
  Rng rng(41);
  const auto s = learner.update(buf, rng);
  CHECK(s.rolled_back);
  CHECK(learner.policy() == start);
  CHECK(learner.critic().value(Vec64{0.3}) == 0.0);
}

TEST_CASE("config validation") {
  PpoConfig c;
  c.samples_per_iter = 5;
  c.minibatch = 10;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("M >= L"), ConfigError);
  c = PpoConfig{};
  c.clip_eps = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PpoConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(PpoLearner(toy_policy(), Critic::scalar(), c), ConfigError);
}

TEST_CASE("the mean moves toward the decision boundary") {
  // x = 0.3 and the boundary sits at 0.5, so a helpful mean grows.
  auto cfg = default_attack_config();
  cfg.iterations = 20;
  cfg.budget = 20 * 64;
  cfg.env.success_threshold = 0.25;
  std::vector<double> means{0.0};
  test::StepOracle oracle;
  attack_context_free(Example{{0.3}, 0}, oracle, cfg,
                      [&](const IterationStats& s) { means.push_back(s.policy_mean_linf); });
  REQUIRE(means.size() == 21u);
  int toward = 0;
  for (std::size_t i = 1; i < means.size(); ++i) toward += means[i] > means[i - 1];
  CHECK(toward >= 18);
}
