#include "dbar/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dbar/error.hpp"

namespace dbar {

namespace {

constexpr int kFormatVersion = 1;

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vec(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

Vec64 vec_from(const Json& j) {
  if (!j.is_array()) throw ParseError("expected an array of numbers");
  Vec64 out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(json_number(e));
  return out;
}

void expect_kind(const Json& j, const char* kind) {
  if (!j.is_object() || j.value("format", std::string{}) != kind) {
    throw ParseError(std::string("not a ") + kind + " document");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw ParseError(std::string(kind) + ": unsupported version");
  }
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

double json_number(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  if (!j.is_number()) throw ParseError("expected a number");
  return j.get<double>();
}

Json to_json(const Mlp& net) {
  Json j;
  j["dims"] = net.dims();
  j["activation"] = to_string(net.activation());
  j["params"] = vec(net.params());
  return j;
}

Mlp mlp_from_json(const Json& j) {
  return guarded("mlp", [&] {
    Mlp net(j.at("dims").get<std::vector<std::size_t>>(), activation_from_string(j.at("activation").get<std::string>()));
    const auto params = vec_from(j.at("params"));
    if (params.size() != net.num_params()) {
      throw ParseError("mlp: expected " + std::to_string(net.num_params()) + " parameters, got " +
                       std::to_string(params.size()));
    }
    std::copy(params.begin(), params.end(), net.params().begin());
    return net;
  });
}

Json to_json(const MlpTarget& target) {
  Json j;
  j["format"] = "dbar-target";
  j["version"] = kFormatVersion;
  j["train_accuracy"] = target.train_accuracy();
  j["net"] = to_json(target.net());
  return j;
}

MlpTarget target_from_json(const Json& j) {
  expect_kind(j, "dbar-target");
  return guarded("target", [&] { return MlpTarget(mlp_from_json(j.at("net")), j.value("train_accuracy", 0.0)); });
}

Json to_json(const GaussianPolicy& policy) {
  Json j;
  j["format"] = "dbar-policy";
  j["version"] = kFormatVersion;
  j["mode"] = to_string(policy.mode());
  j["d"] = policy.dim();
  j["log_std_range"] = {policy.range().min, policy.range().max};
  if (policy.mode() == PolicyMode::Constant) {
    const auto p = policy.params();
    j["mean"] = vec(p.first(policy.dim()));
    j["log_std"] = vec(p.subspan(policy.dim()));
  } else {
    j["actor"] = to_json(*policy.actor());
  }
  return j;
}

GaussianPolicy policy_from_json(const Json& j) {
  expect_kind(j, "dbar-policy");
  return guarded("policy", [&] {
    const auto& r = j.at("log_std_range");
    LogStdRange range{r.at(0).get<double>(), r.at(1).get<double>()};
    const auto mode = policy_mode_from_string(j.at("mode").get<std::string>());
    if (mode == PolicyMode::Constant) {
      return GaussianPolicy::constant(vec_from(j.at("mean")), vec_from(j.at("log_std")), range);
    }
    return GaussianPolicy::conditioned(mlp_from_json(j.at("actor")), range);
  });
}

Json to_json(const AttackConfig& cfg) {
  Json j;
  j["M"] = cfg.ppo.samples_per_iter;
  j["K"] = cfg.ppo.epochs;
  j["L"] = cfg.ppo.minibatch;
  j["clip_eps"] = cfg.ppo.clip_eps;
  j["surrogate"] = to_string(cfg.ppo.form);
  j["actor_lr"] = cfg.ppo.actor_lr;
  j["critic_lr"] = cfg.ppo.critic_lr;
  j["normalize_advantages"] = cfg.ppo.normalize_advantages;
  j["workers"] = cfg.ppo.workers;
  j["init_mean"] = cfg.init_mean;
  j["init_std"] = cfg.init_std;
  j["budget"] = cfg.budget;
  j["seed"] = cfg.seed;
  j["iterations"] = cfg.resolved_iterations();
  j["policy_mode"] = cfg.policy_mode ? Json(to_string(*cfg.policy_mode)) : Json("auto");
  j["critic_mode"] = cfg.critic_mode ? Json(to_string(*cfg.critic_mode)) : Json("auto");
  j["actor_hidden"] = cfg.actor_hidden;
  j["critic_hidden"] = cfg.critic_hidden;
  j["eval_draws"] = cfg.eval_draws;
  j["threshold"] = cfg.env.success_threshold;
  j["norm_floor"] = cfg.env.norm_floor;
  j["alpha"] = cfg.env.alpha;
  j["domain"] = to_string(cfg.env.domain);
  j["target_label"] = cfg.env.target ? Json(*cfg.env.target) : Json(nullptr);
  return j;
}

Json to_json(const AttackReport& r) {
  Json j;
  j["attack"] = r.attack;
  j["seed"] = r.seed;
  j["threshold"] = r.threshold;
  j["success"] = r.success;
  j["misled"] = r.misled;
  j["best_linf"] = num(r.best_linf);
  j["best_eta"] = vec(r.best_eta);
  j["budget"] = r.budget;
  j["queries_used"] = r.queries_used;
  j["reward_evaluations"] = r.reward_evaluations;
  j["setup_queries"] = r.setup_queries;
  j["eval_queries"] = r.eval_queries;
  j["iterations_run"] = r.iterations_run;
  j["budget_exhausted"] = r.budget_exhausted;
  j["rollbacks"] = r.rollbacks;
  j["sampled_success_rate"] = r.sampled_success_rate;
  j["sampled_misled_rate"] = r.sampled_misled_rate;
  Json states = Json::array();
  for (const auto& s : r.states) {
    Json o;
    o["benign_label"] = s.benign_label;
    o["misled"] = s.misled;
    o["success"] = s.success;
    o["best_linf"] = num(s.best_linf);
    o["mean_misled"] = s.mean_misled;
    o["mean_linf"] = num(s.mean_linf);
    o["sampled_success_rate"] = s.sampled_success_rate;
    o["sampled_misled_rate"] = s.sampled_misled_rate;
    states.push_back(std::move(o));
  }
  j["states"] = std::move(states);
  j["dropped"] = r.dropped;
  return j;
}

Json to_json(const IterationStats& st) {
  Json j;
  j["iteration"] = st.iteration;
  j["samples"] = st.samples;
  j["mean_reward"] = num(st.mean_reward);
  j["mean_linf"] = num(st.mean_linf);
  j["success_rate"] = st.success_rate_in_batch;
  j["clip_fraction"] = num(st.clip_fraction);
  j["mean_ratio"] = num(st.mean_ratio);
  j["actor_objective"] = num(st.actor_objective);
  j["critic_loss"] = num(st.critic_loss);
  j["actor_updates"] = st.actor_updates;
  j["critic_updates"] = st.critic_updates;
  j["queries_used"] = st.queries_used;
  j["rolled_back"] = st.rolled_back;
  j["policy_mean_linf"] = num(st.policy_mean_linf);
  return j;
}

Json to_json(const AsrRow& row) {
  Json j;
  j["dataset"] = row.dataset_id;
  j["target"] = row.target_id;
  j["attack"] = row.attack_id;
  j["asr"] = row.asr;
  j["mean_queries"] = row.mean_queries;
  j["mean_best_linf"] = num(row.mean_best_linf);
  j["n"] = row.n;
  j["successes"] = row.successes;
  j["threshold"] = row.threshold;
  j["seed"] = row.seed;
  j["dataset_hash"] = row.dataset_hash;
  return j;
}

Json to_json(const TransferResult& res) {
  Json j;
  j["source"] = res.source_id;
  j["dest"] = res.dest_id;
  j["n"] = res.n;
  j["n_draws"] = res.n_draws;
  j["successes"] = res.successes;
  j["transfer_asr"] = res.asr;
  j["dest_queries"] = res.dest_queries;
  return j;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
}

Json load_json(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

void save_target(const std::filesystem::path& path, const MlpTarget& target) { save_json(path, to_json(target)); }

MlpTarget load_target(const std::filesystem::path& path) { return target_from_json(load_json(path)); }

void save_policy(const std::filesystem::path& path, const GaussianPolicy& policy) { save_json(path, to_json(policy)); }

GaussianPolicy load_policy(const std::filesystem::path& path) { return policy_from_json(load_json(path)); }

}  // namespace dbar
