#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dbar/attack.hpp"
#include "dbar/datagen.hpp"
#include "dbar/error.hpp"
#include "dbar/eval.hpp"
#include "dbar/http.hpp"
#include "dbar/serialize.hpp"

namespace dbar {

namespace {

// Flat key=value config files: keys are the long flag names of the selected
// subcommand, without dashes. Unknown keys are rejected.
class FlatConfig : public CLI::ConfigBase {
 public:
  explicit FlatConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigBase::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    const CLI::App* sub = subs.front();
    for (auto& item : items) {
      if (!item.parents.empty()) continue;
      if (sub->get_option_no_throw("--" + item.name) == nullptr) {
        throw CLI::ConfigError("unknown key '" + item.name + "' for command " + sub->get_name());
      }
      item.parents = {sub->get_name()};
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    long long v = -1;
    try {
      v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || v < 1) throw ConfigError(std::string(what) + ": bad entry '" + tok + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty()) throw ConfigError(std::string(what) + ": bad entry '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": no values");
  return out;
}

void emit(std::ostream& out, const Json& j) { out << j.dump() << "\n" << std::flush; }

struct OracleOpts {
  std::string model;
  std::string url;

  void bind(CLI::App* sub, const std::string& prefix = "") {
    sub->add_option("--" + prefix + "model", model, "target model JSON from train-target");
    sub->add_option("--" + prefix + "url", url, "http://host:port of a running serve");
  }

  std::shared_ptr<const Oracle> open(const std::string& prefix = "") const {
    if (model.empty() == url.empty()) {
      throw ConfigError("exactly one of --" + prefix + "model and --" + prefix + "url is required");
    }
    if (!url.empty()) return std::make_shared<HttpOracle>(url);
    return std::make_shared<MlpTarget>(load_target(model));
  }

  Json describe() const { return url.empty() ? Json(model) : Json(url); }
};

struct AttackOpts {
  std::size_t M = 64, K = 10, L = 10;
  double eps = 0.02;
  std::string surrogate = "clipped-ratio";
  double actor_lr = 3e-4, critic_lr = 1e-3;
  bool normalize = false;
  double init_mean = 0.0, init_std = 0.5;
  std::uint64_t budget = kDefaultBudget;
  std::size_t iterations = 0;
  std::string threshold = "auto";
  double alpha = 1.0, norm_floor = 1e-8;
  long long target_label = -1;
  std::string policy_mode = "auto", critic_mode = "auto";
  std::string actor_hidden = "32", critic_hidden = "32";
  std::size_t eval_draws = 100;
  std::string domain = "auto";
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void bind(CLI::App* sub) {
    sub->add_option("--M", M, "samples per iteration")->capture_default_str();
    sub->add_option("--K", K, "training epochs per iteration")->capture_default_str();
    sub->add_option("--L", L, "minibatch size")->capture_default_str();
    sub->add_option("--eps", eps, "clip parameter")->capture_default_str();
    sub->add_option("--surrogate", surrogate, "clipped-ratio|standard")->capture_default_str();
    sub->add_option("--actor-lr", actor_lr)->capture_default_str();
    sub->add_option("--critic-lr", critic_lr)->capture_default_str();
    sub->add_flag("--normalize-advantages", normalize);
    sub->add_option("--init-mean", init_mean)->capture_default_str();
    sub->add_option("--init-std", init_std)->capture_default_str();
    sub->add_option("--budget", budget, "attacker query budget")->capture_default_str();
    sub->add_option("--iterations", iterations, "0 = budget / M")->capture_default_str();
    sub->add_option("--threshold", threshold, "success l-inf threshold; auto = 0.04 unit box, 0.1 unbounded")
        ->capture_default_str();
    sub->add_option("--alpha", alpha, "success weight in the reward")->capture_default_str();
    sub->add_option("--norm-floor", norm_floor)->capture_default_str();
    sub->add_option("--target-label", target_label, "targeted attack label; -1 = untargeted")->capture_default_str();
    sub->add_option("--policy-mode", policy_mode, "auto|constant|conditioned")->capture_default_str();
    sub->add_option("--critic-mode", critic_mode, "auto|scalar|network")->capture_default_str();
    sub->add_option("--actor-hidden", actor_hidden, "comma list")->capture_default_str();
    sub->add_option("--critic-hidden", critic_hidden, "comma list")->capture_default_str();
    sub->add_option("--eval-draws", eval_draws, "fresh draws scored after training")->capture_default_str();
    sub->add_option("--domain", domain, "auto|unit|unbounded")->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--workers", workers, "rollout threads; 1 keeps runs bit-reproducible")->capture_default_str();
  }

  AttackConfig resolve(DomainMode data_mode) const {
    AttackConfig cfg;
    cfg.ppo.samples_per_iter = M;
    cfg.ppo.epochs = K;
    cfg.ppo.minibatch = L;
    cfg.ppo.clip_eps = eps;
    cfg.ppo.form = surrogate_form_from_string(surrogate);
    cfg.ppo.actor_lr = actor_lr;
    cfg.ppo.critic_lr = critic_lr;
    cfg.ppo.normalize_advantages = normalize;
    cfg.ppo.workers = workers;
    cfg.init_mean = init_mean;
    cfg.init_std = init_std;
    cfg.budget = budget;
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.env.domain = domain == "auto" ? data_mode : domain_mode_from_string(domain);
    cfg.env.success_threshold = threshold == "auto"
                                    ? (cfg.env.domain == DomainMode::UnitBox ? kImageThreshold : kTimeSeriesThreshold)
                                    : parse_doubles(threshold, "--threshold").front();
    cfg.env.alpha = alpha;
    cfg.env.norm_floor = norm_floor;
    if (target_label >= 0) cfg.env.target = static_cast<Label>(target_label);
    if (policy_mode != "auto") cfg.policy_mode = policy_mode_from_string(policy_mode);
    if (critic_mode != "auto") cfg.critic_mode = critic_mode_from_string(critic_mode);
    cfg.actor_hidden = parse_sizes(actor_hidden, "--actor-hidden");
    cfg.critic_hidden = parse_sizes(critic_hidden, "--critic-hidden");
    cfg.eval_draws = eval_draws;
    if (!(learning_rate_ok(actor_lr) && learning_rate_ok(critic_lr))) throw ConfigError("learning rates must be positive");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    cfg.validate();
    return cfg;
  }

  static bool learning_rate_ok(double lr) { return lr > 0.0 && std::isfinite(lr); }
};

Json data_json(const std::string& path, const Dataset& ds) {
  Json j;
  j["path"] = path;
  j["hash"] = hex64(ds.content_hash());
  j["examples"] = ds.size();
  j["d"] = ds.dim();
  j["m"] = ds.num_classes();
  j["mode"] = to_string(ds.mode());
  return j;
}

Dataset open_dataset(const std::string& path) {
  if (path.empty()) throw ConfigError("--data is required");
  return load_dataset(path, data_format_from_path(path));
}

void require_dims(const Oracle& oracle, const Dataset& ds) {
  if (oracle.input_dim() != ds.dim()) {
    throw ConfigError("oracle input dimension " + std::to_string(oracle.input_dim()) + " does not match data d=" +
                      std::to_string(ds.dim()));
  }
}

// ---- gen-data -------------------------------------------------------------

struct GenDataCmd {
  std::string kind = "blobs2d";
  std::string out;
  std::uint64_t seed = 0;
  std::size_t n = 400;
  std::optional<double> noise;

  void bind(CLI::App* sub) {
    sub->add_option("--kind", kind, "blobs2d|rings2d|sine-ts")->capture_default_str();
    sub->add_option("--out", out, "output path (.csv or .bin)")->required();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--n", n, "number of examples")->capture_default_str();
    sub->add_option("--noise", noise, "noise level; defaults per kind");
  }

  int run(std::ostream& out_stream) const {
    const auto k = data_kind_from_string(kind);
    const double nz = noise.value_or(default_noise(k));
    const auto format = data_format_from_path(out);
    Json header;
    header["command"] = "gen-data";
    header["seed"] = seed;
    header["config"] = {{"kind", kind}, {"n", n}, {"noise", nz}, {"out", out}};
    emit(out_stream, header);

    Rng rng(seed);
    const auto ds = generate_dataset(k, n, nz, rng);
    save_dataset(ds, out, format);
    Json done;
    done["event"] = "wrote";
    done["data"] = data_json(out, ds);
    emit(out_stream, done);
    return kExitOk;
  }
};

// ---- train-target ---------------------------------------------------------

struct TrainTargetCmd {
  std::string data, out;
  std::string layers = "2,16,2";
  std::size_t epochs = 50;
  double lr = 1e-2;
  std::size_t batch = 32;
  std::string activation = "relu";
  std::uint64_t seed = 0;

  void bind(CLI::App* sub) {
    sub->add_option("--data", data, "training dataset")->required();
    sub->add_option("--out", out, "model JSON path")->required();
    sub->add_option("--layers", layers, "comma list d,...,m")->capture_default_str();
    sub->add_option("--epochs", epochs)->capture_default_str();
    sub->add_option("--lr", lr)->capture_default_str();
    sub->add_option("--batch", batch)->capture_default_str();
    sub->add_option("--activation", activation, "relu|tanh")->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
  }

  int run(std::ostream& os) const {
    const auto dims = parse_sizes(layers, "--layers");
    TrainOptions opts;
    opts.batch_size = batch;
    opts.activation = activation_from_string(activation);
    if (dims.size() < 2) throw ConfigError("--layers needs at least input and output sizes");
    if (epochs < 1 || batch < 1) throw ConfigError("epochs and batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");

    const auto ds = open_dataset(data);
    Json header;
    header["command"] = "train-target";
    header["seed"] = seed;
    header["config"] = {{"layers", dims}, {"epochs", epochs}, {"lr", lr}, {"batch", batch},
                        {"activation", activation}, {"out", out}};
    header["data"] = data_json(data, ds);
    emit(os, header);

    Rng rng(seed);
    const auto target = train_target(ds, dims, epochs, lr, rng, opts);
    save_target(out, target);
    Json done;
    done["event"] = "trained";
    done["train_accuracy"] = target.train_accuracy();
    done["params"] = target.net().num_params();
    done["out"] = out;
    emit(os, done);
    return kExitOk;
  }
};

// ---- serve ----------------------------------------------------------------

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested.store(true); }

struct ServeCmd {
  std::string model;
  std::string host = "127.0.0.1";
  int port = 8080;

  void bind(CLI::App* sub) {
    sub->add_option("--model", model, "target model JSON")->required();
    sub->add_option("--host", host)->capture_default_str();
    sub->add_option("--port", port, "0 picks a free port")->capture_default_str();
  }

  int run(std::ostream& os) const {
    if (port < 0 || port > 65535) throw ConfigError("--port must be in [0, 65535]");
    Json header;
    header["command"] = "serve";
    header["config"] = {{"model", model}, {"host", host}, {"port", port}};
    emit(os, header);

    auto target = std::make_shared<MlpTarget>(load_target(model));
    PredictServer server(target);
    const int bound = server.bind(host, port);
    g_stop_requested.store(false);
    auto prev_int = std::signal(SIGINT, on_stop_signal);
    auto prev_term = std::signal(SIGTERM, on_stop_signal);
    server.start();
    emit(os, Json{{"event", "listening"}, {"host", host}, {"port", bound}, {"d", target->input_dim()},
                  {"m", target->num_classes()}});
    while (!g_stop_requested.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    emit(os, Json{{"event", "stopped"}});
    return kExitOk;
  }
};

// ---- attack ---------------------------------------------------------------

struct AttackCmd {
  std::string mode = "context-free";
  std::string data;
  OracleOpts oracle;
  AttackOpts opts;
  std::size_t index = 0;
  std::size_t count = 0;
  std::size_t pool_size = 0;
  std::string report_path, policy_out, resume, asr_csv;
  bool log_iterations = false;

  void bind(CLI::App* sub) {
    sub->add_option("--mode", mode, "context-free|context-aware|random")->capture_default_str();
    sub->add_option("--data", data, "dataset holding the benign examples")->required();
    oracle.bind(sub);
    opts.bind(sub);
    sub->add_option("--index", index, "example index for a single attack")->capture_default_str();
    sub->add_option("--count", count, "attack the first n correctly classified examples (batch)");
    sub->add_option("--pool-size", pool_size, "context-aware pool: first n examples; 0 = all");
    sub->add_option("--report", report_path, "write the JSON report here");
    sub->add_option("--policy-out", policy_out, "write the trained policy here");
    sub->add_option("--resume", resume, "start from a saved policy");
    sub->add_option("--asr-csv", asr_csv, "batch mode: write the ASR table here");
    sub->add_flag("--log-iterations", log_iterations, "emit one JSON line per training iteration");
  }

  int run(std::ostream& os) const {
    if (mode != "context-free" && mode != "context-aware" && mode != "random") {
      throw ConfigError("--mode must be context-free, context-aware or random");
    }
    const auto ds = open_dataset(data);
    const auto cfg = opts.resolve(ds.mode());
    if (count > 0 && mode == "context-aware") throw ConfigError("--count applies to context-free and random modes");
    if (count > 0 && !policy_out.empty()) throw ConfigError("--policy-out needs a single attack, not --count");
    if (mode == "random" && (!resume.empty() || !policy_out.empty())) {
      throw ConfigError("random mode has no policy to resume or save");
    }
    if (count == 0 && mode != "context-aware" && index >= ds.size()) {
      throw ConfigError("--index " + std::to_string(index) + " out of range for " + std::to_string(ds.size()) +
                        " examples");
    }
    std::optional<GaussianPolicy> start;
    if (!resume.empty()) start = load_policy(resume);

    Json header;
    header["command"] = "attack";
    header["mode"] = mode;
    header["seed"] = cfg.seed;
    header["config"] = to_json(cfg);
    header["data"] = data_json(data, ds);
    header["oracle"] = oracle.describe();
    emit(os, header);

    const auto target = oracle.open();
    require_dims(*target, ds);

    auto logger = [&](std::size_t idx) -> IterationCallback {
      if (!log_iterations) return {};
      return [&os, idx](const IterationStats& st) {
        Json j;
        j["event"] = "iteration";
        j["index"] = idx;
        const Json fields = to_json(st);
        for (auto& [k, v] : fields.items()) j[k] = v;
        emit(os, j);
      };
    };

    Json report_doc;
    report_doc["command"] = "attack";
    report_doc["mode"] = mode;
    report_doc["config"] = header["config"];
    report_doc["data"] = header["data"];

    bool any_success = false, any_exhausted = false;
    if (count > 0) {
      std::vector<AttackReport> reports;
      std::vector<std::size_t> indices;
      AttackFn fn = [&](const Example& ex, std::size_t idx) {
        auto c = cfg;
        c.seed = cfg.seed + idx;
        AttackReport r = mode == "random" ? baseline_random(ex, *target, c)
                                          : attack_context_free(ex, *target, c, logger(idx), start).report;
        emit(os, Json{{"event", "report"}, {"index", idx}, {"report", to_json(r)}});
        indices.push_back(idx);
        return r;
      };
      AsrIds ids{data, oracle.url.empty() ? oracle.model : oracle.url,
                 mode == "random" ? "random" : "dbar-context-free", cfg.seed};
      const auto row = eval_asr(ds, *target, fn, cfg.env.success_threshold, count, ids, &reports);
      emit(os, Json{{"event", "summary"}, {"asr", to_json(row)}});
      Json arr = Json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        arr.push_back(Json{{"index", indices[i]}, {"report", to_json(reports[i])}});
        any_success = any_success || reports[i].success;
        any_exhausted = any_exhausted || reports[i].budget_exhausted;
      }
      report_doc["reports"] = std::move(arr);
      report_doc["summary"] = to_json(row);
      if (!asr_csv.empty()) write_text_file(asr_csv, asr_table_csv({row}));
    } else {
      AttackResult result;
      if (mode == "random") {
        result.report = baseline_random(ds[index], *target, cfg);
      } else if (mode == "context-free") {
        result = attack_context_free(ds[index], *target, cfg, logger(index), start);
      } else {
        const auto pool = pool_size == 0 || pool_size >= ds.size()
                              ? ds
                              : Dataset(std::vector<Example>(ds.examples().begin(),
                                                             ds.examples().begin() + static_cast<long>(pool_size)),
                                        ds.dim(), ds.num_classes(), ds.mode());
        result = attack_context_aware(pool, *target, cfg, logger(0), start);
      }
      any_success = result.report.success;
      any_exhausted = result.report.budget_exhausted;
      Json line{{"event", "report"}};
      if (mode != "context-aware") line["index"] = index;
      line["report"] = to_json(result.report);
      emit(os, line);
      if (mode != "context-aware") report_doc["index"] = index;
      report_doc["report"] = line["report"];
      if (!policy_out.empty() && result.policy) save_policy(policy_out, *result.policy);
    }
    if (!report_path.empty()) save_json(report_path, report_doc);
    return !any_success && any_exhausted ? kExitBudget : kExitOk;
  }
};

// ---- realtime-attack ------------------------------------------------------

struct RealtimeCmd {
  std::string policy, data;
  OracleOpts oracle;
  std::size_t start = 0;
  std::size_t count = 1;
  std::size_t draws = 100;
  std::string threshold = "auto";
  std::string domain = "auto";
  long long target_label = -1;
  std::uint64_t seed = 0;
  std::string report_path;

  void bind(CLI::App* sub) {
    sub->add_option("--policy", policy, "trained policy JSON")->required();
    sub->add_option("--data", data)->required();
    oracle.bind(sub);
    sub->add_option("--start", start, "first dataset index considered")->capture_default_str();
    sub->add_option("--count", count, "number of correctly classified examples to attack")->capture_default_str();
    sub->add_option("--draws", draws, "perturbations sampled per example")->capture_default_str();
    sub->add_option("--threshold", threshold)->capture_default_str();
    sub->add_option("--domain", domain, "auto|unit|unbounded")->capture_default_str();
    sub->add_option("--target-label", target_label)->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
    sub->add_option("--report", report_path);
  }

  int run(std::ostream& os) const {
    const auto ds = open_dataset(data);
    const auto pol = load_policy(policy);
    if (pol.dim() != ds.dim()) throw ConfigError("policy dimension does not match the data");
    if (count < 1 || draws < 1) throw ConfigError("--count and --draws must be >= 1");
    EnvConfig env;
    env.domain = domain == "auto" ? ds.mode() : domain_mode_from_string(domain);
    env.success_threshold = threshold == "auto"
                                ? (env.domain == DomainMode::UnitBox ? kImageThreshold : kTimeSeriesThreshold)
                                : parse_doubles(threshold, "--threshold").front();
    if (target_label >= 0) env.target = static_cast<Label>(target_label);
    env.validate();

    Json header;
    header["command"] = "realtime-attack";
    header["seed"] = seed;
    header["config"] = {{"policy", policy}, {"start", start}, {"count", count}, {"draws", draws},
                        {"threshold", env.success_threshold}, {"domain", to_string(env.domain)},
                        {"target_label", env.target ? Json(*env.target) : Json(nullptr)}};
    header["data"] = data_json(data, ds);
    header["oracle"] = oracle.describe();
    emit(os, header);

    const auto target = oracle.open();
    require_dims(*target, ds);
    QueryCounter attacker(kDefaultBudget);
    QueryCounter evaluator(std::numeric_limits<std::uint64_t>::max());
    Rng rng = stream_rng(seed, SeedStream::Evaluation);

    Json rows = Json::array();
    double rate_sum = 0.0;
    std::size_t done = 0;
    for (std::size_t i = start; i < ds.size() && done < count; ++i) {
      if (target->predict(ds[i].x) != ds[i].label) continue;
      const auto res = realtime_attack(pol, ds[i].x, ds[i].label, draws, rng, *target, evaluator, env);
      Json row{{"event", "realtime"},          {"index", i},
               {"success_rate", res.score.success_rate()}, {"misled_rate", res.score.misled_rate()},
               {"draws", res.score.draws},      {"attacker_queries", attacker.used()}};
      emit(os, row);
      rows.push_back(row);
      rate_sum += res.score.success_rate();
      ++done;
    }
    if (done < count) {
      throw InvalidArgument("requested " + std::to_string(count) + " correctly classified examples, only " +
                            std::to_string(done) + " available");
    }
    Json summary{{"event", "summary"},
                 {"mean_success_rate", rate_sum / static_cast<double>(done)},
                 {"examples", done},
                 {"attacker_queries", attacker.used()},
                 {"eval_queries", evaluator.used()}};
    emit(os, summary);
    if (!report_path.empty()) {
      save_json(report_path, Json{{"command", "realtime-attack"}, {"config", header["config"]},
                                  {"data", header["data"]}, {"rows", rows}, {"summary", summary}});
    }
    return kExitOk;
  }
};

// ---- eval-transfer --------------------------------------------------------

struct TransferCmd {
  std::string data;
  OracleOpts source, dest;
  AttackOpts opts;
  std::size_t count = 50;
  std::size_t draws = 10;
  std::string policy;
  std::string out_csv, report_path;

  void bind(CLI::App* sub) {
    sub->add_option("--data", data)->required();
    source.bind(sub, "source-");
    dest.bind(sub, "dest-");
    opts.bind(sub);
    sub->add_option("--count", count, "examples correctly classified by both models")->capture_default_str();
    sub->add_option("--draws", draws, "perturbations per example")->capture_default_str();
    sub->add_option("--policy", policy, "shared policy JSON; skips per-example training");
    sub->add_option("--out", out_csv, "transfer CSV path");
    sub->add_option("--report", report_path);
  }

  int run(std::ostream& os) const {
    const auto ds = open_dataset(data);
    const auto cfg = opts.resolve(ds.mode());
    if (count < 1 || draws < 1) throw ConfigError("--count and --draws must be >= 1");
    std::optional<GaussianPolicy> shared;
    if (!policy.empty()) shared = load_policy(policy);

    Json header;
    header["command"] = "eval-transfer";
    header["seed"] = cfg.seed;
    header["config"] = to_json(cfg);
    header["config"]["count"] = count;
    header["config"]["draws"] = draws;
    header["config"]["policy"] = policy.empty() ? Json(nullptr) : Json(policy);
    header["data"] = data_json(data, ds);
    header["source"] = source.describe();
    header["dest"] = dest.describe();
    emit(os, header);

    const auto src = shared ? nullptr : source.open("source-");
    const auto dst = dest.open("dest-");
    require_dims(*dst, ds);
    if (src) require_dims(*src, ds);

    std::vector<Example> examples;
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < ds.size() && examples.size() < count; ++i) {
      if (dst->predict(ds[i].x) != ds[i].label) continue;
      if (src && src->predict(ds[i].x) != ds[i].label) continue;
      examples.push_back(ds[i]);
      indices.push_back(i);
    }
    if (examples.size() < count) {
      throw InvalidArgument("requested " + std::to_string(count) + " examples correctly classified by both models, only " +
                            std::to_string(examples.size()) + " available");
    }

    std::vector<GaussianPolicy> policies, noise;
    if (shared) {
      policies.push_back(*shared);
      for (const auto& ex : examples) noise.push_back(matched_noise_policy(*shared, ex.x));
    } else {
      for (std::size_t k = 0; k < examples.size(); ++k) {
        auto c = cfg;
        c.seed = cfg.seed + indices[k];
        auto r = attack_context_free(examples[k], *src, c);
        emit(os, Json{{"event", "source-report"}, {"index", indices[k]}, {"report", to_json(r.report)}});
        noise.push_back(matched_noise_policy(*r.policy, examples[k].x));
        policies.push_back(std::move(*r.policy));
      }
    }

    const std::string src_id = shared ? policy : (source.url.empty() ? source.model : source.url);
    const std::string dst_id = dest.url.empty() ? dest.model : dest.url;
    QueryCounter dbar_counter(std::numeric_limits<std::uint64_t>::max());
    QueryCounter noise_counter(std::numeric_limits<std::uint64_t>::max());
    Rng rng = stream_rng(cfg.seed, SeedStream::Evaluation);
    auto dbar_row = eval_transfer(policies, examples, *dst, dbar_counter, draws, cfg.env, rng);
    auto noise_row = eval_transfer(noise, examples, *dst, noise_counter, draws, cfg.env, rng);
    dbar_row.source_id = src_id;
    dbar_row.dest_id = dst_id;
    noise_row.source_id = "matched-noise";
    noise_row.dest_id = dst_id;
    emit(os, Json{{"event", "transfer"}, {"result", to_json(dbar_row)}});
    emit(os, Json{{"event", "transfer"}, {"result", to_json(noise_row)}});
    if (!out_csv.empty()) write_text_file(out_csv, transfer_csv({dbar_row, noise_row}));
    if (!report_path.empty()) {
      save_json(report_path, Json{{"command", "eval-transfer"},
                                  {"config", header["config"]},
                                  {"data", header["data"]},
                                  {"results", {to_json(dbar_row), to_json(noise_row)}}});
    }
    return kExitOk;
  }
};

// ---- sweep ----------------------------------------------------------------

struct SweepCmd {
  std::string param = "init_std";
  std::string values = "0.1,0.5,80";
  std::string data;
  OracleOpts oracle;
  AttackOpts opts;
  std::size_t index = 0;
  std::string out_csv, report_path;

  void bind(CLI::App* sub) {
    sub->add_option("--param", param, "init_std|L|K")->capture_default_str();
    sub->add_option("--values", values, "comma list")->capture_default_str();
    sub->add_option("--data", data)->required();
    oracle.bind(sub);
    opts.bind(sub);
    sub->add_option("--index", index)->capture_default_str();
    sub->add_option("--out", out_csv, "CSV path; wall-clock seconds are written only here");
    sub->add_option("--report", report_path);
  }

  int run(std::ostream& os) const {
    const auto ds = open_dataset(data);
    const auto p = sweep_param_from_string(param);
    const auto vals = parse_doubles(values, "--values");
    const auto cfg = opts.resolve(ds.mode());
    for (double v : vals) with_sweep_value(cfg, p, v).validate();
    if (index >= ds.size()) throw ConfigError("--index out of range");

    Json header;
    header["command"] = "sweep";
    header["seed"] = cfg.seed;
    header["config"] = to_json(cfg);
    header["config"]["param"] = to_string(p);
    header["config"]["values"] = vals;
    header["config"]["index"] = index;
    header["data"] = data_json(data, ds);
    header["oracle"] = oracle.describe();
    emit(os, header);

    const auto target = oracle.open();
    require_dims(*target, ds);
    const auto result = sweep(p, vals, cfg, ds[index], *target);
    Json runs = Json::array();
    for (std::size_t v = 0; v < vals.size(); ++v) {
      Json series = Json::array();
      for (const auto& pt : result.series[v]) {
        series.push_back(Json{{"iteration", pt.iteration},
                              {"mean_linf", pt.mean_linf},
                              {"policy_mean_linf", pt.policy_mean_linf},
                              {"actor_updates", pt.actor_updates}});
      }
      Json run{{"param", to_string(p)}, {"value", vals[v]}, {"series", series}, {"report", to_json(result.reports[v])}};
      emit(os, Json{{"event", "sweep"},
                    {"param", to_string(p)},
                    {"value", vals[v]},
                    {"iterations", result.series[v].size()},
                    {"final_mean_linf", result.series[v].empty() ? Json(nullptr) : Json(result.series[v].back().mean_linf)},
                    {"success", result.reports[v].success},
                    {"best_linf", result.reports[v].misled ? Json(result.reports[v].best_linf) : Json(nullptr)}});
      runs.push_back(std::move(run));
    }
    if (!out_csv.empty()) write_text_file(out_csv, sweep_csv(result));
    if (!report_path.empty()) {
      save_json(report_path, Json{{"command", "sweep"}, {"config", header["config"]}, {"data", header["data"]},
                                  {"runs", runs}});
    }
    return kExitOk;
  }
};

int exit_for(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const BudgetExceeded*>(&e)) return kExitBudget;
  if (dynamic_cast<const OracleUnreachable*>(&e) || dynamic_cast<const ProtocolViolation*>(&e)) return kExitOracle;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const dbar::ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
      dynamic_cast<const InvalidArgument*>(&e)) {
    return kExitConfig;
  }
  return kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decision-based black-box adversarial attacks trained with PPO", "dbar"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "flat key=value file; flags override it");
  app.config_formatter(std::make_shared<FlatConfig>(&app));

  GenDataCmd gen;
  TrainTargetCmd train;
  ServeCmd serve;
  AttackCmd attack;
  RealtimeCmd realtime;
  TransferCmd transfer;
  SweepCmd sweep_cmd;

  auto add = [&](const char* name, const char* desc, auto& cmd) {
    auto* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    cmd.bind(sub);
    return sub;
  };
  auto* gen_sub = add("gen-data", "generate a synthetic dataset", gen);
  auto* train_sub = add("train-target", "train an MLP target model", train);
  auto* serve_sub = add("serve", "serve a target model over HTTP", serve);
  auto* attack_sub = add("attack", "run an attack", attack);
  auto* realtime_sub = add("realtime-attack", "sample perturbations from a trained policy", realtime);
  auto* transfer_sub = add("eval-transfer", "transfer attacks from one model to another", transfer);
  auto* sweep_sub = add("sweep", "hyperparameter sweep of context-free runs", sweep_cmd);

  std::vector<std::string> argv_store{"dbar"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (gen_sub->parsed()) return gen.run(out);
    if (train_sub->parsed()) return train.run(out);
    if (serve_sub->parsed()) return serve.run(out);
    if (attack_sub->parsed()) return attack.run(out);
    if (realtime_sub->parsed()) return realtime.run(out);
    if (transfer_sub->parsed()) return transfer.run(out);
    if (sweep_sub->parsed()) return sweep_cmd.run(out);
  } catch (const std::exception& e) {
    return exit_for(e, err);
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dbar
