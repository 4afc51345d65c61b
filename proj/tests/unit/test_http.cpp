#include <doctest.h>

#include <httplib.h>

#include <json.hpp>

#include "dbar/datagen.hpp"
#include "dbar/error.hpp"
#include "dbar/http.hpp"
#include "support.hpp"

using namespace dbar;

namespace {

std::shared_ptr<MlpTarget> blob_target() {
  Rng drng(1);
  const auto ds = generate_dataset(DataKind::Blobs2d, 400, 0.05, drng);
  Rng trng(2);
  return std::make_shared<MlpTarget>(train_target(ds, {2, 16, 2}, 50, 1e-2, trng));
}

// Answers /meta honestly and /predict with a label outside [0, m).
class LyingServer {
 public:
  LyingServer() {
    server_.Get("/meta", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"d":2,"m":2})", "application/json");
    });
    server_.Post("/predict", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"label":7,"d":2,"m":2})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LyingServer() {
    server_.stop();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_;
};

}  // namespace

TEST_CASE("wire protocol") {
  auto target = blob_target();
  PredictServer server(target);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client cli("127.0.0.1", port);

  auto meta = cli.Get("/meta");
  REQUIRE(meta);
  CHECK(meta->status == 200);
  CHECK(meta->body == R"({"d":2,"m":2})");

  auto pred = cli.Post("/predict", R"({"x":[0.1,0.2]})", "application/json");
  REQUIRE(pred);
  CHECK(pred->status == 200);
  const auto expected = target->predict(Vec64{0.1, 0.2});
  CHECK(expected == 0u);
  CHECK(pred->body == R"({"label":0,"d":2,"m":2})");

  auto wrong = cli.Post("/predict", R"({"x":[0.1]})", "application/json");
  REQUIRE(wrong);
  CHECK(wrong->status == 400);
  CHECK(wrong->body == R"({"error":"dimension mismatch"})");

  auto junk = cli.Post("/predict", "not json", "application/json");
  REQUIRE(junk);
  CHECK(junk->status == 400);
  server.stop();
}

TEST_CASE("loopback agrees with in-process predictions") {
  auto target = blob_target();
  PredictServer server(target);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  {
    HttpOracle remote("http://127.0.0.1:" + std::to_string(port));
    CHECK(remote.input_dim() == 2);
    CHECK(remote.num_classes() == 2);

    Rng rng(12);
    QueryCounter counter(100);
    for (int i = 0; i < 100; ++i) {
      const Vec64 x{rng.uniform01(), rng.uniform01()};
      CHECK(predict_counted(remote, counter, x) == target->predict(x));
    }
    CHECK(counter.used() == 100u);
  }
  server.stop();
}

TEST_CASE("unreachable and lying servers") {
  HttpOptions fast;
  fast.timeout = std::chrono::milliseconds(200);
  fast.backoff = std::chrono::milliseconds(1);
  CHECK_THROWS_AS(HttpOracle("http://127.0.0.1:1", fast), OracleUnreachable);

  LyingServer liar;
  HttpOracle remote("http://127.0.0.1:" + std::to_string(liar.port()), fast);
  CHECK_THROWS_AS(remote.predict(Vec64{0.1, 0.2}), ProtocolViolation);
}

TEST_CASE("bind failure") {
  auto target = blob_target();
  PredictServer a(target);
  const int port = a.bind("127.0.0.1", 0);
  PredictServer b(target);
  CHECK_THROWS_AS(b.bind("127.0.0.1", port), IoError);
}
