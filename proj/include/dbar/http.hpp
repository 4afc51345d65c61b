#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "dbar/oracle.hpp"

namespace httplib {
class Server;
class Client;
}  // namespace httplib

namespace dbar {

/// Serves an oracle over the JSON wire protocol:
///   GET  /meta     -> {"d":<int>,"m":<int>}
///   POST /predict  {"x":[...]} -> {"label":<int>,"d":<int>,"m":<int>}
///                  400 {"error":"..."} on malformed input or wrong length
class PredictServer {
 public:
  explicit PredictServer(std::shared_ptr<const Oracle> model);
  ~PredictServer();

  PredictServer(const PredictServer&) = delete;
  PredictServer& operator=(const PredictServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port.
  /// Throws IoError when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void run();
  /// Serves on a background thread; returns once the server accepts requests.
  void start();
  void stop();

  int port() const { return port_; }

 private:
  std::shared_ptr<const Oracle> model_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

/// Blocking convenience wrapper: bind, then serve until stop() is called
/// on the returned server from another thread or a signal handler.
void serve_http(PredictServer& server, const std::string& host, int port);

struct HttpOptions {
  int attempts = 3;
  std::chrono::milliseconds timeout{2000};
  std::chrono::milliseconds backoff{50};
};

/// Oracle backed by a remote PredictServer. Transport retries happen inside
/// predict(), so a retried query still counts once at the QueryCounter.
class HttpOracle final : public Oracle {
 public:
  /// Fetches /meta; throws OracleUnreachable when it cannot.
  explicit HttpOracle(const std::string& url, HttpOptions options = {});
  ~HttpOracle() override;

  Label predict(std::span<const double> x) const override;
  std::size_t input_dim() const override { return d_; }
  std::size_t num_classes() const override { return m_; }

 private:
  std::string url_;
  HttpOptions options_;
  std::unique_ptr<httplib::Client> client_;
  mutable std::mutex mu_;
  std::size_t d_ = 0;
  std::size_t m_ = 0;
};

}  // namespace dbar
