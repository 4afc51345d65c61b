#include "dbar/http.hpp"

#include <httplib.h>

#include <json.hpp>

#include "dbar/error.hpp"

namespace dbar {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(ordered_json{{"error", message}}.dump(), "application/json");
}

}  // namespace

PredictServer::PredictServer(std::shared_ptr<const Oracle> model)
    : model_(std::move(model)), server_(std::make_unique<httplib::Server>()) {
  server_->set_tcp_nodelay(true);
  server_->set_keep_alive_timeout(1);
  server_->Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
    ordered_json body{{"d", model_->input_dim()}, {"m", model_->num_classes()}};
    res.set_content(body.dump(), "application/json");
  });

  server_->Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    Vec64 x;
    try {
      const auto body = json::parse(req.body);
      if (!body.is_object() || !body.contains("x") || !body["x"].is_array()) {
        return reply_error(res, 400, "malformed input");
      }
      for (const auto& v : body["x"]) {
        if (!v.is_number()) return reply_error(res, 400, "malformed input");
        x.push_back(v.get<double>());
      }
    } catch (const json::exception&) {
      return reply_error(res, 400, "malformed input");
    }
    if (x.size() != model_->input_dim()) return reply_error(res, 400, "dimension mismatch");
    ordered_json body{{"label", model_->predict(x)}, {"d", model_->input_dim()}, {"m", model_->num_classes()}};
    res.set_content(body.dump(), "application/json");
  });
}

PredictServer::~PredictServer() { stop(); }

int PredictServer::bind(const std::string& host, int port) {
  // httplib defaults to SO_REUSEPORT, which would let two servers share a port.
  server_->set_socket_options([](auto sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ < 0) throw IoError("cannot bind " + host + " on any port");
  } else {
    if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    port_ = port;
  }
  return port_;
}

void PredictServer::run() {
  if (port_ < 0) throw IoError("server is not bound");
  server_->listen_after_bind();
}

void PredictServer::start() {
  if (port_ < 0) throw IoError("server is not bound");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void PredictServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void serve_http(PredictServer& server, const std::string& host, int port) {
  server.bind(host, port);
  server.run();
}

HttpOracle::HttpOracle(const std::string& url, HttpOptions options)
    : url_(url), options_(options), client_(std::make_unique<httplib::Client>(url)) {
  if (!client_->is_valid()) throw OracleUnreachable("invalid oracle URL '" + url + "'");
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client_->set_connection_timeout(secs.count(), usecs.count());
  client_->set_read_timeout(secs.count(), usecs.count());
  client_->set_keep_alive(true);
  client_->set_tcp_nodelay(true);

  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff);
    auto res = client_->Get("/meta");
    if (!res || res->status != 200) continue;
    try {
      const auto body = json::parse(res->body);
      d_ = body.at("d").get<std::size_t>();
      m_ = body.at("m").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ProtocolViolation(std::string("malformed /meta response: ") + e.what());
    }
    if (d_ == 0 || m_ == 0) throw ProtocolViolation("/meta reports an empty model");
    return;
  }
  throw OracleUnreachable("oracle at '" + url + "' unreachable after " + std::to_string(options_.attempts) +
                          " attempts");
}

HttpOracle::~HttpOracle() = default;

Label HttpOracle::predict(std::span<const double> x) const {
  if (x.size() != d_) throw InvalidArgument("query has length " + std::to_string(x.size()));
  const std::string payload = json{{"x", Vec64(x.begin(), x.end())}}.dump();

  std::lock_guard lock(mu_);
  for (int attempt = 0; attempt < options_.attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.backoff);
    auto res = client_->Post("/predict", payload, "application/json");
    if (!res || res->status >= 500) continue;
    if (res->status != 200) throw ProtocolViolation("oracle rejected query: " + res->body);
    std::int64_t label = 0;
    try {
      label = json::parse(res->body).at("label").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw ProtocolViolation(std::string("malformed /predict response: ") + e.what());
    }
    if (label < 0 || static_cast<std::size_t>(label) >= m_) {
      throw ProtocolViolation("oracle returned label " + std::to_string(label) + " outside [0, " +
                              std::to_string(m_) + ")");
    }
    return static_cast<Label>(label);
  }
  throw OracleUnreachable("oracle at '" + url_ + "' unreachable after " + std::to_string(options_.attempts) +
                          " attempts");
}

}  // namespace dbar
