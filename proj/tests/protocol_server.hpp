#pragma once

// In-process HTTP oracle server speaking the query protocol, for tests.

#include <atomic>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "freqattack/model.hpp"
#include "freqattack/oracle.hpp"

namespace testsupport {

class HttpOracleServer {
 public:
  // Returns the full response object for a parsed request.
  using Handler = std::function<nlohmann::json(const nlohmann::json& request)>;

  HttpOracleServer(int classes, freqattack::Shape shape, Handler handler)
      : classes_(classes), shape_(std::move(shape)), handler_(std::move(handler)) {
    server_.Get("/meta", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"classes", classes_}, {"input_shape", shape_}}.dump(),
                      "application/json");
    });
    server_.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      nlohmann::json request;
      try {
        request = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::exception&) {
        res.status = 400;
        res.set_content(nlohmann::json{{"id", nullptr}, {"error", "malformed JSON"}}.dump(),
                        "application/json");
        return;
      }
      res.set_content(handler_(request).dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~HttpOracleServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }

  // Serves a model's forward pass; shape errors become protocol errors.
  static Handler model_handler(std::shared_ptr<const freqattack::MlpClassifier> model) {
    return [model](const nlohmann::json& request) -> nlohmann::json {
      const auto id = request.value("id", std::string());
      try {
        const freqattack::Image x = freqattack::parse_query_request(request);
        if (x.tensor().shape() != model->input_shape()) return {{"id", id}, {"error", "shape mismatch"}};
        return {{"id", id}, {"probs", model->forward(x.tensor())}};
      } catch (const std::exception& e) {
        return {{"id", id}, {"error", e.what()}};
      }
    };
  }

 private:
  int classes_;
  freqattack::Shape shape_;
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
};

}  // namespace testsupport
