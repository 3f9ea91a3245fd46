#pragma once

// Black-box score oracle: image in, class probabilities out. Every successful
// call is billed one query; failed calls are not billed.
//
// Remote transports share one JSON message set:
//   request  {"id": str, "shape": [H, W, C], "pixels": [H*W*C floats, row-major]}
//   response {"id": str, "probs": [K floats]}
//   error    {"id": str, "error": str}
// remote-http:  POST /query with a request body; GET /meta returns
//               {"classes": K, "input_shape": [H, W, C]}.
// remote-stdio: newline-delimited JSON on the child's stdin/stdout, one
//               response per request, in request order.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "freqattack/model.hpp"
#include "freqattack/tensor.hpp"

namespace freqattack {

class Oracle {
 public:
  virtual ~Oracle() = default;

  // Length-K probability vector (entries >= 0, sum 1 within 1e-6).
  std::vector<double> query(const Image& x);

  std::uint64_t queries() const { return queries_; }
  virtual int num_classes() const = 0;

 protected:
  virtual std::vector<double> evaluate(const Image& x) = 0;

 private:
  std::uint64_t queries_ = 0;
};

using OracleFactory = std::function<std::unique_ptr<Oracle>()>;

class BuiltinOracle final : public Oracle {
 public:
  explicit BuiltinOracle(std::shared_ptr<const MlpClassifier> model);
  int num_classes() const override { return model_->num_classes(); }

 protected:
  std::vector<double> evaluate(const Image& x) override;

 private:
  std::shared_ptr<const MlpClassifier> model_;
};

// Wraps an arbitrary scoring function; used for synthetic oracles.
class FunctionOracle final : public Oracle {
 public:
  using Fn = std::function<std::vector<double>(const Image&)>;
  FunctionOracle(int num_classes, Fn fn) : num_classes_(num_classes), fn_(std::move(fn)) {}
  int num_classes() const override { return num_classes_; }

 protected:
  std::vector<double> evaluate(const Image& x) override { return fn_(x); }

 private:
  int num_classes_;
  Fn fn_;
};

struct RemoteMeta {
  int classes = 0;
  Shape input_shape;
};

class HttpOracle final : public Oracle {
 public:
  // `endpoint` is "http://host:port". Fetches /meta at construction and
  // checks it against `expected_classes` when that is nonzero.
  HttpOracle(const std::string& endpoint, int expected_classes,
             std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~HttpOracle() override;
  int num_classes() const override { return meta_.classes; }
  const RemoteMeta& meta() const { return meta_; }

 protected:
  std::vector<double> evaluate(const Image& x) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  RemoteMeta meta_;
  std::uint64_t next_id_ = 0;
};

// Spawns `argv` as a child process and exchanges newline-delimited JSON.
class StdioOracle final : public Oracle {
 public:
  StdioOracle(std::vector<std::string> argv, int num_classes,
              std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~StdioOracle() override;
  int num_classes() const override { return num_classes_; }

 protected:
  std::vector<double> evaluate(const Image& x) override;

 private:
  std::string read_line();

  int num_classes_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
};

// Wire helpers shared by the clients and by protocol test servers.
nlohmann::json make_query_request(const std::string& id, const Image& x);
// Throws OracleError(kMalformedResponse) on a bad request.
Image parse_query_request(const nlohmann::json& request);
// Throws OracleError with the matching kind for errors, id mismatches and
// malformed bodies.
std::vector<double> parse_query_response(const nlohmann::json& response,
                                         const std::string& expected_id, int num_classes);

// Validates length, nonnegativity and normalization (1e-6).
void check_probabilities(const std::vector<double>& probs, int num_classes);

struct OracleSpec {
  enum class Kind { kBuiltin, kRemoteHttp, kRemoteStdio };
  Kind kind = Kind::kBuiltin;
  std::string target;  // checkpoint dir, http endpoint, or stdio command line
  int num_classes = 0;  // 0 = take from the checkpoint / remote meta
  double query_timeout_seconds = 30.0;

  static Kind parse_kind(const std::string& name);
  void validate() const;
};

// One fresh oracle per call, so each worker can own its own counter.
OracleFactory make_oracle_factory(const OracleSpec& spec);

}  // namespace freqattack
