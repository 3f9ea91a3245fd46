#include "freqattack/oracle.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>

#include <httplib.h>

#include "freqattack/errors.hpp"
#include "freqattack/io.hpp"

namespace freqattack {

using Kind = OracleError::Kind;

void check_probabilities(const std::vector<double>& probs, int num_classes) {
  if (probs.size() != static_cast<std::size_t>(num_classes)) {
    throw OracleError(Kind::kWrongClassCount, "oracle returned " + std::to_string(probs.size()) +
                                                  " probabilities, expected " +
                                                  std::to_string(num_classes));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw OracleError(Kind::kMalformedResponse, "oracle returned an invalid probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw OracleError(Kind::kMalformedResponse, "oracle probabilities do not sum to 1");
  }
}

std::vector<double> Oracle::query(const Image& x) {
  std::vector<double> probs = evaluate(x);
  check_probabilities(probs, num_classes());
  ++queries_;
  return probs;
}

BuiltinOracle::BuiltinOracle(std::shared_ptr<const MlpClassifier> model) : model_(std::move(model)) {
  if (!model_) throw ConfigError("builtin oracle: no model");
}

std::vector<double> BuiltinOracle::evaluate(const Image& x) { return model_->forward(x.tensor()); }

nlohmann::json make_query_request(const std::string& id, const Image& x) {
  return {{"id", id}, {"shape", x.tensor().shape()}, {"pixels", x.tensor().data()}};
}

Image parse_query_request(const nlohmann::json& request) {
  try {
    Shape shape = request.at("shape").get<Shape>();
    std::vector<double> pixels = request.at("pixels").get<std::vector<double>>();
    return Image(Tensor(std::move(shape), std::move(pixels)));
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(Kind::kMalformedResponse, std::string("malformed query request: ") + e.what());
  } catch (const ConfigError& e) {
    throw OracleError(Kind::kMalformedResponse, std::string("invalid query image: ") + e.what());
  }
}

std::vector<double> parse_query_response(const nlohmann::json& response,
                                         const std::string& expected_id, int num_classes) {
  if (!response.is_object() || !response.contains("id")) {
    throw OracleError(Kind::kMalformedResponse, "oracle response lacks an id");
  }
  if (response["id"] != expected_id) {
    throw OracleError(Kind::kMalformedResponse, "oracle response id mismatch: expected " +
                                                    expected_id + ", got " +
                                                    response["id"].dump());
  }
  if (response.contains("error")) {
    throw OracleError(Kind::kRemote, "oracle error: " + response["error"].dump());
  }
  std::vector<double> probs;
  try {
    probs = response.at("probs").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(Kind::kMalformedResponse, std::string("malformed oracle response: ") + e.what());
  }
  check_probabilities(probs, num_classes);
  return probs;
}

namespace {

nlohmann::json parse_json(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(Kind::kMalformedResponse, std::string("oracle sent invalid JSON: ") + e.what());
  }
}

}  // namespace

struct HttpOracle::Impl {
  httplib::Client client;
  std::chrono::milliseconds timeout;

  Impl(const std::string& endpoint, std::chrono::milliseconds t) : client(endpoint), timeout(t) {
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
  }

  [[noreturn]] void fail(httplib::Error error, std::chrono::steady_clock::time_point start) const {
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (error == httplib::Error::ConnectionTimeout ||
        (error == httplib::Error::Read && elapsed >= timeout)) {
      throw OracleError(Kind::kTimeout, "oracle request timed out");
    }
    throw OracleError(Kind::kTransport, "oracle transport failure: " + httplib::to_string(error));
  }
};

HttpOracle::HttpOracle(const std::string& endpoint, int expected_classes,
                       std::chrono::milliseconds timeout) {
  if (endpoint.rfind("http://", 0) != 0) {
    throw ConfigError("http oracle endpoint must start with http:// (got '" + endpoint + "')");
  }
  impl_ = std::make_unique<Impl>(endpoint, timeout);
  const auto start = std::chrono::steady_clock::now();
  auto res = impl_->client.Get("/meta");
  if (!res) impl_->fail(res.error(), start);
  if (res->status != 200) {
    throw OracleError(Kind::kTransport, "GET /meta returned HTTP " + std::to_string(res->status));
  }
  const nlohmann::json meta = parse_json(res->body);
  try {
    meta_.classes = meta.at("classes").get<int>();
    meta_.input_shape = meta.at("input_shape").get<Shape>();
  } catch (const nlohmann::json::exception& e) {
    throw OracleError(Kind::kMalformedResponse, std::string("malformed /meta: ") + e.what());
  }
  if (meta_.classes < 2) throw OracleError(Kind::kMalformedResponse, "/meta reports fewer than 2 classes");
  if (expected_classes != 0 && expected_classes != meta_.classes) {
    throw OracleError(Kind::kWrongClassCount, "/meta reports " + std::to_string(meta_.classes) +
                                                  " classes, expected " +
                                                  std::to_string(expected_classes));
  }
}

HttpOracle::~HttpOracle() = default;

std::vector<double> HttpOracle::evaluate(const Image& x) {
  if (x.tensor().shape() != meta_.input_shape) {
    throw ConfigError("http oracle: image shape does not match the remote input shape");
  }
  const std::string id = std::to_string(next_id_++);
  const std::string body = make_query_request(id, x).dump();
  const auto start = std::chrono::steady_clock::now();
  auto res = impl_->client.Post("/query", body, "application/json");
  if (!res) impl_->fail(res.error(), start);
  if (res->status != 200) {
    // Error responses still carry the protocol error object when possible.
    try {
      const auto j = nlohmann::json::parse(res->body);
      if (j.contains("error")) throw OracleError(Kind::kRemote, "oracle error: " + j["error"].dump());
    } catch (const nlohmann::json::exception&) {
    }
    throw OracleError(Kind::kTransport, "POST /query returned HTTP " + std::to_string(res->status));
  }
  return parse_query_response(parse_json(res->body), id, meta_.classes);
}

StdioOracle::StdioOracle(std::vector<std::string> argv, int num_classes,
                         std::chrono::milliseconds timeout)
    : num_classes_(num_classes), timeout_(timeout) {
  if (argv.empty()) throw ConfigError("stdio oracle: empty command");
  if (num_classes_ < 2) throw ConfigError("stdio oracle: class count must be >= 2");
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw OracleError(Kind::kTransport, std::string("socketpair: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (std::string& a : argv) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw OracleError(Kind::kTransport, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(fds[1]);
  pid_ = pid;
  to_child_ = fds[0];
  from_child_ = fds[0];
}

StdioOracle::~StdioOracle() {
  if (to_child_ >= 0) {
    ::shutdown(to_child_, SHUT_WR);
    ::close(to_child_);
  }
  if (pid_ > 0) {
    // Give the child a moment to exit on EOF before forcing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

std::string StdioOracle::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string line = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) throw OracleError(Kind::kTimeout, "stdio oracle timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready == 0) throw OracleError(Kind::kTimeout, "stdio oracle timed out");
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw OracleError(Kind::kTransport, std::string("poll: ") + std::strerror(errno));
    }
    char chunk[65536];
    const ssize_t got = ::recv(from_child_, chunk, sizeof chunk, 0);
    if (got == 0) throw OracleError(Kind::kTransport, "stdio oracle process closed its output");
    if (got < 0) {
      if (errno == EINTR) continue;
      throw OracleError(Kind::kTransport, std::string("read: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

std::vector<double> StdioOracle::evaluate(const Image& x) {
  const std::string id = std::to_string(next_id_++);
  const std::string line = make_query_request(id, x).dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError(Kind::kTransport, std::string("stdio oracle write: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
  return parse_query_response(parse_json(read_line()), id, num_classes_);
}

OracleSpec::Kind OracleSpec::parse_kind(const std::string& name) {
  if (name == "builtin") return Kind::kBuiltin;
  if (name == "remote-http" || name == "http") return Kind::kRemoteHttp;
  if (name == "remote-stdio" || name == "stdio") return Kind::kRemoteStdio;
  throw ConfigError("unknown oracle kind '" + name + "' (builtin, remote-http, remote-stdio)");
}

void OracleSpec::validate() const {
  if (num_classes != 0 && num_classes < 2) throw ConfigError("oracle: class count must be >= 2");
  if (!(query_timeout_seconds > 0.0)) throw ConfigError("oracle: timeout must be positive");
  if (target.empty()) throw ConfigError("oracle: missing checkpoint, endpoint or command");
  if (kind == Kind::kRemoteHttp && target.rfind("http://", 0) != 0) {
    throw ConfigError("oracle: http endpoint must start with http://");
  }
  if (kind == Kind::kRemoteStdio && num_classes == 0) {
    throw ConfigError("oracle: stdio oracles need an explicit class count");
  }
}

OracleFactory make_oracle_factory(const OracleSpec& spec) {
  spec.validate();
  const auto timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(std::llround(spec.query_timeout_seconds * 1000.0)));
  switch (spec.kind) {
    case OracleSpec::Kind::kBuiltin: {
      auto model = std::make_shared<const MlpClassifier>(load_checkpoint(spec.target));
      if (spec.num_classes != 0 && spec.num_classes != model->num_classes()) {
        throw ConfigError("oracle: checkpoint class count differs from the configured one");
      }
      return [model] { return std::make_unique<BuiltinOracle>(model); };
    }
    case OracleSpec::Kind::kRemoteHttp:
      return [spec, timeout] {
        return std::make_unique<HttpOracle>(spec.target, spec.num_classes, timeout);
      };
    case OracleSpec::Kind::kRemoteStdio: {
      std::vector<std::string> argv;
      std::istringstream words(spec.target);
      for (std::string w; words >> w;) argv.push_back(w);
      return [argv, spec, timeout] {
        return std::make_unique<StdioOracle>(argv, spec.num_classes, timeout);
      };
    }
  }
  throw ConfigError("oracle: unknown kind");
}

}  // namespace freqattack
