#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "propsel/util.hpp"

namespace propsel {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;  // non-empty; last role must be "user"
  double temperature = 0.0;
  int max_tokens = 4096;
};

struct ChatResponse {
  std::string content;  // may be empty only if the backend returned an empty completion
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

struct BackendConfig {
  std::string base_url;
  std::string api_key_env;   // env var holding the key; never the key itself
  double timeout_s = 120.0;
  int max_retries = 3;
  int max_in_flight = 4;
};

enum class BackendErrorCode {
  timeout,
  rate_limited,
  bad_request,
  malformed_response,
  server_error,
  script_exhausted,
  unknown_key,
};

const char* to_string(BackendErrorCode code);

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendErrorCode code, const std::string& detail);
  BackendErrorCode code() const { return code_; }

 private:
  BackendErrorCode code_;
};

/// A completion backend handle. Shareable across concurrent callers; each
/// implementation bounds its own in-flight concurrency.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
  /// Model identifier substituted when a caller leaves ChatRequest.model empty.
  virtual std::string default_model() const { return name(); }
};

using BackendPtr = std::shared_ptr<Backend>;

/// Throws BackendError(bad_request) before any network traffic if the request
/// violates the message-shape invariants.
void validate_chat_request(const ChatRequest& request);

/// Deterministic offline backend. Sequential mode pops scripted responses in
/// order; keyed mode answers by a stable digest of (model, messages), so
/// identical request streams yield identical response streams regardless of
/// call interleaving.
class MockBackend : public Backend {
 public:
  static std::shared_ptr<MockBackend> sequential(std::vector<std::string> script,
                                                 std::string model = "mock");
  static std::shared_ptr<MockBackend> keyed(std::map<std::string, std::string> responses,
                                            std::string model = "mock");
  /// {"mode": "sequential"|"keyed", "model": str?, "responses": [...] | {digest: str}}
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

  static std::string request_digest(const ChatRequest& request);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return "mock:" + model_; }
  std::string default_model() const override { return model_; }

  int calls() const;
  std::vector<ChatRequest> history() const;

 private:
  MockBackend() = default;

  mutable std::mutex mutex_;
  std::string model_ = "mock";
  bool keyed_ = false;
  std::deque<std::string> script_;
  std::map<std::string, std::string> responses_;
  int calls_ = 0;
  std::vector<ChatRequest> history_;
};

/// Counting gate bounding concurrent entries.
class Gate {
 public:
  explicit Gate(int max_concurrent);
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

/// Decorator enforcing an in-flight bound around any backend; useful when the
/// inner backend is an instrumented stub.
class ThrottledBackend : public Backend {
 public:
  ThrottledBackend(BackendPtr inner, int max_in_flight);
  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return inner_->name(); }
  std::string default_model() const override { return inner_->default_model(); }

 private:
  BackendPtr inner_;
  Gate gate_;
};

/// OpenAI-compatible chat-completions client.
///
/// POST {base_url}/chat/completions with
///   {"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}
/// and reads choices[0].message.content plus usage token counts. Transient
/// failures (timeouts, HTTP 429/5xx) are retried up to max_retries with
/// exponential backoff (base 1 s, factor 2, full jitter); other 4xx are not
/// retried. The API key is read from the environment variable named in the
/// config at call time.
class HttpBackend : public Backend {
 public:
  struct Exchange {
    int status = 0;
    std::string body;
    bool timed_out = false;
    std::string transport_error;  // non-empty on connect/IO failure
  };
  using Transport = std::function<Exchange(const std::string& path, const std::string& body)>;
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpBackend(BackendConfig config, std::string model);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return "http:" + config_.base_url + "#" + model_; }
  std::string default_model() const override { return model_; }

  // Test seams: replace the wire and the clock.
  void set_transport(Transport transport) { transport_ = std::move(transport); }
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  void seed_jitter(std::uint64_t seed);

 private:
  Exchange http_post(const std::string& path, const std::string& body);
  std::chrono::milliseconds backoff_delay(int retry_index);

  BackendConfig config_;
  std::string model_;
  Transport transport_;
  Sleeper sleeper_;
  Gate gate_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Builds a ChatRequest with a single user message, the common shape for
/// one-shot prompt tasks.
ChatRequest single_user_request(std::string model, std::string prompt, double temperature,
                                int max_tokens);

}  // namespace propsel
