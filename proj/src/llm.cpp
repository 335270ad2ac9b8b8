#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "propsel/llm.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace propsel {

const char* to_string(BackendErrorCode code) {
  switch (code) {
    case BackendErrorCode::timeout: return "Timeout";
    case BackendErrorCode::rate_limited: return "RateLimited";
    case BackendErrorCode::bad_request: return "BadRequest";
    case BackendErrorCode::malformed_response: return "MalformedResponse";
    case BackendErrorCode::server_error: return "ServerError";
    case BackendErrorCode::script_exhausted: return "ScriptExhausted";
    case BackendErrorCode::unknown_key: return "UnknownKey";
  }
  return "UnknownBackendError";
}

BackendError::BackendError(BackendErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void validate_chat_request(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw BackendError(BackendErrorCode::bad_request, "messages must be non-empty");
  }
  if (request.messages.back().role != "user") {
    throw BackendError(BackendErrorCode::bad_request, "last message role must be 'user'");
  }
  for (const ChatMessage& m : request.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      throw BackendError(BackendErrorCode::bad_request, "unknown role: " + m.role);
    }
  }
  if (request.temperature < 0.0) {
    throw BackendError(BackendErrorCode::bad_request, "temperature must be >= 0");
  }
  if (request.max_tokens < 1) {
    throw BackendError(BackendErrorCode::bad_request, "max_tokens must be positive");
  }
}

// ---------------------------------------------------------------------------
// MockBackend

std::shared_ptr<MockBackend> MockBackend::sequential(std::vector<std::string> script,
                                                     std::string model) {
  if (script.empty()) throw std::invalid_argument("mock script must be non-empty");
  auto backend = std::shared_ptr<MockBackend>(new MockBackend());
  backend->model_ = std::move(model);
  backend->script_.assign(script.begin(), script.end());
  return backend;
}

std::shared_ptr<MockBackend> MockBackend::keyed(std::map<std::string, std::string> responses,
                                                std::string model) {
  if (responses.empty()) throw std::invalid_argument("mock response map must be non-empty");
  auto backend = std::shared_ptr<MockBackend>(new MockBackend());
  backend->model_ = std::move(model);
  backend->keyed_ = true;
  backend->responses_ = std::move(responses);
  return backend;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
  const json spec = json::parse(read_text_file(path));
  const std::string mode = spec.value("mode", "sequential");
  const std::string model = spec.value("model", "mock");
  if (mode == "sequential") {
    std::vector<std::string> script;
    for (const json& entry : spec.at("responses")) script.push_back(entry.get<std::string>());
    return sequential(std::move(script), model);
  }
  if (mode == "keyed") {
    std::map<std::string, std::string> responses;
    for (const auto& [key, value] : spec.at("responses").items()) {
      responses[key] = value.get<std::string>();
    }
    return keyed(std::move(responses), model);
  }
  throw std::invalid_argument("mock file mode must be 'sequential' or 'keyed': " + mode);
}

std::string MockBackend::request_digest(const ChatRequest& request) {
  std::string bytes = request.model;
  bytes.push_back('\x1f');
  for (const ChatMessage& m : request.messages) {
    bytes += m.role;
    bytes.push_back('\x1e');
    bytes += m.content;
    bytes.push_back('\x1d');
  }
  return fnv1a64_hex(bytes);
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  validate_chat_request(request);
  std::string content;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    history_.push_back(request);
    if (keyed_) {
      const auto it = responses_.find(request_digest(request));
      if (it == responses_.end()) {
        throw BackendError(BackendErrorCode::unknown_key,
                           "no scripted response for digest " + request_digest(request));
      }
      content = it->second;
    } else {
      if (script_.empty()) {
        throw BackendError(BackendErrorCode::script_exhausted, "mock script is exhausted");
      }
      content = script_.front();
      script_.pop_front();
    }
  }
  ChatResponse response;
  response.content = content;
  for (const ChatMessage& m : request.messages) {
    response.prompt_tokens += static_cast<long long>(whitespace_token_count(m.content));
  }
  response.completion_tokens = static_cast<long long>(whitespace_token_count(content));
  return response;
}

int MockBackend::calls() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return calls_;
}

std::vector<ChatRequest> MockBackend::history() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return history_;
}

// ---------------------------------------------------------------------------
// Gate / ThrottledBackend

Gate::Gate(int max_concurrent) : available_(max_concurrent) {
  if (max_concurrent < 1) throw std::invalid_argument("gate capacity must be >= 1");
}

void Gate::acquire() {
  std::unique_lock<std::mutex> lock(mutex_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void Gate::release() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

namespace {
struct GateGuard {
  explicit GateGuard(Gate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateGuard() { gate_.release(); }
  Gate& gate_;
};
}  // namespace

ThrottledBackend::ThrottledBackend(BackendPtr inner, int max_in_flight)
    : inner_(std::move(inner)), gate_(max_in_flight) {}

ChatResponse ThrottledBackend::complete(const ChatRequest& request) {
  GateGuard guard(gate_);
  return inner_->complete(request);
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(BackendConfig config, std::string model)
    : config_(std::move(config)),
      model_(std::move(model)),
      gate_(config_.max_in_flight),
      rng_(std::random_device{}()) {
  sleeper_ = [](std::chrono::milliseconds delay) { std::this_thread::sleep_for(delay); };
}

void HttpBackend::seed_jitter(std::uint64_t seed) {
  std::lock_guard<std::mutex> lock(rng_mutex_);
  rng_.seed(seed);
}

HttpBackend::Exchange HttpBackend::http_post(const std::string& path, const std::string& body) {
  httplib::Client client(config_.base_url);
  const auto timeout = std::chrono::duration<double>(config_.timeout_s);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto micros =
      std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      client.set_default_headers({{"Authorization", std::string("Bearer ") + key}});
    }
  }
  const httplib::Result result = client.Post(path, body, "application/json");
  Exchange exchange;
  if (!result) {
    const auto err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write) {
      exchange.timed_out = true;
    }
    exchange.transport_error = httplib::to_string(err);
    return exchange;
  }
  exchange.status = result->status;
  exchange.body = result->body;
  return exchange;
}

std::chrono::milliseconds HttpBackend::backoff_delay(int retry_index) {
  // Full jitter: uniform over [0, base * 2^k], base 1 s.
  const double cap_ms = 1000.0 * static_cast<double>(1LL << retry_index);
  std::lock_guard<std::mutex> lock(rng_mutex_);
  std::uniform_real_distribution<double> dist(0.0, cap_ms);
  return std::chrono::milliseconds(static_cast<long long>(dist(rng_)));
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  validate_chat_request(request);
  json messages = json::array();
  for (const ChatMessage& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  const json payload = {
      {"model", request.model.empty() ? model_ : request.model},
      {"messages", messages},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
  };
  const std::string body = payload.dump();

  GateGuard guard(gate_);
  Exchange last;
  for (int attempt = 0;; ++attempt) {
    last = transport_ ? transport_("/chat/completions", body)
                      : http_post("/chat/completions", body);
    const bool retryable =
        last.timed_out || !last.transport_error.empty() || last.status == 429 ||
        (last.status >= 500 && last.status < 600);
    if (!retryable) break;
    if (attempt >= config_.max_retries) {
      if (last.status == 429) {
        throw BackendError(BackendErrorCode::rate_limited,
                           "HTTP 429 after " + std::to_string(attempt) + " retries");
      }
      if (last.timed_out || !last.transport_error.empty()) {
        throw BackendError(BackendErrorCode::timeout,
                           "transport failure after " + std::to_string(attempt) +
                               " retries: " + last.transport_error);
      }
      throw BackendError(BackendErrorCode::server_error,
                         "HTTP " + std::to_string(last.status) + " after " +
                             std::to_string(attempt) + " retries");
    }
    sleeper_(backoff_delay(attempt));
  }

  if (last.status >= 400 && last.status < 500) {
    throw BackendError(BackendErrorCode::bad_request,
                       "HTTP " + std::to_string(last.status) + ": " + last.body);
  }
  json parsed;
  try {
    parsed = json::parse(last.body);
  } catch (const json::parse_error& e) {
    throw BackendError(BackendErrorCode::malformed_response,
                       std::string("response body is not JSON: ") + e.what());
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty() ||
      !parsed["choices"][0].contains("message") ||
      !parsed["choices"][0]["message"].contains("content") ||
      !parsed["choices"][0]["message"]["content"].is_string()) {
    throw BackendError(BackendErrorCode::malformed_response,
                       "body lacks choices[0].message.content");
  }
  ChatResponse response;
  response.content = parsed["choices"][0]["message"]["content"].get<std::string>();
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    response.prompt_tokens = parsed["usage"].value("prompt_tokens", 0LL);
    response.completion_tokens = parsed["usage"].value("completion_tokens", 0LL);
  }
  return response;
}

ChatRequest single_user_request(std::string model, std::string prompt, double temperature,
                                int max_tokens) {
  ChatRequest request;
  request.model = std::move(model);
  request.messages.push_back({"user", std::move(prompt)});
  request.temperature = temperature;
  request.max_tokens = max_tokens;
  return request;
}

}  // namespace propsel
