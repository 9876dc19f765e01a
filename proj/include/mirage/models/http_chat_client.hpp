#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mirage/errors.hpp"
#include "mirage/models/chat_client.hpp"

namespace mirage::models {

struct HttpClientConfig {
  /// Base URL, e.g. "http://localhost:8000". The completion path is posted
  /// relative to it.
  std::string base_url;
  std::string completion_path = "/v1/chat/completions";
  std::string api_key;
  /// When set and the named variable exists, it overrides api_key.
  std::string api_key_env;
  int max_attempts = 3;
  int backoff_initial_ms = 200;
  double backoff_multiplier = 2.0;
  int timeout_seconds = 120;
  /// Upper bound on concurrent in-flight requests.
  int max_in_flight = 4;
};

/// Chat-completion client over HTTP. Retries with exponential backoff on
/// connection failures, HTTP 429 and 5xx; other statuses are protocol
/// errors and not retried.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config)
      : config_(std::move(config)),
        in_flight_(std::max(1, config_.max_in_flight)) {
    if (const char* env = config_.api_key_env.empty()
                              ? nullptr
                              : std::getenv(config_.api_key_env.c_str())) {
      config_.api_key = env;
    }
  }

  std::string complete(const ChatRequest& request) override {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& sem;
      ~Release() { sem.release(); }
    } release{in_flight_};

    const std::string body = to_wire_json(request).dump();
    httplib::Headers headers = {{"Content-Type", "application/json"}};
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    int backoff_ms = config_.backoff_initial_ms;
    int last_status = 0;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);

      auto res = client.Post(config_.completion_path, headers, body, "application/json");
      if (res) {
        last_status = res->status;
        if (res->status == 200) {
          return extract_content(res->body);
        }
        const bool retryable = res->status == 429 || res->status >= 500;
        if (!retryable) {
          throw ProtocolError("chat endpoint returned HTTP " +
                              std::to_string(res->status) + ": " + res->body);
        }
      }
      if (attempt < config_.max_attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms = static_cast<int>(backoff_ms * config_.backoff_multiplier);
      }
    }
    throw TransportError("chat endpoint " + config_.base_url + " unreachable after " +
                             std::to_string(config_.max_attempts) + " attempts",
                         config_.max_attempts, last_status);
  }

  const HttpClientConfig& config() const { return config_; }

 private:
  static std::string extract_content(const std::string& body) {
    const auto parsed = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_object() || !parsed.contains("choices") ||
        !parsed["choices"].is_array() || parsed["choices"].empty()) {
      throw ProtocolError("chat reply lacks choices: " + body);
    }
    const auto& message = parsed["choices"][0]["message"];
    if (!message.is_object() || !message.contains("content") ||
        !message["content"].is_string()) {
      throw ProtocolError("chat reply lacks message content: " + body);
    }
    std::string content = message["content"].get<std::string>();
    if (content.empty()) {
      throw ProtocolError("chat reply has empty content");
    }
    return content;
  }

  HttpClientConfig config_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace mirage::models
