#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/errors.hpp"

namespace mirage::models {

/// One chat turn. `image_png_base64`, when present, rides along as an
/// OpenAI-style data-URL content part.
struct ChatMessage {
  std::string role = "user";
  std::string text;
  std::optional<std::string> image_png_base64;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
};

/// Canonical JSON form of a request; also the wire body sent to chat
/// endpoints and the basis of record/replay fingerprints.
inline nlohmann::json to_wire_json(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    if (m.image_png_base64) {
      messages.push_back(
          {{"role", m.role},
           {"content",
            nlohmann::json::array(
                {{{"type", "text"}, {"text", m.text}},
                 {{"type", "image_url"},
                  {"image_url",
                   {{"url", "data:image/png;base64," + *m.image_png_base64}}}}})}});
    } else {
      messages.push_back({{"role", m.role}, {"content", m.text}});
    }
  }
  return {{"model", request.model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

/// Chat-completion client contract. Implementations must tolerate
/// concurrent calls; each request is independent.
class ChatClient {
 public:
  virtual ~ChatClient() = default;

  /// Returns the assistant message text. Throws TransportError after
  /// exhausted retries and ProtocolError on malformed or empty replies.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Scriptable in-memory client for tests and offline fixtures.
class MockChatClient final : public ChatClient {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit MockChatClient(Responder responder) : responder_(std::move(responder)) {}

  /// Always answers with the same text.
  static std::shared_ptr<MockChatClient> fixed(std::string reply) {
    return std::make_shared<MockChatClient>(
        [reply = std::move(reply)](const ChatRequest&) { return reply; });
  }

  std::string complete(const ChatRequest& request) override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return responder_(request);
  }

  int calls() const { return calls_.load(std::memory_order_relaxed); }

 private:
  Responder responder_;
  std::atomic<int> calls_{0};
};

}  // namespace mirage::models
