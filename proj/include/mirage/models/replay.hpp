#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>

#include <json.hpp>

#include "mirage/errors.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/support/hash.hpp"

namespace mirage::models {

/// Stable fingerprint of a request: FNV-1a over its canonical JSON form.
/// Fixture files are named <fingerprint>.json.
inline std::string request_fingerprint(const ChatRequest& request) {
  return support::fnv1a64_hex(to_wire_json(request).dump());
}

/// Wraps another client and records every exchange into a fixture
/// directory for later replay.
class RecordingChatClient final : public ChatClient {
 public:
  RecordingChatClient(std::shared_ptr<ChatClient> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string complete(const ChatRequest& request) override {
    const std::string response = inner_->complete(request);
    const std::string fingerprint = request_fingerprint(request);
    nlohmann::json doc = {{"fingerprint", fingerprint},
                          {"request", to_wire_json(request)},
                          {"response", response}};
    // Write-then-rename: concurrent identical requests may record the same
    // fingerprint, and the final file must never be half-written.
    const auto final_path = dir_ / (fingerprint + ".json");
    const auto tmp_path =
        dir_ / (fingerprint + ".tmp-" +
                std::to_string(seq_.fetch_add(1, std::memory_order_relaxed)));
    {
      std::ofstream out(tmp_path, std::ios::binary);
      if (!out) {
        throw IoError("cannot write fixture " + tmp_path.string());
      }
      out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp_path, final_path);
    return response;
  }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::filesystem::path dir_;
  std::atomic<std::uint64_t> seq_{0};
};

/// Answers requests from a directory of recorded exchanges. A request with
/// no recorded response is a transport error — replay runs are meant to be
/// fully offline.
class ReplayChatClient final : public ChatClient {
 public:
  explicit ReplayChatClient(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) {
      throw IoError("replay fixture directory missing: " + dir_.string());
    }
  }

  std::string complete(const ChatRequest& request) override {
    const std::string fingerprint = request_fingerprint(request);
    const auto path = dir_ / (fingerprint + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw TransportError("no recorded response for request " + fingerprint +
                               " in " + dir_.string(),
                           /*attempts=*/1);
    }
    nlohmann::json doc;
    in >> doc;
    if (!doc.contains("response") || !doc["response"].is_string()) {
      throw ProtocolError("fixture " + path.string() + " has no response field");
    }
    return doc["response"].get<std::string>();
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace mirage::models
