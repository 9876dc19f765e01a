#pragma once

#include <memory>
#include <string>
#include <utility>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"
#include "mirage/io/image_io.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/support/base64.hpp"

namespace mirage::models {

/// Caption-generation model treated as a black box: image plus question in,
/// text out. Images ride along as 16-bit PNG data URLs so adversarial
/// pixel values survive the trip.
class CaptionModel {
 public:
  CaptionModel(std::shared_ptr<ChatClient> client, std::string model_name,
               int max_tokens = 512)
      : client_(std::move(client)),
        model_name_(std::move(model_name)),
        max_tokens_(max_tokens) {
    if (!client_) throw InvalidInputError("caption model needs a client");
  }

  std::string generate_caption(const ImageTensor& image,
                               const std::string& question) const {
    ChatRequest request;
    request.model = model_name_;
    request.temperature = 0.0;
    request.max_tokens = max_tokens_;
    request.messages.push_back(
        {"user", question, support::base64_encode(io::encode_png16(image))});
    std::string answer = client_->complete(request);
    if (answer.empty()) {
      throw ProtocolError("caption model returned an empty answer");
    }
    return answer;
  }

  const std::string& model_name() const { return model_name_; }

 private:
  std::shared_ptr<ChatClient> client_;
  std::string model_name_;
  int max_tokens_;
};

/// Judge model: deterministic decoding (temperature 0, fixed max tokens),
/// raw text out for downstream verdict parsing.
class JudgeModel {
 public:
  JudgeModel(std::shared_ptr<ChatClient> client, std::string model_name,
             int max_tokens = 128)
      : client_(std::move(client)),
        model_name_(std::move(model_name)),
        max_tokens_(max_tokens) {
    if (!client_) throw InvalidInputError("judge model needs a client");
  }

  std::string complete(const std::string& prompt) const {
    ChatRequest request;
    request.model = model_name_;
    request.temperature = 0.0;
    request.max_tokens = max_tokens_;
    request.messages.push_back({"user", prompt, std::nullopt});
    std::string answer = client_->complete(request);
    if (answer.empty()) {
      throw ProtocolError("judge model returned an empty answer");
    }
    return answer;
  }

  const std::string& model_name() const { return model_name_; }

 private:
  std::shared_ptr<ChatClient> client_;
  std::string model_name_;
  int max_tokens_;
};

}  // namespace mirage::models
