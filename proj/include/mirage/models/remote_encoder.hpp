#pragma once

#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"
#include "mirage/models/encoder.hpp"

namespace mirage::models {

/// HTTP adapter for an out-of-process vision encoder, e.g. a GPU host
/// wrapping a real vision tower. Wire contract (all JSON):
///
///   GET  /descriptor        -> EncoderDescriptor fields
///   POST /encode            {"height","width","channels","pixels"}
///                           -> {"num_patches","dim","values"}
///   POST /pixel_gradient    {"image":{...as above...},"cotangent":[...]}
///                           -> {"values":[...]}
///
/// Pixels and gradients travel as JSON numbers; nlohmann round-trips
/// doubles exactly, so nothing is lost in transit.
class RemoteEncoder final : public VisionEncoder {
 public:
  explicit RemoteEncoder(std::string base_url, int timeout_seconds = 300)
      : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    const auto doc = get_json("/descriptor");
    desc_.name = doc.value("name", "remote");
    desc_.input_height = doc.at("input_height").get<int>();
    desc_.input_width = doc.at("input_width").get<int>();
    desc_.channels = doc.value("channels", 3);
    desc_.patch_size = doc.at("patch_size").get<int>();
    desc_.embedding_dim = doc.at("embedding_dim").get<int>();
    desc_.differentiable = doc.value("differentiable", false);
    desc_.embedding_stage = doc.value("embedding_stage", "");
    if (desc_.patch_size <= 0 || desc_.embedding_dim <= 0 ||
        desc_.input_height % desc_.patch_size != 0 ||
        desc_.input_width % desc_.patch_size != 0) {
      throw ProtocolError("encoder endpoint advertises an inconsistent descriptor: " +
                          std::to_string(desc_.input_height) + "x" +
                          std::to_string(desc_.input_width) + " with patch size " +
                          std::to_string(desc_.patch_size));
    }
  }

  const EncoderDescriptor& descriptor() const override { return desc_; }

  PatchEmbeddings encode(const ImageTensor& image) const override {
    const ImageTensor input = conform_input(image);
    const auto doc = post_json("/encode", image_json(input));
    PatchEmbeddings out;
    out.num_patches = doc.at("num_patches").get<int>();
    out.dim = doc.at("dim").get<int>();
    out.values = doc.at("values").get<std::vector<double>>();
    if (out.values.size() !=
        static_cast<std::size_t>(out.num_patches) * out.dim) {
      throw ProtocolError("encoder endpoint returned inconsistent embedding sizes");
    }
    return out;
  }

  PixelArray pixel_gradient(const ImageTensor& image,
                            std::span<const double> cotangent) const override {
    if (!desc_.differentiable) {
      throw CapabilityError("remote encoder '" + desc_.name +
                            "' does not expose pixel gradients");
    }
    const ImageTensor input = conform_input(image);
    nlohmann::json body = {
        {"image", image_json(input)},
        {"cotangent", std::vector<double>(cotangent.begin(), cotangent.end())}};
    const auto doc = post_json("/pixel_gradient", body);
    PixelArray grad;
    grad.shape = input.shape();
    grad.values = doc.at("values").get<std::vector<double>>();
    if (grad.values.size() != input.pixels().size()) {
      throw ProtocolError("encoder endpoint returned a gradient of wrong size");
    }
    return grad;
  }

 private:
  static nlohmann::json image_json(const ImageTensor& image) {
    return {{"height", image.shape().height},
            {"width", image.shape().width},
            {"channels", image.shape().channels},
            {"pixels", std::vector<double>(image.pixels().begin(),
                                           image.pixels().end())}};
  }

  nlohmann::json get_json(const std::string& path) const {
    httplib::Client client(base_url_);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Get(path);
    if (!res) {
      throw TransportError("encoder endpoint " + base_url_ + path + " unreachable", 1);
    }
    if (res->status != 200) {
      throw ProtocolError("encoder endpoint " + path + " returned HTTP " +
                          std::to_string(res->status));
    }
    return parse_body(res->body, path);
  }

  nlohmann::json post_json(const std::string& path, const nlohmann::json& body) const {
    httplib::Client client(base_url_);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      throw TransportError("encoder endpoint " + base_url_ + path + " unreachable", 1);
    }
    if (res->status != 200) {
      throw ProtocolError("encoder endpoint " + path + " returned HTTP " +
                          std::to_string(res->status));
    }
    return parse_body(res->body, path);
  }

  static nlohmann::json parse_body(const std::string& body, const std::string& path) {
    auto doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
      throw ProtocolError("encoder endpoint " + path + " returned invalid JSON");
    }
    return doc;
  }

  std::string base_url_;
  int timeout_seconds_;
  EncoderDescriptor desc_;
};

}  // namespace mirage::models
