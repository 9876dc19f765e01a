#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/attack/attack.hpp"
#include "mirage/errors.hpp"
#include "mirage/eval/evaluate.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/models/encoder.hpp"
#include "mirage/models/fixture_clients.hpp"
#include "mirage/models/http_chat_client.hpp"
#include "mirage/models/remote_encoder.hpp"
#include "mirage/models/replay.hpp"
#include "mirage/models/toy_encoder.hpp"

namespace mirage::pipeline {

/// Which encoder backs the run: the built-in deterministic toy encoder or
/// an out-of-process adapter endpoint.
struct EncoderSelection {
  enum class Kind { toy, remote };
  Kind kind = Kind::toy;
  models::ToyEncoderSpec toy;
  std::string remote_url;
};

/// Which client backs a model role.
///   http     — chat-completion endpoint (base_url, model, auth)
///   replay   — recorded fixtures from replay_dir
///   fixture  — caption fixtures file (captions only)
///   emulated — deterministic built-in judge (judge only)
/// record_dir, when set, wraps the client and records every exchange.
struct ClientSelection {
  enum class Kind { http, replay, fixture, emulated };
  Kind kind = Kind::http;
  models::HttpClientConfig http;
  std::filesystem::path replay_dir;
  std::filesystem::path fixture_file;
  std::filesystem::path record_dir;
};

struct RunConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path output_dir;
  EncoderSelection encoder;
  attack::AttackConfig attack;
  ClientSelection caption_client;
  ClientSelection judge_client;
  std::string caption_model = "caption-model";
  std::string judge_model = "judge-model";
  int caption_max_tokens = 512;
  int judge_max_tokens = 128;
  int concurrency = 1;
  std::vector<std::string> report_formats = {"csv"};
  eval::EvaluationPolicy eval_policy;
};

/// Learning-rate label used in rate-table keys and reports ("0.001").
inline std::string format_learning_rate(double lr) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", lr);
  return buf;
}

// --- config echo -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const attack::AttackConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"tau_l", c.tau_l},
          {"tau_c", c.tau_c},
          {"max_iterations", c.max_iterations},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"seed", c.seed}};
}

inline attack::AttackConfig attack_config_from_json(const nlohmann::json& j) {
  attack::AttackConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.tau_l = j.value("tau_l", c.tau_l);
  c.tau_c = j.value("tau_c", c.tau_c);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline nlohmann::ordered_json to_json(const models::EncoderDescriptor& d) {
  return {{"name", d.name},
          {"input_height", d.input_height},
          {"input_width", d.input_width},
          {"channels", d.channels},
          {"patch_size", d.patch_size},
          {"embedding_dim", d.embedding_dim},
          {"differentiable", d.differentiable},
          {"embedding_stage", d.embedding_stage}};
}

inline nlohmann::ordered_json to_json(const EncoderSelection& e) {
  if (e.kind == EncoderSelection::Kind::remote) {
    return {{"kind", "remote"}, {"url", e.remote_url}};
  }
  return {{"kind", "toy"},
          {"input_height", e.toy.input_height},
          {"input_width", e.toy.input_width},
          {"channels", e.toy.channels},
          {"patch_size", e.toy.patch_size},
          {"embedding_dim", e.toy.embedding_dim},
          {"weight_seed", e.toy.weight_seed},
          {"nonlinearity",
           e.toy.nonlinearity == models::Nonlinearity::smooth_tanh ? "smooth-tanh" : "none"}};
}

inline EncoderSelection encoder_selection_from_json(const nlohmann::json& j) {
  EncoderSelection e;
  if (j.value("kind", "toy") == "remote") {
    e.kind = EncoderSelection::Kind::remote;
    e.remote_url = j.at("url").get<std::string>();
    return e;
  }
  e.kind = EncoderSelection::Kind::toy;
  e.toy.input_height = j.value("input_height", e.toy.input_height);
  e.toy.input_width = j.value("input_width", e.toy.input_width);
  e.toy.channels = j.value("channels", e.toy.channels);
  e.toy.patch_size = j.value("patch_size", e.toy.patch_size);
  e.toy.embedding_dim = j.value("embedding_dim", e.toy.embedding_dim);
  e.toy.weight_seed = j.value("weight_seed", e.toy.weight_seed);
  e.toy.nonlinearity = j.value("nonlinearity", "none") == std::string("smooth-tanh")
                           ? models::Nonlinearity::smooth_tanh
                           : models::Nonlinearity::none;
  return e;
}

inline nlohmann::ordered_json to_json(const ClientSelection& c) {
  nlohmann::ordered_json out;
  switch (c.kind) {
    case ClientSelection::Kind::http:
      out = {{"kind", "http"},
             {"base_url", c.http.base_url},
             {"completion_path", c.http.completion_path},
             {"max_attempts", c.http.max_attempts},
             {"max_in_flight", c.http.max_in_flight}};
      break;
    case ClientSelection::Kind::replay:
      out = {{"kind", "replay"}, {"replay_dir", c.replay_dir.string()}};
      break;
    case ClientSelection::Kind::fixture:
      out = {{"kind", "fixture"}, {"fixture_file", c.fixture_file.string()}};
      break;
    case ClientSelection::Kind::emulated:
      out = {{"kind", "emulated"}};
      break;
  }
  if (!c.record_dir.empty()) out["record_dir"] = c.record_dir.string();
  return out;
}

inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
  return {{"manifest", cfg.manifest_path.string()},
          {"output_dir", cfg.output_dir.string()},
          {"encoder", to_json(cfg.encoder)},
          {"attack", to_json(cfg.attack)},
          {"caption_client", to_json(cfg.caption_client)},
          {"judge_client", to_json(cfg.judge_client)},
          {"caption_model", cfg.caption_model},
          {"judge_model", cfg.judge_model},
          {"concurrency", cfg.concurrency},
          {"report_formats", cfg.report_formats},
          {"eval_policy",
           {{"transport_attempts", cfg.eval_policy.transport_attempts},
            {"parse_reasks", cfg.eval_policy.parse_reasks},
            {"score_field", cfg.eval_policy.score_field}}}};
}

// --- factories ---------------------------------------------------------------

inline std::shared_ptr<models::VisionEncoder> make_encoder(const EncoderSelection& sel) {
  if (sel.kind == EncoderSelection::Kind::remote) {
    return std::make_shared<models::RemoteEncoder>(sel.remote_url);
  }
  return std::make_shared<models::ToyEncoder>(sel.toy);
}

inline std::shared_ptr<models::ChatClient> make_client(const ClientSelection& sel,
                                                       bool judge_role) {
  std::shared_ptr<models::ChatClient> client;
  switch (sel.kind) {
    case ClientSelection::Kind::http:
      client = std::make_shared<models::HttpChatClient>(sel.http);
      break;
    case ClientSelection::Kind::replay:
      client = std::make_shared<models::ReplayChatClient>(sel.replay_dir);
      break;
    case ClientSelection::Kind::fixture:
      if (judge_role) {
        throw InvalidInputError("caption fixtures cannot back the judge role");
      }
      client = std::make_shared<models::FixtureCaptionClient>(sel.fixture_file);
      break;
    case ClientSelection::Kind::emulated:
      if (!judge_role) {
        throw InvalidInputError("the emulated judge cannot back the caption role");
      }
      client = std::make_shared<models::EmulatedJudgeClient>();
      break;
  }
  if (!sel.record_dir.empty()) {
    client = std::make_shared<models::RecordingChatClient>(client, sel.record_dir);
  }
  return client;
}

}  // namespace mirage::pipeline
