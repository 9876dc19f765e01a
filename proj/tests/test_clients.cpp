#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mirage/eval/prompts.hpp"
#include "mirage/eval/verdict.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/models/fixture_clients.hpp"
#include "mirage/models/http_chat_client.hpp"
#include "mirage/models/model_ops.hpp"
#include "mirage/models/remote_encoder.hpp"
#include "mirage/models/replay.hpp"
#include "mirage/models/toy_encoder.hpp"
#include "test_support.hpp"

using namespace mirage;
using nlohmann::json;

namespace {

/// In-process chat endpoint with a scripted status sequence.
class TestChatServer {
 public:
  explicit TestChatServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const int call = static_cast<int>(calls_.fetch_add(1));
      last_body_ = req.body;
      if (req.has_header("Authorization")) {
        last_auth_ = req.get_header_value("Authorization");
      }
      const int status =
          call < static_cast<int>(statuses_.size()) ? statuses_[call] : 200;
      if (status != 200) {
        res.status = status;
        res.set_content("busy", "text/plain");
        return;
      }
      json reply = {{"choices", json::array({{{"message",
                                               {{"role", "assistant"},
                                                {"content", "hello from server"}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~TestChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int calls() const { return calls_.load(); }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  std::vector<int> statuses_;
  std::atomic<int> calls_{0};
  int port_ = 0;
  std::string last_body_;
  std::string last_auth_;
};

models::ChatRequest simple_request(const std::string& text) {
  models::ChatRequest req;
  req.model = "test-model";
  req.messages.push_back({"user", text, std::nullopt});
  return req;
}

models::HttpClientConfig fast_config(const std::string& url) {
  models::HttpClientConfig cfg;
  cfg.base_url = url;
  cfg.max_attempts = 3;
  cfg.backoff_initial_ms = 1;
  cfg.timeout_seconds = 5;
  return cfg;
}

}  // namespace

TEST_CASE("mock client passthrough with a fixed map") {
  std::map<std::string, std::string> answers = {{"q1", "a red car"}, {"q2", "a dog"}};
  auto client = std::make_shared<models::MockChatClient>(
      [&](const models::ChatRequest& req) { return answers.at(req.messages[0].text); });
  CHECK(client->complete(simple_request("q1")) == "a red car");
  CHECK(client->complete(simple_request("q2")) == "a dog");
  CHECK(client->calls() == 2);
}

TEST_CASE("http client succeeds and sends auth header") {
  TestChatServer server({200});
  auto cfg = fast_config(server.url());
  cfg.api_key = "sekrit";
  models::HttpChatClient client(cfg);
  CHECK(client.complete(simple_request("hi")) == "hello from server");
  CHECK(server.last_auth() == "Bearer sekrit");
}

TEST_CASE("environment variable overrides the configured api key") {
  TestChatServer server({200});
  ::setenv("MIRAGE_TEST_KEY", "from-env", 1);
  auto cfg = fast_config(server.url());
  cfg.api_key = "from-config";
  cfg.api_key_env = "MIRAGE_TEST_KEY";
  models::HttpChatClient client(cfg);
  client.complete(simple_request("hi"));
  CHECK(server.last_auth() == "Bearer from-env");
  ::unsetenv("MIRAGE_TEST_KEY");
}

TEST_CASE("http client retries rate limits with backoff then succeeds") {
  TestChatServer server({429, 429, 200});
  models::HttpChatClient client(fast_config(server.url()));
  CHECK(client.complete(simple_request("hi")) == "hello from server");
  CHECK(server.calls() == 3);
}

TEST_CASE("http client surfaces a transport error after exhausted retries") {
  TestChatServer server({500, 500, 500, 500});
  models::HttpChatClient client(fast_config(server.url()));
  try {
    client.complete(simple_request("hi"));
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.last_status() == 500);
  }
  CHECK(server.calls() == 3);
}

TEST_CASE("unreachable endpoint raises a transport error with retry metadata") {
  models::HttpChatClient client(fast_config("http://127.0.0.1:1"));
  try {
    client.complete(simple_request("hi"));
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("non-retryable statuses and malformed bodies are protocol errors") {
  TestChatServer bad_status({404});
  models::HttpChatClient client(fast_config(bad_status.url()));
  CHECK_THROWS_AS(client.complete(simple_request("hi")), ProtocolError);
}

TEST_CASE("record then replay returns byte-identical responses") {
  test_support::ScratchDir dir("replay");
  auto inner = std::make_shared<models::MockChatClient>([](const models::ChatRequest& req) {
    return "echo: " + req.messages[0].text;
  });
  models::RecordingChatClient recorder(inner, dir.path());

  const auto r1 = simple_request("first question");
  const auto r2 = simple_request("second question");
  const auto a1 = recorder.complete(r1);
  const auto a2 = recorder.complete(r2);

  models::ReplayChatClient replay(dir.path());
  CHECK(replay.complete(r1) == a1);
  CHECK(replay.complete(r2) == a2);
  CHECK(replay.complete(r1) == "echo: first question");

  CHECK_THROWS_AS(replay.complete(simple_request("never recorded")), TransportError);
}

TEST_CASE("request fingerprints are stable and payload-sensitive") {
  const auto a = models::request_fingerprint(simple_request("q"));
  CHECK(a == models::request_fingerprint(simple_request("q")));
  CHECK(a != models::request_fingerprint(simple_request("other")));

  auto with_image = simple_request("q");
  with_image.messages[0].image_png_base64 = "AAAA";
  CHECK(a != models::request_fingerprint(with_image));
}

TEST_CASE("caption and judge wrappers reject empty replies") {
  auto empty_client = models::MockChatClient::fixed("");
  const models::JudgeModel judge(empty_client, "judge");
  CHECK_THROWS_AS(judge.complete("prompt"), ProtocolError);
}

TEST_CASE("caption model ships the image as a data URL and temperature 0") {
  models::ChatRequest seen;
  auto client = std::make_shared<models::MockChatClient>([&](const models::ChatRequest& req) {
    seen = req;
    return "a caption";
  });
  const models::CaptionModel captioner(client, "cap-model");
  const auto img = test_support::random_image({16, 16, 3}, 3);
  CHECK(captioner.generate_caption(img, "What is this?") == "a caption");
  REQUIRE(seen.messages.size() == 1);
  CHECK(seen.temperature == 0.0);
  CHECK(seen.model == "cap-model");
  REQUIRE(seen.messages[0].image_png_base64.has_value());
  // The payload decodes back to the exact image.
  const auto decoded = io::decode_png(support::base64_decode(*seen.messages[0].image_png_base64));
  CHECK(decoded == img);
}

TEST_CASE("remote encoder round-trips through an in-process adapter endpoint") {
  // Serve a toy encoder over the adapter wire contract; the remote view
  // must match the local one bitwise (JSON doubles round-trip exactly).
  models::ToyEncoderSpec spec;
  spec.input_height = spec.input_width = 16;
  spec.patch_size = 4;
  spec.embedding_dim = 8;
  spec.weight_seed = 77;
  const models::ToyEncoder local(spec);

  httplib::Server server;
  server.Get("/descriptor", [&](const httplib::Request&, httplib::Response& res) {
    const auto& d = local.descriptor();
    json doc = {{"name", d.name},
                {"input_height", d.input_height},
                {"input_width", d.input_width},
                {"channels", d.channels},
                {"patch_size", d.patch_size},
                {"embedding_dim", d.embedding_dim},
                {"differentiable", true},
                {"embedding_stage", d.embedding_stage}};
    res.set_content(doc.dump(), "application/json");
  });
  auto parse_image = [](const json& j) {
    return ImageTensor::create(
        {j.at("height").get<int>(), j.at("width").get<int>(), j.at("channels").get<int>()},
        j.at("pixels").get<std::vector<double>>());
  };
  server.Post("/encode", [&](const httplib::Request& req, httplib::Response& res) {
    const auto img = parse_image(json::parse(req.body));
    const auto out = local.encode(img);
    json doc = {{"num_patches", out.num_patches}, {"dim", out.dim}, {"values", out.values}};
    res.set_content(doc.dump(), "application/json");
  });
  server.Post("/pixel_gradient", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const auto img = parse_image(body.at("image"));
    const auto grad = local.pixel_gradient(img, body.at("cotangent").get<std::vector<double>>());
    json doc = {{"values", grad.values}};
    res.set_content(doc.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  {
    const models::RemoteEncoder remote("http://127.0.0.1:" + std::to_string(port));
    CHECK(remote.descriptor().embedding_dim == 8);
    CHECK(remote.descriptor().differentiable);

    const auto img = test_support::random_image({16, 16, 3}, 12);
    CHECK(remote.encode(img).values == local.encode(img).values);

    std::vector<double> cot(8, 0.25);
    CHECK(remote.pixel_gradient(img, cot).values == local.pixel_gradient(img, cot).values);
  }
  server.stop();
  thread.join();
}

TEST_CASE("remote encoder failure modes") {
  CHECK_THROWS_AS(models::RemoteEncoder("http://127.0.0.1:1"), TransportError);
}

TEST_CASE("emulated judge passes faithful responses and fails leaky ones") {
  models::EmulatedJudgeClient judge;
  eval::QuestionItem q;
  q.text = "Do you see any circle in this image?";
  q.ground_truth_original = "No, there is no circle in this image.";
  q.ground_truth_target = "Yes, there is a teal circle.";

  auto ask = [&](const std::string& response, eval::ImageRole role) {
    models::ChatRequest req;
    req.messages.push_back({"user", eval::build_detection_prompt(q, response, role),
                            std::nullopt});
    return eval::parse_verdict(judge.complete(req)).verdict;
  };

  CHECK(ask("No, there is no circle in this image.", eval::ImageRole::original) ==
        eval::Verdict::PASS);
  CHECK(ask("Yes, there is a teal circle.", eval::ImageRole::optimized) ==
        eval::Verdict::FAIL);
  CHECK(ask("No, there is no circle in this image.", eval::ImageRole::optimized) ==
        eval::Verdict::PASS);
}

TEST_CASE("emulated judge transforms open questions to closed form") {
  models::EmulatedJudgeClient judge;
  models::ChatRequest req;
  req.messages.push_back(
      {"user",
       eval::build_transform_prompt(
           "What type of clouds are predominantly featured in the image?",
           "The image features cumulus clouds over a green valley."),
       std::nullopt});
  const auto reply = judge.complete(req);
  const auto question = eval::extract_transformed_question(reply);
  REQUIRE(question.has_value());
  CHECK(*question == "Do you see any clouds in this image?");
}
