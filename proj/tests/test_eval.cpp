#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mirage/dataset/manifest.hpp"
#include "mirage/eval/evaluate.hpp"
#include "mirage/eval/prompts.hpp"
#include "mirage/eval/rates.hpp"
#include "mirage/eval/verdict.hpp"
#include "mirage/models/chat_client.hpp"
#include "mirage/models/model_ops.hpp"
#include "mirage/support/random.hpp"

using namespace mirage;
using eval::ImageRole;
using eval::JudgeVerdict;
using eval::QuestionFormat;
using eval::QuestionItem;
using eval::QuestionType;
using eval::Verdict;

namespace {

std::string golden(const std::string& name) { return std::string(TEST_GOLDEN_DIR) + "/" + name; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

QuestionItem sample_question() {
  QuestionItem q;
  q.text = "Do you see any skiers in this image?";
  q.format = QuestionFormat::closed_form;
  q.qtype = QuestionType::target;
  q.ground_truth_original = "No, there are no skiers; the image shows a desk with a computer.";
  q.ground_truth_target = "Yes, there is a skier in mid-air over a snowy slope.";
  return q;
}

dataset::BenchmarkRecord full_record() {
  dataset::BenchmarkRecord r;
  r.pair_id = "p0";
  r.dataset_tag = "unit";
  r.source_image = "src.png";
  r.target_image = "tgt.png";
  for (QuestionType t : {QuestionType::baseline, QuestionType::source, QuestionType::target}) {
    for (QuestionFormat f : {QuestionFormat::open_ended, QuestionFormat::closed_form}) {
      QuestionItem q;
      q.text = std::string("q-") + eval::to_string(t) + "-" + eval::to_string(f);
      q.format = f;
      q.qtype = t;
      q.ground_truth_original = "the original truth";
      q.ground_truth_target = "the target truth";
      r.questions.push_back(q);
    }
  }
  return r;
}

eval::ResponseMap full_responses(const dataset::BenchmarkRecord& r) {
  eval::ResponseMap responses;
  for (const auto& q : r.questions) {
    for (ImageRole role : {ImageRole::original, ImageRole::optimized}) {
      responses[{q.qtype, q.format, role}] = "resp-" + q.text + "-" + eval::to_string(role);
    }
  }
  return responses;
}

eval::EvaluationPolicy fast_policy() {
  eval::EvaluationPolicy policy;
  policy.backoff_initial_ms = 0;
  policy.sleep_ms = [](int) {};
  return policy;
}

}  // namespace

TEST_CASE("detection prompt embeds question, response, and ground truth") {
  const auto q = sample_question();
  const std::string response = "Yes, there is a skier on the monitor screen.";
  for (ImageRole role : {ImageRole::original, ImageRole::optimized}) {
    const auto prompt = eval::build_detection_prompt(q, response, role);
    CHECK(prompt.find(q.text) != std::string::npos);
    CHECK(prompt.find(response) != std::string::npos);
    CHECK(prompt.find(q.ground_truth_original) != std::string::npos);
  }
}

TEST_CASE("detection prompts differ only in the criteria block") {
  const auto q = sample_question();
  const std::string response = "a response";
  const auto original = eval::build_detection_prompt(q, response, ImageRole::original);
  const auto optimized = eval::build_detection_prompt(q, response, ImageRole::optimized);

  const std::string marker = "Evaluation criteria";
  const auto o_start = original.find(marker);
  const auto p_start = optimized.find(marker);
  REQUIRE(o_start != std::string::npos);
  REQUIRE(p_start != std::string::npos);
  CHECK(original.substr(0, o_start) == optimized.substr(0, p_start));

  const std::string footer = "\nReply with exactly one JSON object";
  const auto o_end = original.rfind(footer);
  const auto p_end = optimized.rfind(footer);
  CHECK(original.substr(o_end) == optimized.substr(p_end));
}

TEST_CASE("detection prompt matches the reviewed golden snapshots") {
  const auto q = sample_question();
  const std::string response = "Yes, there is a skier on the monitor screen.";
  CHECK(eval::build_detection_prompt(q, response, ImageRole::original) ==
        read_file(golden("detection_prompt_original.txt")));
  CHECK(eval::build_detection_prompt(q, response, ImageRole::optimized) ==
        read_file(golden("detection_prompt_optimized.txt")));
}

TEST_CASE("detection prompt requires the relevant ground truths") {
  auto q = sample_question();
  q.ground_truth_original.clear();
  CHECK_THROWS_AS(eval::build_detection_prompt(q, "r", ImageRole::original),
                  InvalidRecordError);

  auto q2 = sample_question();
  q2.ground_truth_target.clear();
  CHECK_NOTHROW(eval::build_detection_prompt(q2, "r", ImageRole::original));
  CHECK_THROWS_AS(eval::build_detection_prompt(q2, "r", ImageRole::optimized),
                  InvalidRecordError);
}

TEST_CASE("transform prompt embeds the open question and matches its golden") {
  const std::string open = "What type of clouds are predominantly featured in the image?";
  const std::string answer = "The image features cumulus clouds over a green valley.";
  const auto prompt = eval::build_transform_prompt(open, answer);
  CHECK(prompt.find(open) != std::string::npos);
  CHECK(prompt == read_file(golden("transform_prompt.txt")));
  CHECK_THROWS_AS(eval::build_transform_prompt("", answer), InvalidInputError);
}

TEST_CASE("template hashes are stable within a build") {
  CHECK(eval::detection_template_hash() == eval::detection_template_hash());
  CHECK(eval::detection_template_hash().size() == 16);
  CHECK(eval::transform_template_hash() != eval::detection_template_hash());
}

TEST_CASE("parse_verdict over a fixture suite of judge-style outputs") {
  struct Case {
    const char* raw;
    Verdict expected;
  };
  const Case cases[] = {
      {R"({"score": "PASS"})", Verdict::PASS},
      {R"({"score": "FAIL"})", Verdict::FAIL},
      {R"({"score": "pass"})", Verdict::PASS},
      {R"({"score": "Fail"})", Verdict::FAIL},
      {"no structure here", Verdict::INVALID},
      {"", Verdict::INVALID},
      {R"(The evaluation is: {"score":"FAIL"} as required.)", Verdict::FAIL},
      {"Sure! Here is my verdict:\n```json\n{\"score\": \"PASS\"}\n```\nThanks!",
       Verdict::PASS},
      {R"({"result": {"score": "FAIL"}, "note": "nested"})", Verdict::FAIL},
      {R"({"notes": "the word score appears"} then {"score": "PASS"})", Verdict::PASS},
      {R"({"score": 0.7})", Verdict::INVALID},
      {R"({"score": "MAYBE"})", Verdict::INVALID},
      {R"([{"score": "PASS"}])", Verdict::PASS},
      {R"({"score": "FAIL")", Verdict::INVALID},  // unbalanced
      {R"(prefix {"broken": } {"score": "PASS"})", Verdict::PASS},
  };
  for (const auto& c : cases) {
    CAPTURE(c.raw);
    const auto v = eval::parse_verdict(c.raw);
    CHECK(v.verdict == c.expected);
    CHECK(v.raw_output == c.raw);
  }
}

TEST_CASE("parse_verdict honors a configurable score field") {
  CHECK(eval::parse_verdict(R"({"grade": "FAIL"})", "grade").verdict == Verdict::FAIL);
  CHECK(eval::parse_verdict(R"({"grade": "FAIL"})").verdict == Verdict::INVALID);
}

TEST_CASE("parse_verdict never throws on hostile input") {
  const std::string hostile = "{{{{\"score\": \x01\\\"PASS\" \"" + std::string(1000, '{');
  CHECK_NOTHROW(eval::parse_verdict(hostile));
}

TEST_CASE("extract_transformed_question") {
  CHECK(eval::extract_transformed_question(
            R"(Here: {"question": "Do you see any clouds in this image?"})") ==
        "Do you see any clouds in this image?");
  CHECK_FALSE(eval::extract_transformed_question("{}").has_value());
  CHECK_FALSE(eval::extract_transformed_question(R"({"question": ""})").has_value());
}

TEST_CASE("judged_completion retries transport failures then succeeds") {
  int failures_left = 2;
  auto client = std::make_shared<models::MockChatClient>([&](const models::ChatRequest&) {
    if (failures_left-- > 0) throw TransportError("down", 1);
    return std::string(R"({"score": "PASS"})");
  });
  const models::JudgeModel judge(client, "judge");
  const auto verdict = eval::judged_completion(judge, "prompt", fast_policy());
  CHECK(verdict.verdict == Verdict::PASS);
  CHECK(verdict.attempts == 3);
}

TEST_CASE("judged_completion re-asks on unparseable output, then INVALID") {
  auto client = models::MockChatClient::fixed("not json at all");
  const models::JudgeModel judge(client, "judge");
  const auto verdict = eval::judged_completion(judge, "prompt", fast_policy());
  CHECK(verdict.verdict == Verdict::INVALID);
  CHECK(verdict.attempts == 3);  // 1 ask + 2 re-asks
}

TEST_CASE("evaluate_pair: mock judge PASS for all -> 12 PASS verdicts") {
  const auto record = full_record();
  const auto responses = full_responses(record);
  const models::JudgeModel judge(models::MockChatClient::fixed(R"({"score": "PASS"})"),
                                 "judge");
  const auto verdicts = eval::evaluate_pair(record, responses, judge, fast_policy());
  REQUIRE(verdicts.size() == 12);
  for (const auto& v : verdicts) CHECK(v.verdict.verdict == Verdict::PASS);

  // Verdict totality: one verdict per (question, role), both roles covered.
  int original_count = 0, optimized_count = 0;
  for (const auto& v : verdicts) {
    (v.role == ImageRole::original ? original_count : optimized_count)++;
  }
  CHECK(original_count == 6);
  CHECK(optimized_count == 6);
}

TEST_CASE("evaluate_pair: persistent judge failure -> 12 INVALID with attempts") {
  const auto record = full_record();
  const auto responses = full_responses(record);
  const models::JudgeModel judge(models::MockChatClient::fixed("garbage"), "judge");
  auto policy = fast_policy();
  const auto verdicts = eval::evaluate_pair(record, responses, judge, policy);
  REQUIRE(verdicts.size() == 12);
  for (const auto& v : verdicts) {
    CHECK(v.verdict.verdict == Verdict::INVALID);
    CHECK(v.verdict.attempts == 1 + policy.parse_reasks);
  }
}

TEST_CASE("evaluate_pair rejects incomplete response sets") {
  const auto record = full_record();
  auto responses = full_responses(record);
  responses.erase({QuestionType::target, QuestionFormat::closed_form, ImageRole::optimized});
  const models::JudgeModel judge(models::MockChatClient::fixed(R"({"score": "PASS"})"),
                                 "judge");
  CHECK_THROWS_AS(eval::evaluate_pair(record, responses, judge, fast_policy()),
                  InvalidRecordError);
}

TEST_CASE("evaluate_pair verdicts depend on the judged content") {
  // The scripted judge fails any response mentioning the leaked content.
  const auto record = full_record();
  auto responses = full_responses(record);
  auto client = std::make_shared<models::MockChatClient>([](const models::ChatRequest& req) {
    const auto& prompt = req.messages.front().text;
    const bool optimized = prompt.find("OPTIMIZED") != std::string::npos;
    return std::string(optimized ? R"({"score": "FAIL"})" : R"({"score": "PASS"})");
  });
  const models::JudgeModel judge(client, "judge");
  const auto verdicts = eval::evaluate_pair(record, responses, judge, fast_policy());
  int pass = 0, fail = 0;
  for (const auto& v : verdicts) {
    if (v.verdict.verdict == Verdict::PASS) ++pass;
    if (v.verdict.verdict == Verdict::FAIL) ++fail;
    CHECK((v.verdict.verdict == Verdict::PASS) == (v.role == ImageRole::original));
  }
  CHECK(pass == 6);
  CHECK(fail == 6);
}

TEST_CASE("hallucination_rates trivial cases") {
  eval::RateKey key{"ds", "0.007", QuestionFormat::open_ended, ImageRole::optimized,
                    QuestionType::baseline};
  {
    std::vector<eval::KeyedVerdict> all_pass(4, {key, Verdict::PASS});
    const auto table = eval::hallucination_rates(all_pass);
    CHECK(table.cells.at(key).rate() == 0.0);
  }
  {
    std::vector<eval::KeyedVerdict> verdicts = {{key, Verdict::FAIL}, {key, Verdict::PASS}};
    const auto table = eval::hallucination_rates(verdicts);
    CHECK(table.cells.at(key).rate() == 0.5);
  }
  {
    std::vector<eval::KeyedVerdict> only_invalid = {{key, Verdict::INVALID}};
    const auto table = eval::hallucination_rates(only_invalid);
    CHECK_FALSE(table.cells.at(key).rate().has_value());  // absent, not 0
    CHECK(table.cells.at(key).invalid_count == 1);
  }
}

TEST_CASE("hallucination_rates matches a counting oracle on 200 verdicts") {
  std::mt19937_64 rng(2024);
  std::vector<eval::KeyedVerdict> verdicts;
  std::map<eval::RateKey, std::array<std::int64_t, 3>> oracle;  // pass, fail, invalid
  const std::vector<std::string> datasets = {"alpha", "beta"};
  for (int i = 0; i < 200; ++i) {
    eval::RateKey key;
    key.dataset = datasets[support::bounded(rng, 2)];
    key.learning_rate = "0.007";
    key.format = support::bounded(rng, 2) ? QuestionFormat::open_ended
                                          : QuestionFormat::closed_form;
    key.role = support::bounded(rng, 2) ? ImageRole::original : ImageRole::optimized;
    key.qtype = static_cast<QuestionType>(support::bounded(rng, 3));
    const auto verdict = static_cast<Verdict>(support::bounded(rng, 3));
    verdicts.push_back({key, verdict});
    oracle[key][static_cast<int>(verdict)]++;
  }
  const auto table = eval::hallucination_rates(verdicts);
  REQUIRE(table.cells.size() == oracle.size());
  std::int64_t total = 0;
  for (const auto& [key, counts] : oracle) {
    const auto& cell = table.cells.at(key);
    CHECK(cell.valid_total == counts[0] + counts[1]);
    CHECK(cell.failures == counts[1]);
    CHECK(cell.invalid_count == counts[2]);
    if (cell.valid_total > 0) {
      CHECK(*cell.rate() == static_cast<double>(counts[1]) / (counts[0] + counts[1]));
    }
    total += cell.valid_total + cell.invalid_count;
  }
  CHECK(total == 200);
}
