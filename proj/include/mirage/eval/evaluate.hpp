#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "mirage/dataset/manifest.hpp"
#include "mirage/errors.hpp"
#include "mirage/eval/prompts.hpp"
#include "mirage/eval/question.hpp"
#include "mirage/eval/verdict.hpp"
#include "mirage/models/model_ops.hpp"

namespace mirage::eval {

/// Retry/robustness knobs for judge calls. Transport failures get
/// `transport_attempts` tries with exponential backoff; unparseable judge
/// output gets `parse_reasks` re-asks before the verdict is INVALID.
struct EvaluationPolicy {
  int transport_attempts = 3;
  int parse_reasks = 2;
  int backoff_initial_ms = 200;
  double backoff_multiplier = 2.0;
  std::string score_field = std::string(kDefaultScoreField);
  /// Injectable for tests; defaults to an actual sleep.
  std::function<void(int)> sleep_ms = [](int ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  };
};

/// Key for the 12 responses a fully-evaluated pair carries:
/// 3 qtypes x 2 formats x 2 image roles.
using ResponseKey = std::tuple<QuestionType, QuestionFormat, ImageRole>;
using ResponseMap = std::map<ResponseKey, std::string>;

struct VerdictEntry {
  QuestionType qtype = QuestionType::baseline;
  QuestionFormat format = QuestionFormat::open_ended;
  ImageRole role = ImageRole::original;
  JudgeVerdict verdict;
};

/// Ask the judge once, absorbing transport failures and re-asking on
/// unparseable output per the policy. Never throws; exhausted retries
/// yield INVALID with the attempt count recorded.
inline JudgeVerdict judged_completion(const models::JudgeModel& judge,
                                      const std::string& prompt,
                                      const EvaluationPolicy& policy) {
  int attempts = 0;
  JudgeVerdict last;
  for (int ask = 0; ask <= policy.parse_reasks; ++ask) {
    int backoff = policy.backoff_initial_ms;
    std::string raw;
    bool got_reply = false;
    for (int t = 0; t < policy.transport_attempts; ++t) {
      ++attempts;
      try {
        raw = judge.complete(prompt);
        got_reply = true;
        break;
      } catch (const TransportError&) {
        if (t + 1 < policy.transport_attempts) {
          policy.sleep_ms(backoff);
          backoff = static_cast<int>(backoff * policy.backoff_multiplier);
        }
      } catch (const ProtocolError& e) {
        raw = e.what();
        break;  // a malformed reply is a parse problem, not a transport one
      }
    }
    if (!got_reply && raw.empty()) {
      // Transport exhausted; re-asking would hit the same wall.
      return JudgeVerdict{Verdict::INVALID, "", attempts};
    }
    last = parse_verdict(raw, policy.score_field);
    last.attempts = attempts;
    if (last.verdict != Verdict::INVALID) return last;
  }
  return last;
}

/// Judge all twelve (question, image role) responses of one benchmark
/// record. `responses` must cover the full grid for both image roles.
inline std::vector<VerdictEntry> evaluate_pair(const dataset::BenchmarkRecord& record,
                                               const ResponseMap& responses,
                                               const models::JudgeModel& judge,
                                               const EvaluationPolicy& policy = {}) {
  // Verify the response set is complete before issuing any judge call.
  for (const auto& q : record.questions) {
    for (ImageRole role : {ImageRole::original, ImageRole::optimized}) {
      if (!responses.contains({q.qtype, q.format, role})) {
        throw InvalidRecordError("pair " + record.pair_id + ": missing response for (" +
                                 to_string(q.qtype) + ", " + to_string(q.format) +
                                 ", " + to_string(role) + ")");
      }
    }
  }
  if (record.questions.size() != 6) {
    throw InvalidRecordError("pair " + record.pair_id + " does not carry 6 questions");
  }

  std::vector<VerdictEntry> verdicts;
  verdicts.reserve(12);
  for (const auto& q : record.questions) {
    for (ImageRole role : {ImageRole::original, ImageRole::optimized}) {
      const std::string& response = responses.at({q.qtype, q.format, role});
      const std::string prompt = build_detection_prompt(q, response, role);
      VerdictEntry entry;
      entry.qtype = q.qtype;
      entry.format = q.format;
      entry.role = role;
      entry.verdict = judged_completion(judge, prompt, policy);
      verdicts.push_back(std::move(entry));
    }
  }
  return verdicts;
}

}  // namespace mirage::eval
