#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mirage/dataset/manifest.hpp"
#include "mirage/errors.hpp"
#include "mirage/eval/evaluate.hpp"
#include "mirage/eval/prompts.hpp"
#include "mirage/eval/verdict.hpp"
#include "mirage/models/model_ops.hpp"

namespace mirage::pipeline {

/// Ask the judge model to rewrite one open-ended question as a closed-form
/// existence question, with the eval policy's transport retries and
/// parse re-asks. Returns the rewritten question or nullopt.
inline std::optional<std::string> transform_completion(const models::JudgeModel& judge,
                                                       const std::string& open_question,
                                                       const std::string& source_answer,
                                                       const eval::EvaluationPolicy& policy) {
  const std::string prompt = eval::build_transform_prompt(open_question, source_answer);
  for (int ask = 0; ask <= policy.parse_reasks; ++ask) {
    int backoff = policy.backoff_initial_ms;
    std::string raw;
    bool got_reply = false;
    for (int t = 0; t < policy.transport_attempts; ++t) {
      try {
        raw = judge.complete(prompt);
        got_reply = true;
        break;
      } catch (const TransportError&) {
        if (t + 1 < policy.transport_attempts) {
          policy.sleep_ms(backoff);
          backoff = static_cast<int>(backoff * policy.backoff_multiplier);
        }
      } catch (const ProtocolError&) {
        break;
      }
    }
    if (!got_reply) return std::nullopt;
    if (auto question = eval::extract_transformed_question(raw)) {
      return question;
    }
  }
  return std::nullopt;
}

/// Transform every open-ended question of a manifest into its closed-form
/// counterpart and attach the results, producing a full-grid manifest.
/// Failed transformations are collected into one validation error.
inline dataset::Manifest transform_manifest_questions(const dataset::Manifest& manifest,
                                                      const models::JudgeModel& judge,
                                                      const eval::EvaluationPolicy& policy = {}) {
  std::map<std::pair<std::string, eval::QuestionType>, eval::QuestionItem> closed;
  std::vector<std::string> failures;
  for (const auto& record : manifest.records) {
    for (const auto& q : record.questions) {
      if (q.format != eval::QuestionFormat::open_ended) continue;
      const auto question = transform_completion(judge, q.text, q.ground_truth_original, policy);
      if (!question) {
        failures.push_back("pair " + record.pair_id + ": transform failed for qtype " +
                           eval::to_string(q.qtype));
        continue;
      }
      eval::QuestionItem item;
      item.text = *question;
      item.format = eval::QuestionFormat::closed_form;
      item.qtype = q.qtype;
      closed[{record.pair_id, q.qtype}] = std::move(item);
    }
  }
  if (!failures.empty()) {
    throw ManifestValidationError(std::move(failures));
  }
  return dataset::attach_closed_forms(manifest, closed);
}

}  // namespace mirage::pipeline
