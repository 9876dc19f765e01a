#pragma once

#include <string>
#include <string_view>

#include "mirage/errors.hpp"

namespace mirage::eval {

enum class QuestionFormat { open_ended, closed_form };
enum class QuestionType { baseline, source, target };
enum class ImageRole { original, optimized };

inline const char* to_string(QuestionFormat f) {
  return f == QuestionFormat::open_ended ? "open_ended" : "closed_form";
}
inline const char* to_string(QuestionType t) {
  switch (t) {
    case QuestionType::baseline: return "baseline";
    case QuestionType::source: return "source";
    default: return "target";
  }
}
inline const char* to_string(ImageRole r) {
  return r == ImageRole::original ? "original" : "optimized";
}

inline QuestionFormat question_format_from(std::string_view s) {
  if (s == "open_ended") return QuestionFormat::open_ended;
  if (s == "closed_form") return QuestionFormat::closed_form;
  throw InvalidInputError("unknown question format '" + std::string(s) + "'");
}
inline QuestionType question_type_from(std::string_view s) {
  if (s == "baseline") return QuestionType::baseline;
  if (s == "source") return QuestionType::source;
  if (s == "target") return QuestionType::target;
  throw InvalidInputError("unknown question type '" + std::string(s) + "'");
}
inline ImageRole image_role_from(std::string_view s) {
  if (s == "original") return ImageRole::original;
  if (s == "optimized") return ImageRole::optimized;
  throw InvalidInputError("unknown image role '" + std::string(s) + "'");
}

/// One benchmark question with its reference answers.
/// `ground_truth_original` describes what the source image actually shows;
/// `ground_truth_target` describes the same question answered against the
/// target image's content (used to spot leakage in optimized-image answers).
struct QuestionItem {
  std::string text;
  QuestionFormat format = QuestionFormat::open_ended;
  QuestionType qtype = QuestionType::baseline;
  std::string ground_truth_original;
  std::string ground_truth_target;
};

}  // namespace mirage::eval
