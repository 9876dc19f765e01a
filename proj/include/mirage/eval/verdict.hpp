#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mirage/eval/prompts.hpp"

namespace mirage::eval {

enum class Verdict { PASS, FAIL, INVALID };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::PASS: return "PASS";
    case Verdict::FAIL: return "FAIL";
    default: return "INVALID";
  }
}

struct JudgeVerdict {
  Verdict verdict = Verdict::INVALID;
  std::string raw_output;
  int attempts = 1;  // judge calls spent on this item
};

namespace detail {

/// Locate the end of the JSON object starting at `start` ('{'), honoring
/// strings and escapes. Returns npos when unbalanced.
inline std::size_t match_brace(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

/// First well-formed JSON object in `text` that carries `field`; nested
/// objects are visited when the enclosing one does not qualify.
inline std::optional<nlohmann::json> first_object_with_field(std::string_view text,
                                                             const std::string& field) {
  std::size_t pos = text.find('{');
  while (pos != std::string_view::npos) {
    const std::size_t end = match_brace(text, pos);
    if (end != std::string_view::npos) {
      const auto candidate = nlohmann::json::parse(
          text.substr(pos, end - pos + 1), nullptr, /*allow_exceptions=*/false);
      if (candidate.is_object() && candidate.contains(field)) {
        return candidate;
      }
    }
    pos = text.find('{', pos + 1);
  }
  return std::nullopt;
}

}  // namespace detail

/// Extract a PASS/FAIL verdict from raw judge output. Scans for the first
/// well-formed JSON object carrying the score field and maps its value
/// case-insensitively; anything else is INVALID. Never throws.
inline JudgeVerdict parse_verdict(const std::string& raw,
                                  const std::string& score_field = std::string(kDefaultScoreField)) {
  JudgeVerdict out;
  out.raw_output = raw;
  const auto object = detail::first_object_with_field(raw, score_field);
  if (!object) return out;
  const auto& score = (*object)[score_field];
  if (!score.is_string()) return out;
  const std::string value = detail::upper(score.get<std::string>());
  if (value == "PASS") {
    out.verdict = Verdict::PASS;
  } else if (value == "FAIL") {
    out.verdict = Verdict::FAIL;
  }
  return out;
}

/// Pull the rewritten closed-form question out of a transform reply.
inline std::optional<std::string> extract_transformed_question(const std::string& raw) {
  const auto object = detail::first_object_with_field(raw, "question");
  if (!object) return std::nullopt;
  const auto& q = (*object)["question"];
  if (!q.is_string() || q.get<std::string>().empty()) return std::nullopt;
  return q.get<std::string>();
}

}  // namespace mirage::eval
