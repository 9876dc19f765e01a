#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "mirage/errors.hpp"
#include "mirage/eval/question.hpp"
#include "mirage/eval/verdict.hpp"

namespace mirage::eval {

/// Aggregation key for one hallucination-rate cell.
struct RateKey {
  std::string dataset;
  std::string learning_rate;  // formatted, e.g. "0.007"
  QuestionFormat format = QuestionFormat::open_ended;
  ImageRole role = ImageRole::original;
  QuestionType qtype = QuestionType::baseline;

  auto operator<=>(const RateKey&) const = default;
};

struct RateCell {
  std::int64_t failures = 0;
  std::int64_t valid_total = 0;  // PASS + FAIL
  std::int64_t invalid_count = 0;

  /// Hallucination rate in [0,1]; absent when the cell has no valid
  /// verdicts (INVALID-only cells are reported, never treated as 0).
  std::optional<double> rate() const {
    if (valid_total == 0) return std::nullopt;
    return static_cast<double>(failures) / static_cast<double>(valid_total);
  }
};

struct KeyedVerdict {
  RateKey key;
  Verdict verdict = Verdict::INVALID;
};

struct RateTable {
  std::map<RateKey, RateCell> cells;
};

/// Tally keyed verdicts into per-cell hallucination rates. INVALID
/// verdicts are excluded from the denominator and counted separately.
inline RateTable hallucination_rates(std::span<const KeyedVerdict> verdicts) {
  RateTable table;
  for (const auto& kv : verdicts) {
    RateCell& cell = table.cells[kv.key];
    switch (kv.verdict) {
      case Verdict::FAIL:
        ++cell.failures;
        ++cell.valid_total;
        break;
      case Verdict::PASS:
        ++cell.valid_total;
        break;
      case Verdict::INVALID:
        ++cell.invalid_count;
        break;
    }
  }
  return table;
}

}  // namespace mirage::eval
