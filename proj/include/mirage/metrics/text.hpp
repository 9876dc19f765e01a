#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mirage/errors.hpp"

namespace mirage::metrics {

using TokenSeq = std::vector<std::string>;

/// Caption tokenizer: lowercase, punctuation replaced by spaces, then
/// whitespace split. This exact recipe is recorded in reports, so keep it
/// stable.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace detail {

inline std::unordered_map<std::string, int> ngram_counts(const TokenSeq& tokens, int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

/// Sentence BLEU-4: geometric mean of smoothed 1..4-gram precisions times
/// the brevity penalty. Zero n-gram matches are smoothed by substituting a
/// 1e-9 numerator so single-sentence scores do not collapse to zero.
/// An empty candidate or reference scores 0.0 and sets *degenerate.
inline double bleu4(const TokenSeq& candidate, const TokenSeq& reference,
                    bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  if (candidate.empty() || reference.empty()) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  constexpr double kSmoothing = 1e-9;

  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    const auto cand = detail::ngram_counts(candidate, n);
    const auto ref = detail::ngram_counts(reference, n);
    const int total = std::max<int>(0, static_cast<int>(candidate.size()) - n + 1);
    double matched = 0.0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    double precision;
    if (total == 0) {
      precision = kSmoothing;  // candidate shorter than n
    } else if (matched == 0.0) {
      precision = kSmoothing / total;
    } else {
      precision = matched / total;
    }
    log_sum += std::log(precision);
  }

  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(brevity * std::exp(log_sum / 4.0), 0.0, 1.0);
}

/// ROUGE-L F1 over the longest common subsequence:
/// R = LCS/|ref|, P = LCS/|cand|, F1 = 2PR/(P+R), 0 when the LCS is empty.
/// Empty inputs score 0.0 and set *degenerate.
inline double rouge_l(const TokenSeq& candidate, const TokenSeq& reference,
                      bool* degenerate = nullptr) {
  if (degenerate) *degenerate = false;
  if (candidate.empty() || reference.empty()) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }

  const std::size_t m = candidate.size();
  const std::size_t n = reference.size();
  std::vector<int> prev(n + 1, 0), curr(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (candidate[i - 1] == reference[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  const int lcs = prev[n];
  if (lcs == 0) return 0.0;

  const double p = static_cast<double>(lcs) / m;
  const double r = static_cast<double>(lcs) / n;
  return 2.0 * p * r / (p + r);
}

}  // namespace mirage::metrics
