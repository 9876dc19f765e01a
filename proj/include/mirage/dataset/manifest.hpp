#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mirage/errors.hpp"
#include "mirage/eval/question.hpp"
#include "mirage/io/image_io.hpp"

namespace mirage::dataset {

using eval::QuestionFormat;
using eval::QuestionItem;
using eval::QuestionType;

/// One source/target image pair with its question set. Image paths are
/// relative to the manifest's directory so benchmarks stay relocatable.
struct BenchmarkRecord {
  std::string pair_id;
  std::string dataset_tag;
  std::string source_image;
  std::string target_image;
  std::vector<QuestionItem> questions;

  const QuestionItem* find_question(QuestionType qtype, QuestionFormat format) const {
    for (const auto& q : questions) {
      if (q.qtype == qtype && q.format == format) return &q;
    }
    return nullptr;
  }
};

struct Manifest {
  std::string version;
  std::string provenance;
  std::vector<BenchmarkRecord> records;
  /// Directory image paths are resolved against (set on load/save).
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const {
    return base_dir / relative;
  }
};

/// How much question structure a manifest must carry.
enum class QuestionGrid {
  /// Exactly one question per (qtype, format): the full 3x2 grid.
  full,
  /// Exactly one open-ended question per qtype (pre-transformation input).
  open_only,
};

struct ManifestOptions {
  QuestionGrid grid = QuestionGrid::full;
  /// Also decode every referenced image, not just check existence.
  bool decode_images = true;
};

inline constexpr std::string_view kManifestKind = "hallucination-benchmark-manifest";

namespace detail {

inline nlohmann::ordered_json question_to_json(const QuestionItem& q) {
  return {{"text", q.text},
          {"format", eval::to_string(q.format)},
          {"qtype", eval::to_string(q.qtype)},
          {"ground_truth_original", q.ground_truth_original},
          {"ground_truth_target", q.ground_truth_target}};
}

inline QuestionItem question_from_json(const nlohmann::json& j) {
  QuestionItem q;
  q.text = j.at("text").get<std::string>();
  q.format = eval::question_format_from(j.at("format").get<std::string>());
  q.qtype = eval::question_type_from(j.at("qtype").get<std::string>());
  q.ground_truth_original = j.value("ground_truth_original", "");
  q.ground_truth_target = j.value("ground_truth_target", "");
  return q;
}

inline nlohmann::ordered_json record_to_json(const BenchmarkRecord& r) {
  nlohmann::ordered_json questions = nlohmann::ordered_json::array();
  for (const auto& q : r.questions) questions.push_back(question_to_json(q));
  return {{"pair_id", r.pair_id},
          {"dataset_tag", r.dataset_tag},
          {"source_image", r.source_image},
          {"target_image", r.target_image},
          {"questions", questions}};
}

inline BenchmarkRecord record_from_json(const nlohmann::json& j) {
  BenchmarkRecord r;
  r.pair_id = j.at("pair_id").get<std::string>();
  r.dataset_tag = j.value("dataset_tag", "");
  r.source_image = j.at("source_image").get<std::string>();
  r.target_image = j.at("target_image").get<std::string>();
  if (j.contains("questions")) {
    for (const auto& q : j.at("questions")) {
      r.questions.push_back(question_from_json(q));
    }
  }
  return r;
}

inline void check_image(const Manifest& m, const std::string& rel,
                        const std::string& pair_id, const char* which,
                        bool decode, std::vector<std::string>& issues) {
  const auto path = m.resolve(rel);
  if (!std::filesystem::exists(path)) {
    issues.push_back("pair " + pair_id + ": " + which + " image missing: " + path.string());
    return;
  }
  if (decode) {
    try {
      io::load_image(path);
    } catch (const Error& e) {
      issues.push_back("pair " + pair_id + ": " + which + " image undecodable: " + e.what());
    }
  }
}

inline void check_questions(const BenchmarkRecord& r, QuestionGrid grid,
                            std::vector<std::string>& issues) {
  static constexpr QuestionType kTypes[] = {QuestionType::baseline, QuestionType::source,
                                            QuestionType::target};
  if (grid == QuestionGrid::full) {
    if (r.questions.size() != 6) {
      issues.push_back("pair " + r.pair_id + ": expected 6 questions, found " +
                       std::to_string(r.questions.size()));
    }
    for (QuestionType t : kTypes) {
      for (QuestionFormat f : {QuestionFormat::open_ended, QuestionFormat::closed_form}) {
        int count = 0;
        for (const auto& q : r.questions) {
          if (q.qtype == t && q.format == f) ++count;
        }
        if (count != 1) {
          issues.push_back("pair " + r.pair_id + ": " + std::to_string(count) +
                           " questions of (" + eval::to_string(t) + ", " +
                           eval::to_string(f) + "), expected exactly 1");
        }
      }
    }
  } else {
    for (QuestionType t : kTypes) {
      int open = 0, closed = 0;
      for (const auto& q : r.questions) {
        if (q.qtype != t) continue;
        (q.format == QuestionFormat::open_ended ? open : closed) += 1;
      }
      if (open != 1 || closed != 0) {
        issues.push_back("pair " + r.pair_id + ": expected exactly one open-ended " +
                         std::string(eval::to_string(t)) + " question and no closed form");
      }
    }
  }
}

}  // namespace detail

/// Validate a manifest in memory, returning every violation found.
inline std::vector<std::string> validate_manifest(const Manifest& m,
                                                  const ManifestOptions& options = {}) {
  std::vector<std::string> issues;
  if (m.version.empty()) issues.push_back("manifest version missing");
  if (m.records.empty()) issues.push_back("manifest holds no records");

  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (r.pair_id.empty()) {
      issues.push_back("record with empty pair_id");
      continue;
    }
    if (!seen.insert(r.pair_id).second) {
      issues.push_back("duplicate pair_id " + r.pair_id);
    }
    detail::check_image(m, r.source_image, r.pair_id, "source", options.decode_images, issues);
    detail::check_image(m, r.target_image, r.pair_id, "target", options.decode_images, issues);
    detail::check_questions(r, options.grid, issues);
  }
  return issues;
}

/// Load a manifest file: one JSON header line, then one record per line.
/// Throws ManifestValidationError listing all offending records.
inline Manifest load_manifest(const std::filesystem::path& path,
                              const ManifestOptions& options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());

  Manifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<std::string> issues;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto doc = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
      issues.push_back("line " + std::to_string(line_no) + ": not a JSON object");
      continue;
    }
    if (!header_seen) {
      if (doc.value("kind", "") != kManifestKind) {
        throw ManifestValidationError(
            {"line 1: expected header with kind '" + std::string(kManifestKind) + "'"});
      }
      m.version = doc.value("version", "");
      m.provenance = doc.value("provenance", "");
      header_seen = true;
      continue;
    }
    try {
      m.records.push_back(detail::record_from_json(doc));
    } catch (const nlohmann::json::exception& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      issues.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) {
    throw ManifestValidationError({"manifest is empty (no header line)"});
  }

  auto more = validate_manifest(m, options);
  issues.insert(issues.end(), more.begin(), more.end());
  if (!issues.empty()) {
    throw ManifestValidationError(std::move(issues));
  }
  return m;
}

/// Serialize with canonical field order; loading and saving a manifest is
/// byte-stable.
inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  nlohmann::ordered_json header = {{"kind", kManifestKind},
                                   {"version", m.version},
                                   {"provenance", m.provenance}};
  out << header.dump() << '\n';
  for (const auto& r : m.records) {
    out << detail::record_to_json(r).dump() << '\n';
  }
}

/// Merge judge-transformed closed-form questions into a manifest of
/// open-ended records, preserving qtype. Each record ends up with the full
/// 3x2 grid, questions ordered by (qtype, format). Missing transformations
/// are collected and reported together.
inline Manifest attach_closed_forms(
    const Manifest& m,
    const std::map<std::pair<std::string, QuestionType>, QuestionItem>& closed) {
  Manifest out = m;
  std::vector<std::string> issues;
  for (auto& r : out.records) {
    std::vector<QuestionItem> questions;
    for (QuestionType t : {QuestionType::baseline, QuestionType::source, QuestionType::target}) {
      const QuestionItem* open = r.find_question(t, QuestionFormat::open_ended);
      if (!open) {
        issues.push_back("pair " + r.pair_id + ": no open-ended " +
                         std::string(eval::to_string(t)) + " question");
        continue;
      }
      auto it = closed.find({r.pair_id, t});
      if (it == closed.end()) {
        issues.push_back("pair " + r.pair_id + ": missing closed-form transform for qtype " +
                         eval::to_string(t));
        continue;
      }
      QuestionItem cq = it->second;
      cq.format = QuestionFormat::closed_form;
      cq.qtype = t;
      // The open question's reference answers describe the relevant content;
      // they carry over unless the transform provided its own.
      if (cq.ground_truth_original.empty()) cq.ground_truth_original = open->ground_truth_original;
      if (cq.ground_truth_target.empty()) cq.ground_truth_target = open->ground_truth_target;
      questions.push_back(*open);
      questions.push_back(std::move(cq));
    }
    r.questions = std::move(questions);
  }
  if (!issues.empty()) {
    throw ManifestValidationError(std::move(issues));
  }
  return out;
}

}  // namespace mirage::dataset
