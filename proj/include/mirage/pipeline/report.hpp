#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/errors.hpp"
#include "mirage/metrics/stats.hpp"
#include "mirage/pipeline/run.hpp"

namespace mirage::pipeline {

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string mean_std(const std::vector<double>& values) {
  if (values.empty()) return "n/a";
  const auto agg = metrics::aggregate(values);
  return fixed(agg.mean, 4) + "±" + fixed(agg.stddev, 4);
}

/// Delta with the direction marker used in the result tables: ↑ for an
/// increase under attack, ↓ for a decrease, bare 0 for no change.
inline std::string delta(double adversarial_mean, double original_mean) {
  const double d = adversarial_mean - original_mean;
  if (d > 0) return "↑" + fixed(d, 4);
  if (d < 0) return "↓" + fixed(-d, 4);
  return fixed(0.0, 4);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct MetricColumn {
  std::vector<double> values;
  double mean() const { return metrics::aggregate(values).mean; }
};

}  // namespace detail

struct ReportPaths {
  std::filesystem::path semantic;      // table1: BLEU/ROUGE with deltas
  std::filesystem::path rates;         // table2: hallucination rates
  std::filesystem::path rate_counts;   // table2 companion: raw counts
  std::filesystem::path image_quality; // table3: SSIM/PSNR
};

/// Render the three CSV report tables (plus a raw-count companion for the
/// rate table) from completed pairs. Deterministic: identical results
/// documents produce byte-identical files.
inline ReportPaths render_reports(const RunResults& results,
                                  const std::filesystem::path& out_dir) {
  if (results.pairs.empty()) {
    throw InvalidInputError("cannot render reports from empty results");
  }
  std::filesystem::create_directories(out_dir);
  ReportPaths paths{out_dir / "semantic_metrics.csv", out_dir / "hallucination_rates.csv",
                    out_dir / "hallucination_counts.csv", out_dir / "image_quality.csv"};

  // Group completed-pair metrics by dataset tag.
  std::map<std::string, std::vector<const PairMetrics*>> by_dataset;
  for (const auto& p : results.pairs) {
    if (p.status == PairStatus::completed && p.metrics) {
      by_dataset[p.dataset_tag].push_back(&*p.metrics);
    }
  }

  // --- semantic metrics (BLEU-4 / ROUGE-L, source and target texts) ---
  {
    std::string csv =
        "dataset,model,text,orig_bleu,orig_rouge,adv_bleu,bleu_delta,adv_rouge,rouge_delta\n";
    for (const auto& [dataset,ms] : by_dataset) {
      for (const bool source_text : {true, false}) {
        std::vector<double> ob, orr, ab, ar;
        for (const auto* m : ms) {
          ob.push_back(source_text ? m->bleu4_original_vs_source : m->bleu4_original_vs_target);
          orr.push_back(source_text ? m->rouge_l_original_vs_source
                                    : m->rouge_l_original_vs_target);
          ab.push_back(source_text ? m->bleu4_adversarial_vs_source
                                   : m->bleu4_adversarial_vs_target);
          ar.push_back(source_text ? m->rouge_l_adversarial_vs_source
                                   : m->rouge_l_adversarial_vs_target);
        }
        csv += detail::csv_escape(dataset) + "," + detail::csv_escape(results.caption_model) +
               "," + (source_text ? "source" : "target") + "," + detail::mean_std(ob) + "," +
               detail::mean_std(orr) + "," + detail::mean_std(ab) + ",";
        csv += ob.empty() ? "n/a" : detail::delta(metrics::aggregate(ab).mean,
                                                  metrics::aggregate(ob).mean);
        csv += "," + detail::mean_std(ar) + ",";
        csv += orr.empty() ? "n/a" : detail::delta(metrics::aggregate(ar).mean,
                                                   metrics::aggregate(orr).mean);
        csv += "\n";
      }
    }
    write_atomic(paths.semantic, csv);
  }

  // --- hallucination rates (percent; absent cells stay absent) ---
  {
    std::set<std::pair<std::string, std::string>> groups;  // (dataset, lr)
    for (const auto& [key, cell] : results.rates.cells) {
      groups.insert({key.dataset, key.learning_rate});
    }
    auto cell_text = [&](const std::string& dataset, const std::string& lr,
                         eval::QuestionFormat format, eval::ImageRole role,
                         eval::QuestionType qtype) -> std::string {
      const auto it = results.rates.cells.find({dataset, lr, format, role, qtype});
      if (it == results.rates.cells.end()) return "n/a";
      const auto rate = it->second.rate();
      if (!rate) return "n/a";
      return detail::fixed(*rate * 100.0, 1);
    };

    std::string csv =
        "format,dataset,learning_rate,orig_img_baseline_q,orig_img_source_q,orig_img_target_q,"
        "opt_img_baseline_q,opt_img_source_q,opt_img_target_q\n";
    std::string counts =
        "format,dataset,learning_rate,role,qtype,failures,valid_total,invalid_count\n";
    for (const auto format : {eval::QuestionFormat::open_ended, eval::QuestionFormat::closed_form}) {
      for (const auto& [dataset, lr] : groups) {
        csv += std::string(eval::to_string(format)) + "," + detail::csv_escape(dataset) + "," + lr;
        for (const auto role : {eval::ImageRole::original, eval::ImageRole::optimized}) {
          for (const auto qtype : {eval::QuestionType::baseline, eval::QuestionType::source,
                                   eval::QuestionType::target}) {
            csv += "," + cell_text(dataset, lr, format, role, qtype);
            const auto it = results.rates.cells.find({dataset, lr, format, role, qtype});
            if (it != results.rates.cells.end()) {
              counts += std::string(eval::to_string(format)) + "," + detail::csv_escape(dataset) +
                        "," + lr + "," + eval::to_string(role) + "," + eval::to_string(qtype) +
                        "," + std::to_string(it->second.failures) + "," +
                        std::to_string(it->second.valid_total) + "," +
                        std::to_string(it->second.invalid_count) + "\n";
            }
          }
        }
        csv += "\n";
      }
    }
    write_atomic(paths.rates, csv);
    write_atomic(paths.rate_counts, counts);
  }

  // --- image quality (SSIM / PSNR against source and target) ---
  {
    std::string csv =
        "dataset,learning_rate,ssim_source_optimized,ssim_target_optimized,"
        "psnr_source_optimized_db,psnr_target_optimized_db\n";
    for (const auto& [dataset, ms] : by_dataset) {
      std::vector<double> ss, st, ps, pt;
      for (const auto* m : ms) {
        ss.push_back(m->ssim_source);
        st.push_back(m->ssim_target);
        ps.push_back(m->psnr_source_db);
        pt.push_back(m->psnr_target_db);
      }
      csv += detail::csv_escape(dataset) + "," + results.learning_rate + "," +
             detail::mean_std(ss) + "," + detail::mean_std(st) + "," + detail::mean_std(ps) +
             "," + detail::mean_std(pt) + "\n";
    }
    write_atomic(paths.image_quality, csv);
  }

  return paths;
}

/// Reload the fields of a results document that reports need. Verdict raw
/// outputs and captions are not round-tripped.
inline RunResults load_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open results " + path.string());
  nlohmann::json doc;
  in >> doc;
  if (doc.value("kind", "") != "run-results") {
    throw ProtocolError(path.string() + " is not a run-results document");
  }

  RunResults r;
  r.caption_model = doc.value("caption_model", "");
  r.learning_rate = doc.value("learning_rate", "");
  r.detection_template_hash = doc["template_hashes"].value("detection", "");
  r.transform_template_hash = doc["template_hashes"].value("transform", "");
  for (const auto& pj : doc.at("pairs")) {
    PairOutcome p;
    p.pair_id = pj.at("pair_id").get<std::string>();
    p.dataset_tag = pj.value("dataset_tag", "");
    const std::string status = pj.at("status").get<std::string>();
    p.status = status == "completed"       ? PairStatus::completed
               : status == "attack_failed" ? PairStatus::attack_failed
                                           : PairStatus::eval_skipped;
    if (pj.contains("metrics")) {
      p.metrics = pair_metrics_from_json(pj.at("metrics"));
    }
    r.pairs.push_back(std::move(p));
  }
  for (const auto& row : doc.at("rates")) {
    eval::RateKey key{row.at("dataset").get<std::string>(),
                      row.at("learning_rate").get<std::string>(),
                      eval::question_format_from(row.at("format").get<std::string>()),
                      eval::image_role_from(row.at("role").get<std::string>()),
                      eval::question_type_from(row.at("qtype").get<std::string>())};
    eval::RateCell cell{row.at("failures").get<std::int64_t>(),
                        row.at("valid_total").get<std::int64_t>(),
                        row.at("invalid_count").get<std::int64_t>()};
    r.rates.cells[key] = cell;
  }
  return r;
}

}  // namespace mirage::pipeline
