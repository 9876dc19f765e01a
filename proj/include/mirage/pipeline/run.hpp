#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mirage/attack/attack.hpp"
#include "mirage/dataset/manifest.hpp"
#include "mirage/errors.hpp"
#include "mirage/eval/evaluate.hpp"
#include "mirage/eval/prompts.hpp"
#include "mirage/eval/rates.hpp"
#include "mirage/io/image_io.hpp"
#include "mirage/metrics/image.hpp"
#include "mirage/metrics/stats.hpp"
#include "mirage/metrics/text.hpp"
#include "mirage/models/fixture_clients.hpp"
#include "mirage/models/model_ops.hpp"
#include "mirage/pipeline/config.hpp"
#include "mirage/support/parallel.hpp"

namespace mirage::pipeline {

enum class PairStatus { completed, attack_failed, eval_skipped };

inline const char* to_string(PairStatus s) {
  switch (s) {
    case PairStatus::completed: return "completed";
    case PairStatus::attack_failed: return "attack_failed";
    default: return "eval_skipped";
  }
}

/// Deterministic attack summary: everything except wall-clock timing, which
/// lives outside so identical runs serialize identically.
struct AttackSummary {
  std::string status;
  int iterations_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_cosine = 0.0;
  std::string image_path;  // relative to the run directory
};

/// Text and image-quality metrics for one pair. Captions are judged
/// against the open-ended baseline question's two reference texts.
struct PairMetrics {
  double bleu4_original_vs_source = 0.0;
  double bleu4_original_vs_target = 0.0;
  double bleu4_adversarial_vs_source = 0.0;
  double bleu4_adversarial_vs_target = 0.0;
  double rouge_l_original_vs_source = 0.0;
  double rouge_l_original_vs_target = 0.0;
  double rouge_l_adversarial_vs_source = 0.0;
  double rouge_l_adversarial_vs_target = 0.0;
  double ssim_source = 0.0;
  double ssim_target = 0.0;
  double psnr_source_db = 0.0;
  double psnr_target_db = 0.0;
};

struct PairOutcome {
  std::string pair_id;
  std::string dataset_tag;
  PairStatus status = PairStatus::attack_failed;
  std::string error;
  std::optional<AttackSummary> attack;
  std::optional<PairMetrics> metrics;
  eval::ResponseMap captions;
  std::vector<eval::VerdictEntry> verdicts;
};

struct RunResults {
  nlohmann::ordered_json config_echo;
  models::EncoderDescriptor encoder;
  std::string detection_template_hash;
  std::string transform_template_hash;
  std::string caption_model;
  std::string learning_rate;
  std::vector<PairOutcome> pairs;
  eval::RateTable rates;
  /// Per-dataset mean/std of every pair metric (the reports recompute these
  /// from the pairs; this block is for direct consumption of the document).
  nlohmann::ordered_json aggregates = nlohmann::ordered_json::object();
  std::int64_t wall_ms = 0;
};

// --- serialization -----------------------------------------------------------

inline nlohmann::ordered_json to_json(const AttackSummary& s) {
  return {{"status", s.status},
          {"iterations_run", s.iterations_run},
          {"initial_loss", s.initial_loss},
          {"final_loss", s.final_loss},
          {"final_cosine", s.final_cosine},
          {"adversarial_image", s.image_path}};
}

inline nlohmann::ordered_json to_json(const PairMetrics& m) {
  return {{"bleu4_original_vs_source", m.bleu4_original_vs_source},
          {"bleu4_original_vs_target", m.bleu4_original_vs_target},
          {"bleu4_adversarial_vs_source", m.bleu4_adversarial_vs_source},
          {"bleu4_adversarial_vs_target", m.bleu4_adversarial_vs_target},
          {"rouge_l_original_vs_source", m.rouge_l_original_vs_source},
          {"rouge_l_original_vs_target", m.rouge_l_original_vs_target},
          {"rouge_l_adversarial_vs_source", m.rouge_l_adversarial_vs_source},
          {"rouge_l_adversarial_vs_target", m.rouge_l_adversarial_vs_target},
          {"ssim_source", m.ssim_source},
          {"ssim_target", m.ssim_target},
          {"psnr_source_db", m.psnr_source_db},
          {"psnr_target_db", m.psnr_target_db}};
}

inline PairMetrics pair_metrics_from_json(const nlohmann::json& j) {
  PairMetrics m;
  m.bleu4_original_vs_source = j.at("bleu4_original_vs_source").get<double>();
  m.bleu4_original_vs_target = j.at("bleu4_original_vs_target").get<double>();
  m.bleu4_adversarial_vs_source = j.at("bleu4_adversarial_vs_source").get<double>();
  m.bleu4_adversarial_vs_target = j.at("bleu4_adversarial_vs_target").get<double>();
  m.rouge_l_original_vs_source = j.at("rouge_l_original_vs_source").get<double>();
  m.rouge_l_original_vs_target = j.at("rouge_l_original_vs_target").get<double>();
  m.rouge_l_adversarial_vs_source = j.at("rouge_l_adversarial_vs_source").get<double>();
  m.rouge_l_adversarial_vs_target = j.at("rouge_l_adversarial_vs_target").get<double>();
  m.ssim_source = j.at("ssim_source").get<double>();
  m.ssim_target = j.at("ssim_target").get<double>();
  m.psnr_source_db = j.at("psnr_source_db").get<double>();
  m.psnr_target_db = j.at("psnr_target_db").get<double>();
  return m;
}

inline std::string response_key_label(const eval::ResponseKey& key) {
  return std::string(eval::to_string(std::get<0>(key))) + "/" +
         eval::to_string(std::get<1>(key)) + "/" + eval::to_string(std::get<2>(key));
}

inline nlohmann::ordered_json to_json(const PairOutcome& p) {
  nlohmann::ordered_json out = {{"pair_id", p.pair_id},
                                {"dataset_tag", p.dataset_tag},
                                {"status", to_string(p.status)}};
  if (!p.error.empty()) out["error"] = p.error;
  if (p.attack) out["attack"] = to_json(*p.attack);
  if (p.metrics) out["metrics"] = to_json(*p.metrics);
  if (!p.captions.empty()) {
    nlohmann::ordered_json captions;
    for (const auto& [key, text] : p.captions) {
      captions[response_key_label(key)] = text;
    }
    out["captions"] = captions;
  }
  if (!p.verdicts.empty()) {
    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    for (const auto& v : p.verdicts) {
      verdicts.push_back({{"qtype", eval::to_string(v.qtype)},
                          {"format", eval::to_string(v.format)},
                          {"role", eval::to_string(v.role)},
                          {"verdict", eval::to_string(v.verdict.verdict)},
                          {"attempts", v.verdict.attempts},
                          {"raw_output", v.verdict.raw_output}});
    }
    out["verdicts"] = verdicts;
  }
  return out;
}

inline nlohmann::ordered_json to_json(const eval::RateTable& rates) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [key, cell] : rates.cells) {
    nlohmann::ordered_json row = {{"dataset", key.dataset},
                                  {"learning_rate", key.learning_rate},
                                  {"format", eval::to_string(key.format)},
                                  {"role", eval::to_string(key.role)},
                                  {"qtype", eval::to_string(key.qtype)},
                                  {"failures", cell.failures},
                                  {"valid_total", cell.valid_total},
                                  {"invalid_count", cell.invalid_count}};
    if (const auto r = cell.rate()) {
      row["rate"] = *r;
    }
    out.push_back(row);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const RunResults& r) {
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  for (const auto& p : r.pairs) pairs.push_back(to_json(p));
  return {{"kind", "run-results"},
          {"version", "1"},
          {"config", r.config_echo},
          {"encoder", to_json(r.encoder)},
          {"template_hashes",
           {{"detection", r.detection_template_hash},
            {"transform", r.transform_template_hash}}},
          {"caption_model", r.caption_model},
          {"learning_rate", r.learning_rate},
          {"pairs", pairs},
          {"rates", to_json(r.rates)},
          {"aggregates", r.aggregates},
          {"timing", {{"wall_ms", r.wall_ms}}}};
}

/// Write a file via a temp-and-rename so a killed run never leaves a
/// half-written document at the final path.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    out.flush();
    if (!out) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

// --- attack stage ------------------------------------------------------------

struct AttackOutcome {
  std::string pair_id;
  std::string dataset_tag;
  bool ok = false;
  std::string error;
  AttackSummary summary;
};

inline ImageTensor load_prepared(const std::filesystem::path& path,
                                 const models::EncoderDescriptor& desc) {
  return models::prepare_for_encoder(io::load_image(path), desc);
}

/// Run the embedding attack over every manifest record, writing one 16-bit
/// PNG and one trace sidecar per pair plus an attack_summary.json index.
/// Per-pair failures are recorded, not thrown.
inline std::vector<AttackOutcome> run_attack_stage(const RunConfig& cfg,
                                                   const dataset::Manifest& manifest,
                                                   const models::VisionEncoder& encoder) {
  const auto attack_dir = cfg.output_dir / "attack";
  std::filesystem::create_directories(attack_dir);

  std::vector<AttackOutcome> outcomes(manifest.records.size());
  support::parallel_for(
      static_cast<int>(manifest.records.size()), cfg.concurrency, [&](int i) {
        const auto& record = manifest.records[static_cast<std::size_t>(i)];
        AttackOutcome& out = outcomes[static_cast<std::size_t>(i)];
        out.pair_id = record.pair_id;
        out.dataset_tag = record.dataset_tag;
        const auto started = std::chrono::steady_clock::now();
        try {
          const ImageTensor source =
              load_prepared(manifest.resolve(record.source_image), encoder.descriptor());
          const ImageTensor target =
              load_prepared(manifest.resolve(record.target_image), encoder.descriptor());

          const attack::AttackResult result =
              attack::run_attack(source, target, encoder, cfg.attack);

          const std::string image_name = record.pair_id + ".png";
          io::save_png16(result.adversarial_image, attack_dir / image_name);

          out.summary.status = attack::to_string(result.status);
          out.summary.iterations_run = result.iterations_run;
          out.summary.initial_loss = result.trace.front().loss;
          out.summary.final_loss = result.final_loss;
          out.summary.final_cosine = result.final_cosine;
          out.summary.image_path = "attack/" + image_name;
          out.ok = true;

          nlohmann::ordered_json trace = nlohmann::ordered_json::array();
          for (const auto& entry : result.trace) {
            trace.push_back({entry.iteration, entry.loss, entry.cosine});
          }
          const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
          nlohmann::ordered_json sidecar = {
              {"kind", "attack-sidecar"},
              {"summary",
               {{"pair_id", record.pair_id},
                {"status", out.summary.status},
                {"iterations_run", out.summary.iterations_run},
                {"initial_loss", out.summary.initial_loss},
                {"final_loss", out.summary.final_loss},
                {"final_cosine", out.summary.final_cosine},
                {"adversarial_image", image_name},
                {"attack_config", to_json(cfg.attack)},
                {"encoder", to_json(encoder.descriptor())}}},
              {"trace", trace},
              {"timing_ms", elapsed}};
          write_atomic(attack_dir / (record.pair_id + ".json"), sidecar.dump(2) + "\n");
        } catch (const std::exception& e) {
          out.ok = false;
          out.error = e.what();
        }
      });

  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (const auto& o : outcomes) {
    nlohmann::ordered_json row = {{"pair_id", o.pair_id}, {"ok", o.ok}};
    if (!o.ok) row["error"] = o.error;
    index.push_back(row);
  }
  nlohmann::ordered_json doc = {{"kind", "attack-summary"},
                                {"attack_config", to_json(cfg.attack)},
                                {"encoder", to_json(encoder.descriptor())},
                                {"encoder_selection", to_json(cfg.encoder)},
                                {"learning_rate", format_learning_rate(cfg.attack.learning_rate)},
                                {"pairs", index}};
  write_atomic(cfg.output_dir / "attack_summary.json", doc.dump(2) + "\n");
  return outcomes;
}

/// What a later `evaluate` needs from a finished attack stage.
struct AttackStageIndex {
  attack::AttackConfig config;
  EncoderSelection encoder;
  std::vector<AttackOutcome> outcomes;
};

/// Reload attack-stage outputs written by run_attack_stage, matched
/// against the manifest record order.
inline AttackStageIndex load_attack_stage(const std::filesystem::path& run_dir,
                                          const dataset::Manifest& manifest) {
  const auto summary_path = run_dir / "attack_summary.json";
  std::ifstream in(summary_path, std::ios::binary);
  if (!in) {
    throw IoError("no attack_summary.json under " + run_dir.string() +
                  "; run the attack stage first");
  }
  nlohmann::json doc;
  in >> doc;
  if (doc.value("kind", "") != "attack-summary") {
    throw ProtocolError(summary_path.string() + " is not an attack summary");
  }

  AttackStageIndex index;
  index.config = attack_config_from_json(doc.at("attack_config"));
  index.encoder = encoder_selection_from_json(doc.at("encoder_selection"));

  std::map<std::string, nlohmann::json> rows;
  for (const auto& row : doc.at("pairs")) {
    rows[row.at("pair_id").get<std::string>()] = row;
  }
  for (const auto& record : manifest.records) {
    AttackOutcome out;
    out.pair_id = record.pair_id;
    out.dataset_tag = record.dataset_tag;
    const auto it = rows.find(record.pair_id);
    if (it == rows.end()) {
      out.ok = false;
      out.error = "pair missing from attack summary";
    } else if (!it->second.value("ok", false)) {
      out.ok = false;
      out.error = it->second.value("error", "attack failed");
    } else {
      std::ifstream sidecar_in(run_dir / "attack" / (record.pair_id + ".json"),
                               std::ios::binary);
      if (!sidecar_in) {
        out.ok = false;
        out.error = "attack sidecar missing";
      } else {
        nlohmann::json sidecar;
        sidecar_in >> sidecar;
        const auto& s = sidecar.at("summary");
        out.ok = true;
        out.summary.status = s.at("status").get<std::string>();
        out.summary.iterations_run = s.at("iterations_run").get<int>();
        out.summary.initial_loss = s.at("initial_loss").get<double>();
        out.summary.final_loss = s.at("final_loss").get<double>();
        out.summary.final_cosine = s.at("final_cosine").get<double>();
        out.summary.image_path = "attack/" + s.at("adversarial_image").get<std::string>();
      }
    }
    index.outcomes.push_back(std::move(out));
  }
  return index;
}

// --- evaluation stage ----------------------------------------------------------

namespace detail {

inline PairMetrics compute_pair_metrics(const dataset::BenchmarkRecord& record,
                                        const eval::ResponseMap& captions,
                                        const ImageTensor& prepared_source,
                                        const ImageTensor& prepared_target,
                                        const ImageTensor& adversarial) {
  const auto* baseline =
      record.find_question(eval::QuestionType::baseline, eval::QuestionFormat::open_ended);
  if (!baseline) {
    throw InvalidRecordError("pair " + record.pair_id +
                             " lacks an open-ended baseline question");
  }
  const auto source_text = metrics::tokenize(baseline->ground_truth_original);
  const auto target_text = metrics::tokenize(baseline->ground_truth_target);
  const auto original_caption = metrics::tokenize(captions.at(
      {eval::QuestionType::baseline, eval::QuestionFormat::open_ended, eval::ImageRole::original}));
  const auto adversarial_caption = metrics::tokenize(captions.at(
      {eval::QuestionType::baseline, eval::QuestionFormat::open_ended, eval::ImageRole::optimized}));

  PairMetrics m;
  m.bleu4_original_vs_source = metrics::bleu4(original_caption, source_text);
  m.bleu4_original_vs_target = metrics::bleu4(original_caption, target_text);
  m.bleu4_adversarial_vs_source = metrics::bleu4(adversarial_caption, source_text);
  m.bleu4_adversarial_vs_target = metrics::bleu4(adversarial_caption, target_text);
  m.rouge_l_original_vs_source = metrics::rouge_l(original_caption, source_text);
  m.rouge_l_original_vs_target = metrics::rouge_l(original_caption, target_text);
  m.rouge_l_adversarial_vs_source = metrics::rouge_l(adversarial_caption, source_text);
  m.rouge_l_adversarial_vs_target = metrics::rouge_l(adversarial_caption, target_text);
  m.ssim_source = metrics::ssim(prepared_source, adversarial);
  m.ssim_target = metrics::ssim(prepared_target, adversarial);
  m.psnr_source_db = metrics::psnr(prepared_source, adversarial);
  m.psnr_target_db = metrics::psnr(prepared_target, adversarial);
  return m;
}

}  // namespace detail

/// Evaluate attacked pairs: caption both images for all six questions,
/// judge every response, compute semantic and image-quality metrics, and
/// aggregate hallucination rates. Captions for every pair are collected
/// before any judging starts.
inline RunResults run_eval_stage(const RunConfig& cfg, const dataset::Manifest& manifest,
                                 const models::VisionEncoder& encoder,
                                 const std::vector<AttackOutcome>& attacks) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto caption_client = make_client(cfg.caption_client, /*judge_role=*/false);
  const auto judge_client = make_client(cfg.judge_client, /*judge_role=*/true);
  const models::CaptionModel captioner(caption_client, cfg.caption_model, cfg.caption_max_tokens);
  const models::JudgeModel judge(judge_client, cfg.judge_model, cfg.judge_max_tokens);

  RunResults results;
  results.config_echo = to_json(cfg);
  results.encoder = encoder.descriptor();
  results.detection_template_hash = eval::detection_template_hash();
  results.transform_template_hash = eval::transform_template_hash();
  results.caption_model = cfg.caption_model;
  results.learning_rate = format_learning_rate(cfg.attack.learning_rate);
  results.pairs.resize(manifest.records.size());

  struct Loaded {
    ImageTensor source, target, adversarial;
  };
  std::vector<std::optional<Loaded>> images(manifest.records.size());

  // Phase 1: captions (and image loading) for every attacked pair.
  support::parallel_for(
      static_cast<int>(manifest.records.size()), cfg.concurrency, [&](int i) {
        const auto& record = manifest.records[static_cast<std::size_t>(i)];
        const auto& attack_outcome = attacks[static_cast<std::size_t>(i)];
        PairOutcome& out = results.pairs[static_cast<std::size_t>(i)];
        out.pair_id = record.pair_id;
        out.dataset_tag = record.dataset_tag;
        if (!attack_outcome.ok) {
          out.status = PairStatus::attack_failed;
          out.error = attack_outcome.error;
          return;
        }
        out.attack = attack_outcome.summary;
        try {
          Loaded loaded{
              load_prepared(manifest.resolve(record.source_image), encoder.descriptor()),
              load_prepared(manifest.resolve(record.target_image), encoder.descriptor()),
              io::load_png(cfg.output_dir / attack_outcome.summary.image_path)};
          for (const auto& q : record.questions) {
            out.captions[{q.qtype, q.format, eval::ImageRole::original}] =
                captioner.generate_caption(loaded.source, q.text);
            out.captions[{q.qtype, q.format, eval::ImageRole::optimized}] =
                captioner.generate_caption(loaded.adversarial, q.text);
          }
          images[static_cast<std::size_t>(i)] = std::move(loaded);
          out.status = PairStatus::completed;
        } catch (const std::exception& e) {
          out.status = PairStatus::eval_skipped;
          out.error = e.what();
          out.captions.clear();
        }
      });

  // Phase 2: judging + metrics for pairs whose captions are complete.
  support::parallel_for(
      static_cast<int>(manifest.records.size()), cfg.concurrency, [&](int i) {
        PairOutcome& out = results.pairs[static_cast<std::size_t>(i)];
        if (out.status != PairStatus::completed) return;
        const auto& record = manifest.records[static_cast<std::size_t>(i)];
        const auto& loaded = *images[static_cast<std::size_t>(i)];
        try {
          out.verdicts = eval::evaluate_pair(record, out.captions, judge, cfg.eval_policy);
          out.metrics = detail::compute_pair_metrics(record, out.captions, loaded.source,
                                                     loaded.target, loaded.adversarial);
        } catch (const std::exception& e) {
          out.status = PairStatus::eval_skipped;
          out.error = e.what();
          out.verdicts.clear();
          out.metrics.reset();
        }
      });

  // Phase 3: deterministic sequential aggregation.
  std::vector<eval::KeyedVerdict> keyed;
  for (const auto& p : results.pairs) {
    if (p.status != PairStatus::completed) continue;
    for (const auto& v : p.verdicts) {
      keyed.push_back({{p.dataset_tag, results.learning_rate, v.format, v.role, v.qtype},
                       v.verdict.verdict});
    }
  }
  results.rates = eval::hallucination_rates(keyed);

  std::map<std::string, std::vector<const PairMetrics*>> by_dataset;
  for (const auto& p : results.pairs) {
    if (p.status == PairStatus::completed && p.metrics) {
      by_dataset[p.dataset_tag].push_back(&*p.metrics);
    }
  }
  for (const auto& [dataset, ms] : by_dataset) {
    nlohmann::ordered_json block;
    const auto metric_json = [&](auto field) {
      std::vector<double> values;
      values.reserve(ms.size());
      for (const auto* m : ms) values.push_back(m->*field);
      const auto agg = metrics::aggregate(values);
      return nlohmann::ordered_json{{"mean", agg.mean}, {"std", agg.stddev}};
    };
    block["bleu4_original_vs_source"] = metric_json(&PairMetrics::bleu4_original_vs_source);
    block["bleu4_original_vs_target"] = metric_json(&PairMetrics::bleu4_original_vs_target);
    block["bleu4_adversarial_vs_source"] =
        metric_json(&PairMetrics::bleu4_adversarial_vs_source);
    block["bleu4_adversarial_vs_target"] =
        metric_json(&PairMetrics::bleu4_adversarial_vs_target);
    block["rouge_l_original_vs_source"] = metric_json(&PairMetrics::rouge_l_original_vs_source);
    block["rouge_l_original_vs_target"] = metric_json(&PairMetrics::rouge_l_original_vs_target);
    block["rouge_l_adversarial_vs_source"] =
        metric_json(&PairMetrics::rouge_l_adversarial_vs_source);
    block["rouge_l_adversarial_vs_target"] =
        metric_json(&PairMetrics::rouge_l_adversarial_vs_target);
    block["ssim_source"] = metric_json(&PairMetrics::ssim_source);
    block["ssim_target"] = metric_json(&PairMetrics::ssim_target);
    block["psnr_source_db"] = metric_json(&PairMetrics::psnr_source_db);
    block["psnr_target_db"] = metric_json(&PairMetrics::psnr_target_db);
    results.aggregates[dataset] = std::move(block);
  }
  results.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
  return results;
}

/// The whole workflow: load the manifest, attack every pair, evaluate, and
/// atomically write results.json into the output directory. Per-pair
/// failures never abort the run; configuration errors throw before any
/// attack starts.
inline RunResults run_pipeline(const RunConfig& cfg) {
  dataset::ManifestOptions options;
  options.decode_images = false;  // per-pair decode failures must not abort the run
  const dataset::Manifest manifest = dataset::load_manifest(cfg.manifest_path, options);
  const auto encoder = make_encoder(cfg.encoder);
  std::filesystem::create_directories(cfg.output_dir);

  const auto attacks = run_attack_stage(cfg, manifest, *encoder);
  RunResults results = run_eval_stage(cfg, manifest, *encoder, attacks);
  write_atomic(cfg.output_dir / "results.json", to_json(results).dump(2) + "\n");
  return results;
}

}  // namespace mirage::pipeline
