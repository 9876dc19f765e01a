// Command-line entry point: attack, evaluate, report, transform-questions,
// validate-manifest, plus a fixtures generator for offline demo runs.
//
// Exit codes: 0 success, 1 configuration error, 2 run finished but some
// pairs failed.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mirage/mirage.hpp"

namespace fs = std::filesystem;
using namespace mirage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitPartialFailure = 2;

struct EncoderFlags {
  std::string kind = "toy";
  std::string url;
  int size = 32;
  int patch = 4;
  int dim = 16;
  std::uint64_t seed = 0;
  bool tanh = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--encoder", kind, "Encoder backend: toy or remote")
        ->check(CLI::IsMember({"toy", "remote"}));
    cmd->add_option("--encoder-url", url, "Remote encoder base URL");
    cmd->add_option("--toy-size", size, "Toy encoder input size (square)");
    cmd->add_option("--toy-patch", patch, "Toy encoder patch size");
    cmd->add_option("--toy-dim", dim, "Toy encoder embedding dim");
    cmd->add_option("--toy-seed", seed, "Toy encoder weight seed");
    cmd->add_flag("--toy-tanh", tanh, "Use the smooth-tanh toy nonlinearity");
  }

  pipeline::EncoderSelection selection() const {
    pipeline::EncoderSelection sel;
    if (kind == "remote") {
      if (url.empty()) throw InvalidInputError("--encoder remote requires --encoder-url");
      sel.kind = pipeline::EncoderSelection::Kind::remote;
      sel.remote_url = url;
      return sel;
    }
    sel.kind = pipeline::EncoderSelection::Kind::toy;
    sel.toy.input_height = size;
    sel.toy.input_width = size;
    sel.toy.channels = 3;
    sel.toy.patch_size = patch;
    sel.toy.embedding_dim = dim;
    sel.toy.weight_seed = seed;
    sel.toy.nonlinearity = tanh ? models::Nonlinearity::smooth_tanh : models::Nonlinearity::none;
    return sel;
  }
};

struct ClientFlags {
  std::string role;  // "caption" or "judge"
  std::string kind;
  std::string url;
  std::string model;
  std::string api_key;
  std::string fixture_file;
  std::string replay_dir;
  std::string record_dir;

  void attach(CLI::App* cmd, const std::string& role_name, const std::string& default_kind,
              const std::string& kinds_help) {
    role = role_name;
    kind = default_kind;
    cmd->add_option("--" + role + "-client", kind, role + " client kind: " + kinds_help);
    cmd->add_option("--" + role + "-url", url, role + " endpoint base URL");
    cmd->add_option("--" + role + "-model", model, role + " model name");
    cmd->add_option("--" + role + "-api-key", api_key,
                    role + " API key (MIRAGE_" +
                        (role == "judge" ? std::string("JUDGE") : std::string("CAPTION")) +
                        "_API_KEY overrides)");
    cmd->add_option("--" + role + "-fixtures", fixture_file,
                    role + " caption-fixtures file (kind=fixture)");
    cmd->add_option("--" + role + "-replay-dir", replay_dir,
                    role + " replay fixture directory (kind=replay)");
    cmd->add_option("--" + role + "-record-dir", record_dir,
                    "Record every " + role + " exchange into this directory");
  }

  pipeline::ClientSelection selection() const {
    pipeline::ClientSelection sel;
    if (kind == "http") {
      if (url.empty()) {
        throw InvalidInputError("--" + role + "-client http requires --" + role + "-url");
      }
      sel.kind = pipeline::ClientSelection::Kind::http;
      sel.http.base_url = url;
      sel.http.api_key = api_key;
      sel.http.api_key_env =
          role == "judge" ? "MIRAGE_JUDGE_API_KEY" : "MIRAGE_CAPTION_API_KEY";
    } else if (kind == "replay") {
      if (replay_dir.empty()) {
        throw InvalidInputError("--" + role + "-client replay requires --" + role +
                                "-replay-dir");
      }
      sel.kind = pipeline::ClientSelection::Kind::replay;
      sel.replay_dir = replay_dir;
    } else if (kind == "fixture") {
      if (fixture_file.empty()) {
        throw InvalidInputError("--" + role + "-client fixture requires --" + role +
                                "-fixtures");
      }
      sel.kind = pipeline::ClientSelection::Kind::fixture;
      sel.fixture_file = fixture_file;
    } else if (kind == "emulated") {
      sel.kind = pipeline::ClientSelection::Kind::emulated;
    } else {
      throw InvalidInputError("unknown client kind '" + kind + "'");
    }
    if (!record_dir.empty()) sel.record_dir = record_dir;
    return sel;
  }
};

void attach_attack_flags(CLI::App* cmd, attack::AttackConfig& cfg) {
  cmd->add_option("--lr", cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--tau-l", cfg.tau_l, "Squared-L2 convergence threshold");
  cmd->add_option("--tau-c", cfg.tau_c, "Cosine-similarity convergence threshold");
  cmd->add_option("--max-iters", cfg.max_iterations, "Iteration cap");
  cmd->add_option("--adam-beta1", cfg.adam_beta1, "Adam beta1");
  cmd->add_option("--adam-beta2", cfg.adam_beta2, "Adam beta2");
  cmd->add_option("--adam-eps", cfg.adam_epsilon, "Adam epsilon");
  cmd->add_option("--seed", cfg.seed, "Run seed (echoed into artifacts)");
}

int run_attack_cmd(const std::string& manifest_path, const std::string& out_dir,
                   const EncoderFlags& encoder_flags, const attack::AttackConfig& attack_cfg,
                   int jobs) {
  pipeline::RunConfig cfg;
  cfg.manifest_path = manifest_path;
  cfg.output_dir = out_dir;
  cfg.encoder = encoder_flags.selection();
  cfg.attack = attack_cfg;
  cfg.concurrency = jobs;

  dataset::ManifestOptions options;
  options.decode_images = false;
  const auto manifest = dataset::load_manifest(cfg.manifest_path, options);
  const auto encoder = pipeline::make_encoder(cfg.encoder);
  const auto outcomes = pipeline::run_attack_stage(cfg, manifest, *encoder);

  int failed = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      std::printf("%-12s %-22s iters=%-6d loss=%.6f cos=%.6f\n", o.pair_id.c_str(),
                  o.summary.status.c_str(), o.summary.iterations_run, o.summary.final_loss,
                  o.summary.final_cosine);
    } else {
      ++failed;
      std::printf("%-12s FAILED: %s\n", o.pair_id.c_str(), o.error.c_str());
    }
  }
  std::printf("%zu pairs, %d failed; artifacts under %s\n", outcomes.size(), failed,
              out_dir.c_str());
  return failed == 0 ? kExitOk : kExitPartialFailure;
}

int run_evaluate_cmd(const std::string& manifest_path, const std::string& run_dir,
                     const ClientFlags& caption_flags, const ClientFlags& judge_flags,
                     int jobs, int judge_attempts, int judge_reasks) {
  dataset::ManifestOptions options;
  options.decode_images = false;
  const auto manifest = dataset::load_manifest(manifest_path, options);
  const auto stage = pipeline::load_attack_stage(run_dir, manifest);

  pipeline::RunConfig cfg;
  cfg.manifest_path = manifest_path;
  cfg.output_dir = run_dir;
  cfg.encoder = stage.encoder;
  cfg.attack = stage.config;
  cfg.caption_client = caption_flags.selection();
  cfg.judge_client = judge_flags.selection();
  if (!caption_flags.model.empty()) cfg.caption_model = caption_flags.model;
  if (!judge_flags.model.empty()) cfg.judge_model = judge_flags.model;
  cfg.concurrency = jobs;
  cfg.eval_policy.transport_attempts = judge_attempts;
  cfg.eval_policy.parse_reasks = judge_reasks;

  const auto encoder = pipeline::make_encoder(cfg.encoder);
  const auto results = pipeline::run_eval_stage(cfg, manifest, *encoder, stage.outcomes);
  pipeline::write_atomic(cfg.output_dir / "results.json",
                         pipeline::to_json(results).dump(2) + "\n");

  int not_completed = 0;
  for (const auto& p : results.pairs) {
    if (p.status != pipeline::PairStatus::completed) {
      ++not_completed;
      std::printf("%-12s %s: %s\n", p.pair_id.c_str(), pipeline::to_string(p.status),
                  p.error.c_str());
    }
  }
  std::printf("%zu pairs evaluated, %d not completed; results at %s/results.json\n",
              results.pairs.size(), not_completed, run_dir.c_str());
  return not_completed == 0 ? kExitOk : kExitPartialFailure;
}

int run_report_cmd(const std::string& results_path, const std::string& out_dir) {
  const auto results = pipeline::load_results(results_path);
  const auto paths = pipeline::render_reports(results, out_dir);
  std::printf("wrote %s\n", paths.semantic.string().c_str());
  std::printf("wrote %s\n", paths.rates.string().c_str());
  std::printf("wrote %s\n", paths.rate_counts.string().c_str());
  std::printf("wrote %s\n", paths.image_quality.string().c_str());
  return kExitOk;
}

int run_transform_cmd(const std::string& manifest_path, const std::string& out_path,
                      const ClientFlags& judge_flags) {
  dataset::ManifestOptions options;
  options.grid = dataset::QuestionGrid::open_only;
  options.decode_images = false;
  const auto manifest = dataset::load_manifest(manifest_path, options);

  const auto client = pipeline::make_client(judge_flags.selection(), /*judge_role=*/true);
  const models::JudgeModel judge(client, judge_flags.model.empty() ? "judge-model"
                                                                   : judge_flags.model);
  const auto transformed = pipeline::transform_manifest_questions(manifest, judge);
  dataset::save_manifest(transformed, out_path);
  std::printf("wrote %s (%zu records, closed forms attached)\n", out_path.c_str(),
              transformed.records.size());
  return kExitOk;
}

int run_validate_cmd(const std::string& manifest_path, const std::string& grid,
                     bool no_decode) {
  dataset::ManifestOptions options;
  options.grid = grid == "open" ? dataset::QuestionGrid::open_only : dataset::QuestionGrid::full;
  options.decode_images = !no_decode;
  const auto manifest = dataset::load_manifest(manifest_path, options);
  std::printf("OK: %zu records, version %s\n", manifest.records.size(),
              manifest.version.c_str());
  return kExitOk;
}

int run_fixtures_cmd(const std::string& out_dir, int pairs, int size, std::uint64_t seed,
                     const std::string& tag) {
  pipeline::DemoSpec spec;
  spec.pairs = pairs;
  spec.image_size = size;
  spec.seed = seed;
  spec.dataset_tag = tag;
  const auto paths = pipeline::make_demo_benchmark(out_dir, spec);
  std::printf("wrote %s\n", paths.manifest.string().c_str());
  std::printf("wrote %s\n", paths.captions.string().c_str());
  std::printf("images under %s\n", paths.images_dir.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embedding-space adversarial image toolkit with hallucination evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "Optimize source images toward target embeddings");
  std::string attack_manifest, attack_out;
  attack_cmd->add_option("--manifest", attack_manifest, "Benchmark manifest")->required();
  attack_cmd->add_option("--out", attack_out, "Run output directory")->required();
  EncoderFlags attack_encoder;
  attack_encoder.attach(attack_cmd);
  attack::AttackConfig attack_cfg;
  attach_attack_flags(attack_cmd, attack_cfg);
  int attack_jobs = 1;
  attack_cmd->add_option("--jobs", attack_jobs, "Concurrent attack workers");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Caption, judge, and measure attacked pairs");
  std::string eval_manifest, eval_run;
  eval_cmd->add_option("--manifest", eval_manifest, "Benchmark manifest")->required();
  eval_cmd->add_option("--run", eval_run, "Run directory produced by `attack`")->required();
  ClientFlags caption_flags, judge_flags;
  caption_flags.attach(eval_cmd, "caption", "http", "http, replay, fixture");
  judge_flags.attach(eval_cmd, "judge", "http", "http, replay, emulated");
  int eval_jobs = 1, judge_attempts = 3, judge_reasks = 2;
  eval_cmd->add_option("--jobs", eval_jobs, "Concurrent evaluation workers");
  eval_cmd->add_option("--judge-attempts", judge_attempts, "Transport attempts per judge call");
  eval_cmd->add_option("--judge-reasks", judge_reasks, "Re-asks on unparseable judge output");

  // report
  auto* report_cmd = app.add_subcommand("report", "Render CSV tables from a results document");
  std::string report_results, report_out, report_format = "csv";
  report_cmd->add_option("--results", report_results, "results.json path")->required();
  report_cmd->add_option("--out", report_out, "Report output directory")->required();
  report_cmd->add_option("--format", report_format, "Report format")
      ->check(CLI::IsMember({"csv"}));

  // transform-questions
  auto* transform_cmd =
      app.add_subcommand("transform-questions", "Rewrite open-ended questions as closed form");
  std::string transform_manifest, transform_out;
  transform_cmd->add_option("--manifest", transform_manifest, "Open-question manifest")->required();
  transform_cmd->add_option("--out", transform_out, "Output manifest path")->required();
  ClientFlags transform_judge;
  transform_judge.attach(transform_cmd, "judge", "http", "http, replay, emulated");

  // validate-manifest
  auto* validate_cmd = app.add_subcommand("validate-manifest", "Check a manifest and its images");
  std::string validate_manifest_path, validate_grid = "full";
  bool validate_no_decode = false;
  validate_cmd->add_option("--manifest", validate_manifest_path, "Manifest path")->required();
  validate_cmd->add_option("--grid", validate_grid, "Question grid: full or open")
      ->check(CLI::IsMember({"full", "open"}));
  validate_cmd->add_flag("--no-decode", validate_no_decode,
                         "Check image existence only, skip decoding");

  // fixtures
  auto* fixtures_cmd =
      app.add_subcommand("fixtures", "Generate the synthetic offline demo benchmark");
  std::string fixtures_out, fixtures_tag = "demo";
  int fixtures_pairs = 2, fixtures_size = 32;
  std::uint64_t fixtures_seed = 7;
  fixtures_cmd->add_option("--out", fixtures_out, "Output directory")->required();
  fixtures_cmd->add_option("--pairs", fixtures_pairs, "Number of pairs");
  fixtures_cmd->add_option("--size", fixtures_size, "Image size (square)");
  fixtures_cmd->add_option("--seed", fixtures_seed, "Scene seed");
  fixtures_cmd->add_option("--tag", fixtures_tag, "dataset_tag for the records");

  CLI11_PARSE(app, argc, argv);

  try {
    if (attack_cmd->parsed()) {
      return run_attack_cmd(attack_manifest, attack_out, attack_encoder, attack_cfg, attack_jobs);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate_cmd(eval_manifest, eval_run, caption_flags, judge_flags, eval_jobs,
                              judge_attempts, judge_reasks);
    }
    if (report_cmd->parsed()) {
      return run_report_cmd(report_results, report_out);
    }
    if (transform_cmd->parsed()) {
      return run_transform_cmd(transform_manifest, transform_out, transform_judge);
    }
    if (validate_cmd->parsed()) {
      return run_validate_cmd(validate_manifest_path, validate_grid, validate_no_decode);
    }
    if (fixtures_cmd->parsed()) {
      return run_fixtures_cmd(fixtures_out, fixtures_pairs, fixtures_size, fixtures_seed,
                              fixtures_tag);
    }
  } catch (const ManifestValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitOk;
}
