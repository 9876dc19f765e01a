// Acceptance suite: runs every gated criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all gated
// criteria pass. The GPU-scale check at the end needs a real vision-tower
// adapter and is reported as SKIP here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "mirage/mirage.hpp"
#include "test_support.hpp"

using namespace mirage;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, double seconds, const std::string& note = "") {
  std::printf("[%s] %-42s (%6.2fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), seconds,
              note.empty() ? "" : " ", note.c_str());
  if (!ok) ++g_failures;
}

double run_timed(const std::string& name, double budget_seconds,
                 const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string note;
  bool ok = false;
  try {
    ok = body(note);
  } catch (const std::exception& e) {
    note = std::string("exception: ") + e.what();
    ok = false;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0 && seconds > budget_seconds) {
    ok = false;
    note += " [over " + std::to_string(budget_seconds) + "s budget]";
  }
  report(name, ok, seconds, note);
  return seconds;
}

// --- criterion 1: gradient correctness ------------------------------------

bool gradient_correctness(std::string& note) {
  struct Config {
    int patch, dim;
    models::Nonlinearity nl;
    std::uint64_t seed;
  };
  std::vector<Config> configs;
  std::uint64_t seed = 1;
  for (int patch : {2, 4}) {
    for (int dim : {8, 16}) {
      for (auto nl : {models::Nonlinearity::none, models::Nonlinearity::smooth_tanh}) {
        configs.push_back({patch, dim, nl, seed++});
      }
    }
  }
  configs.push_back({4, 16, models::Nonlinearity::none, 1001});
  configs.push_back({4, 16, models::Nonlinearity::smooth_tanh, 1002});  // 10 configs

  int checked = 0;
  double worst = 0.0;
  for (const auto& c : configs) {
    models::ToyEncoderSpec spec;
    spec.input_height = spec.input_width = 16;
    spec.patch_size = c.patch;
    spec.embedding_dim = c.dim;
    spec.weight_seed = c.seed;
    spec.nonlinearity = c.nl;
    const models::ToyEncoder enc(spec);

    const auto img = test_support::random_image({16, 16, 3}, 7000 + c.seed, 0.1, 0.9);
    std::mt19937_64 rng(9000 + c.seed);
    std::vector<double> u(static_cast<std::size_t>(c.dim));
    for (double& v : u) v = support::uniform01(rng) * 2.0 - 1.0;

    const auto grad = enc.pixel_gradient(img, u);
    auto value_at = [&](const ImageTensor& x) {
      const auto mean = models::mean_pool(enc.encode(x));
      double dot = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) dot += mean.values[i] * u[i];
      return dot;
    };

    const double step = 1e-3;
    for (int t = 0; t < 20; ++t) {
      const auto idx = support::bounded(rng, img.pixels().size());
      std::vector<double> plus(img.pixels().begin(), img.pixels().end());
      std::vector<double> minus(plus);
      plus[idx] += step;
      minus[idx] -= step;
      const double fd = (value_at(ImageTensor::create(img.shape(), plus)) -
                         value_at(ImageTensor::create(img.shape(), minus))) /
                        (2.0 * step);
      const double analytic = grad.values[idx];
      const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-10});
      const double rel = std::abs(analytic - fd) / scale;
      worst = std::max(worst, rel);
      ++checked;
      if (rel > 1e-4) {
        note = "relative error " + std::to_string(rel);
        return false;
      }
    }
  }
  note = std::to_string(checked) + " pixels across 10 configs, worst rel err " +
         std::to_string(worst);
  return true;
}

// --- criteria 2 and 7: attack convergence + visual-fidelity trend ----------

struct SuiteOutcome {
  int converged = 0;
  double mean_ssim = 0.0;
  bool reverified = true;
  std::string note;
};

SuiteOutcome run_attack_suite(double learning_rate, const fs::path& dir) {
  models::ToyEncoderSpec spec;
  spec.patch_size = 4;
  spec.embedding_dim = 16;
  spec.weight_seed = 11;
  const models::ToyEncoder enc(spec);

  attack::AttackConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.tau_l = 1.44;
  cfg.tau_c = 0.95;
  cfg.max_iterations = 10000;

  SuiteOutcome out;
  double ssim_sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto src = test_support::scene_image({32, 32, 3}, 1000 + 2 * i);
    const auto tgt = test_support::scene_image({32, 32, 3}, 1001 + 2 * i);
    const auto result = attack::run_attack(src, tgt, enc, cfg);
    ssim_sum += metrics::ssim(src, result.adversarial_image);
    if (result.status != attack::AttackStatus::converged) continue;
    ++out.converged;

    // Re-verify both criteria from the image saved to disk.
    const auto png = dir / ("pair_" + std::to_string(i) + "_" +
                            pipeline::format_learning_rate(learning_rate) + ".png");
    io::save_png16(result.adversarial_image, png);
    const auto reloaded = io::load_png(png);
    const auto target_mean = models::mean_pool(enc.encode(tgt));
    const auto mean = models::mean_pool(enc.encode(reloaded));
    const double loss = attack::mse_mean_loss(mean, target_mean);
    const double cosine = attack::cosine_similarity(mean, target_mean);
    if (!(loss <= cfg.tau_l + 1e-6 && cosine >= cfg.tau_c - 1e-6)) {
      out.reverified = false;
      out.note = "pair " + std::to_string(i) + " re-verification failed: loss=" +
                 std::to_string(loss) + " cos=" + std::to_string(cosine);
    }
    if (std::abs(loss - result.final_loss) > 1e-6 ||
        std::abs(cosine - result.final_cosine) > 1e-6) {
      out.reverified = false;
      out.note = "pair " + std::to_string(i) + " drifted from its trace after save/load";
    }
  }
  out.mean_ssim = ssim_sum / 20.0;
  return out;
}

// --- criterion 3: fixed point ----------------------------------------------

bool fixed_point(std::string& note) {
  models::ToyEncoderSpec spec;
  spec.patch_size = 4;
  spec.embedding_dim = 16;
  spec.weight_seed = 11;
  const models::ToyEncoder enc(spec);
  const auto img = test_support::scene_image({32, 32, 3}, 777);
  const auto result = attack::run_attack(img, img, enc, attack::AttackConfig{});
  const bool ok = result.status == attack::AttackStatus::converged &&
                  result.iterations_run == 0 && result.final_loss == 0.0 &&
                  result.adversarial_image == img;
  if (!ok) note = "status/iterations/loss/image mismatch";
  return ok;
}

// --- criterion 4: metric oracles -------------------------------------------

bool metric_oracles(std::string& note) {
  const auto img = test_support::random_image({32, 32, 3}, 4242);
  if (std::abs(metrics::ssim(img, img) - 1.0) > 1e-6) {
    note = "ssim(a,a) != 1";
    return false;
  }
  const auto zeros = ImageTensor::filled({16, 16, 3}, 0.0);
  const auto ones = ImageTensor::filled({16, 16, 3}, 1.0);
  const double c1 = 1e-4;
  if (std::abs(metrics::ssim(zeros, ones) - c1 / (1.0 + c1)) > 1e-8) {
    note = "constant-image ssim off closed form";
    return false;
  }
  const auto tenth = ImageTensor::filled({16, 16, 3}, 0.1);
  if (std::abs(metrics::psnr(zeros, tenth) - 20.0) > 1e-9) {
    note = "psnr at mse 0.01 != 20 dB";
    return false;
  }
  const double rouge = metrics::rouge_l({"a", "c", "d"}, {"a", "b", "c", "d"});
  if (std::abs(rouge - 6.0 / 7.0) > 1e-9) {
    note = "rouge_l oracle mismatch";
    return false;
  }
  const metrics::TokenSeq sentence = {"two", "dogs", "play", "in", "the", "park"};
  if (std::abs(metrics::bleu4(sentence, sentence) - 1.0) > 1e-12) {
    note = "bleu4 of identical sentences != 1";
    return false;
  }
  return true;
}

// --- criterion 5: evaluation framework on fixtures --------------------------

// Hand-labeled five-pair fixture set. The scripted judge output for every
// (pair, qtype, format, role) is listed next to its expected verdict; the
// transcripts are recorded once and the assertions run against replay.
struct ScriptedItem {
  std::string reply;
  eval::Verdict expected;
};

dataset::BenchmarkRecord fixture_record(const std::string& pair_id) {
  dataset::BenchmarkRecord r;
  r.pair_id = pair_id;
  r.dataset_tag = "fixture";
  r.source_image = "unused_src.png";
  r.target_image = "unused_tgt.png";
  for (auto t : {eval::QuestionType::baseline, eval::QuestionType::source,
                 eval::QuestionType::target}) {
    for (auto f : {eval::QuestionFormat::open_ended, eval::QuestionFormat::closed_form}) {
      eval::QuestionItem q;
      q.text = pair_id + " question " + eval::to_string(t) + "/" + eval::to_string(f);
      q.qtype = t;
      q.format = f;
      q.ground_truth_original = "reference content for " + pair_id;
      q.ground_truth_target = "leaked content for " + pair_id;
      r.questions.push_back(q);
    }
  }
  return r;
}

using ItemKey = std::tuple<std::string, eval::QuestionType, eval::QuestionFormat, eval::ImageRole>;

std::map<ItemKey, ScriptedItem> scripted_judgments() {
  std::map<ItemKey, ScriptedItem> items;
  auto add = [&](const std::string& pair, eval::QuestionType t, eval::QuestionFormat f,
                 eval::ImageRole role, const std::string& reply, eval::Verdict expected) {
    items[{pair, t, f, role}] = {reply, expected};
  };
  using enum eval::QuestionType;
  using enum eval::QuestionFormat;
  using enum eval::ImageRole;

  const std::vector<std::string> pairs = {"fix0", "fix1", "fix2", "fix3", "fix4"};
  for (const auto& pair : pairs) {
    for (auto t : {baseline, source, target}) {
      for (auto f : {open_ended, closed_form}) {
        // Defaults: originals pass plainly, optimized fail plainly.
        add(pair, t, f, original, R"({"score": "PASS"})", eval::Verdict::PASS);
        add(pair, t, f, optimized, R"({"score": "FAIL"})", eval::Verdict::FAIL);
      }
    }
  }
  // fix1: a fully clean pair; even optimized answers pass.
  for (auto t : {baseline, source, target}) {
    for (auto f : {open_ended, closed_form}) {
      add("fix1", t, f, optimized, R"({"score": "PASS"})", eval::Verdict::PASS);
    }
  }
  // fix2: judge wraps verdicts in prose and markdown fences.
  add("fix2", baseline, open_ended, original,
      "The response matches the reference.\n```json\n{\"score\": \"PASS\"}\n```",
      eval::Verdict::PASS);
  add("fix2", target, closed_form, optimized,
      R"(Analysis: leaked content present. {"score":"FAIL"} as required.)",
      eval::Verdict::FAIL);
  // fix3: two items keep coming back malformed -> INVALID after re-asks.
  add("fix3", source, open_ended, optimized, "I cannot provide a verdict.",
      eval::Verdict::INVALID);
  add("fix3", target, open_ended, optimized, R"({"score": "UNSURE"})",
      eval::Verdict::INVALID);
  // fix4: lowercase scores and nested objects.
  add("fix4", baseline, closed_form, original, R"({"result": {"score": "pass"}})",
      eval::Verdict::PASS);
  add("fix4", target, open_ended, optimized, R"({"score": "fail", "confidence": 0.9})",
      eval::Verdict::FAIL);
  return items;
}

bool evaluation_framework(std::string& note) {
  const auto items = scripted_judgments();

  // The scripted judge recovers (pair, qtype, format, role) from the prompt.
  auto scripted = std::make_shared<models::MockChatClient>(
      [&items](const models::ChatRequest& req) -> std::string {
        const std::string& prompt = req.messages.front().text;
        const std::regex q_re("(fix[0-9]+) question ([a-z]+)/([a-z_]+)");
        std::smatch m;
        if (!std::regex_search(prompt, m, q_re)) throw ProtocolError("unscripted prompt");
        const eval::ImageRole role = prompt.find("OPTIMIZED") != std::string::npos
                                         ? eval::ImageRole::optimized
                                         : eval::ImageRole::original;
        const ItemKey key{m[1], eval::question_type_from(m[2].str()),
                          eval::question_format_from(m[3].str()), role};
        return items.at(key).reply;
      });

  test_support::ScratchDir dir("acceptance-replay");
  {  // record the transcripts
    models::RecordingChatClient recorder(scripted, dir.path());
    const models::JudgeModel judge(
        std::shared_ptr<models::ChatClient>(&recorder, [](models::ChatClient*) {}),
        "fixture-judge");
    eval::EvaluationPolicy policy;
    policy.sleep_ms = [](int) {};
    for (int i = 0; i < 5; ++i) {
      const auto record = fixture_record("fix" + std::to_string(i));
      eval::ResponseMap responses;
      for (const auto& q : record.questions) {
        for (auto role : {eval::ImageRole::original, eval::ImageRole::optimized}) {
          responses[{q.qtype, q.format, role}] = "model answer";
        }
      }
      (void)eval::evaluate_pair(record, responses, judge, policy);
    }
  }

  // Replay and compare against the hand labels.
  const models::JudgeModel judge(std::make_shared<models::ReplayChatClient>(dir.path()),
                                 "fixture-judge");
  eval::EvaluationPolicy policy;
  policy.sleep_ms = [](int) {};
  int checked = 0;
  for (int i = 0; i < 5; ++i) {
    const auto pair_id = "fix" + std::to_string(i);
    const auto record = fixture_record(pair_id);
    eval::ResponseMap responses;
    for (const auto& q : record.questions) {
      for (auto role : {eval::ImageRole::original, eval::ImageRole::optimized}) {
        responses[{q.qtype, q.format, role}] = "model answer";
      }
    }
    const auto verdicts = eval::evaluate_pair(record, responses, judge, policy);
    if (verdicts.size() != 12) {
      note = pair_id + ": expected 12 verdicts";
      return false;
    }
    for (const auto& v : verdicts) {
      const auto& expected = items.at({pair_id, v.qtype, v.format, v.role}).expected;
      if (v.verdict.verdict != expected) {
        note = pair_id + " (" + eval::to_string(v.qtype) + "/" + eval::to_string(v.format) +
               "/" + eval::to_string(v.role) + "): got " + eval::to_string(v.verdict.verdict) +
               ", labeled " + eval::to_string(expected);
        return false;
      }
      ++checked;
    }
  }

  // Synthetic 200-verdict fixture against an independent counting oracle.
  std::mt19937_64 rng(512);
  std::vector<eval::KeyedVerdict> keyed;
  std::map<eval::RateKey, std::array<long, 3>> oracle;
  for (int i = 0; i < 200; ++i) {
    eval::RateKey key;
    key.dataset = (i % 3 == 0) ? "setA" : "setB";
    key.learning_rate = "0.007";
    key.format = support::bounded(rng, 2) ? eval::QuestionFormat::open_ended
                                          : eval::QuestionFormat::closed_form;
    key.role = support::bounded(rng, 2) ? eval::ImageRole::original
                                        : eval::ImageRole::optimized;
    key.qtype = static_cast<eval::QuestionType>(support::bounded(rng, 3));
    const auto verdict = static_cast<eval::Verdict>(support::bounded(rng, 3));
    keyed.push_back({key, verdict});
    oracle[key][static_cast<int>(verdict)]++;
  }
  const auto table = eval::hallucination_rates(keyed);
  if (table.cells.size() != oracle.size()) {
    note = "rate table cell count mismatch";
    return false;
  }
  for (const auto& [key, counts] : oracle) {
    const auto& cell = table.cells.at(key);
    const bool match = cell.failures == counts[1] &&
                       cell.valid_total == counts[0] + counts[1] &&
                       cell.invalid_count == counts[2];
    const bool rate_match =
        cell.valid_total == 0 ||
        *cell.rate() == static_cast<double>(counts[1]) / (counts[0] + counts[1]);
    if (!match || !rate_match) {
      note = "counting oracle mismatch";
      return false;
    }
  }
  note = std::to_string(checked) + " hand-labeled verdicts + 200-verdict tally";
  return true;
}

// --- criterion 6: pipeline determinism ---------------------------------------

bool pipeline_determinism(std::string& note) {
  test_support::ScratchDir dir("acceptance-pipeline");
  const auto demo = pipeline::make_demo_benchmark(dir.path() / "demo", pipeline::DemoSpec{});

  auto base_config = [&](const fs::path& out) {
    pipeline::RunConfig cfg;
    cfg.manifest_path = demo.manifest;
    cfg.output_dir = out;
    cfg.encoder.toy.weight_seed = 11;
    cfg.attack.learning_rate = 0.007;
    cfg.attack.seed = 9;
    cfg.caption_model = "fixture-captioner";
    cfg.judge_model = "emulated-judge";
    cfg.concurrency = 2;
    cfg.eval_policy.sleep_ms = [](int) {};
    return cfg;
  };

  {  // seed run records every model exchange
    auto cfg = base_config(dir.path() / "seed-run");
    cfg.caption_client.kind = pipeline::ClientSelection::Kind::fixture;
    cfg.caption_client.fixture_file = demo.captions;
    cfg.caption_client.record_dir = dir.path() / "rec-captions";
    cfg.judge_client.kind = pipeline::ClientSelection::Kind::emulated;
    cfg.judge_client.record_dir = dir.path() / "rec-judge";
    (void)pipeline::run_pipeline(cfg);
  }

  auto replay_run = [&](const fs::path& out) {
    auto cfg = base_config(out);
    cfg.caption_client.kind = pipeline::ClientSelection::Kind::replay;
    cfg.caption_client.replay_dir = dir.path() / "rec-captions";
    cfg.judge_client.kind = pipeline::ClientSelection::Kind::replay;
    cfg.judge_client.replay_dir = dir.path() / "rec-judge";
    const auto results = pipeline::run_pipeline(cfg);
    return pipeline::render_reports(results, out / "reports");
  };
  const auto r1 = replay_run(dir.path() / "run1");
  const auto r2 = replay_run(dir.path() / "run2");

  auto file_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::vector<std::pair<fs::path, fs::path>> files = {
      {r1.semantic, r2.semantic},
      {r1.rates, r2.rates},
      {r1.rate_counts, r2.rate_counts},
      {r1.image_quality, r2.image_quality}};
  for (const auto& [a, b] : files) {
    if (file_bytes(a) != file_bytes(b)) {
      note = "report differs: " + a.filename().string();
      return false;
    }
  }
  note = "4 report files byte-identical across replay runs";
  return true;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");

  run_timed("gradient correctness (10 toy configs)", 30.0, gradient_correctness);

  test_support::ScratchDir attack_dir("acceptance-attack");
  SuiteOutcome fast, slow;
  run_timed("attack convergence (20 pairs, lr 0.007)", 300.0, [&](std::string& note) {
    fast = run_attack_suite(0.007, attack_dir.path());
    if (!fast.reverified) {
      note = fast.note;
      return false;
    }
    note = std::to_string(fast.converged) +
           "/20 converged, saved images re-verify both criteria within 1e-6";
    return fast.converged >= 19;  // >= 95%
  });

  run_timed("fixed point (target = source)", 30.0, fixed_point);
  run_timed("metric oracles (SSIM/PSNR/ROUGE/BLEU)", 30.0, metric_oracles);
  run_timed("evaluation framework on fixtures", 60.0, evaluation_framework);
  run_timed("pipeline determinism (replay clients)", 120.0, pipeline_determinism);

  run_timed("visual-fidelity trend (lr 0.001 vs 0.007)", 300.0, [&](std::string& note) {
    slow = run_attack_suite(0.001, attack_dir.path());
    char buf[128];
    std::snprintf(buf, sizeof(buf), "mean SSIM %.4f (lr 0.001) vs %.4f (lr 0.007)",
                  slow.mean_ssim, fast.mean_ssim);
    note = buf;
    return slow.mean_ssim > fast.mean_ssim;
  });

  std::printf("[SKIP] GPU-scale check (real vision-tower adapter not present; "
              "optional, not gated)\n");

  if (g_failures == 0) {
    std::printf("================\nall gated criteria passed\n");
    return 0;
  }
  std::printf("================\n%d criteria FAILED\n", g_failures);
  return 1;
}
