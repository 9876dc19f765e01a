#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/dataset/manifest.hpp"
#include "mirage/errors.hpp"
#include "mirage/image.hpp"
#include "mirage/io/image_io.hpp"
#include "mirage/support/random.hpp"

namespace mirage::pipeline {

/// Parameters for the synthetic demo benchmark: procedurally drawn scenes
/// (a colored shape on a colored background) paired with question sets and
/// a caption-fixtures file, so the whole workflow runs offline.
struct DemoSpec {
  int pairs = 2;
  int image_size = 32;
  std::uint64_t seed = 7;
  std::string dataset_tag = "demo";
};

struct DemoPaths {
  std::filesystem::path manifest;
  std::filesystem::path captions;
  std::filesystem::path images_dir;
};

namespace demo_detail {

struct NamedColor {
  const char* name;
  double r, g, b;
};

inline constexpr std::array<NamedColor, 8> kPalette = {{
    {"red", 0.85, 0.10, 0.10},
    {"green", 0.10, 0.70, 0.15},
    {"blue", 0.12, 0.25, 0.85},
    {"yellow", 0.90, 0.85, 0.10},
    {"purple", 0.55, 0.15, 0.75},
    {"orange", 0.95, 0.55, 0.10},
    {"teal", 0.10, 0.65, 0.65},
    {"gray", 0.55, 0.55, 0.55},
}};

inline ImageTensor draw_scene(int size, const NamedColor& background,
                              const NamedColor& shape, bool circle) {
  ImageShape shape_info{size, size, 3};
  std::vector<double> pixels(shape_info.pixel_count());
  const double cx = (size - 1) / 2.0;
  const double cy = (size - 1) / 2.0;
  const double radius = size / 4.0;
  const int lo = size / 4;
  const int hi = size - size / 4;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool inside;
      if (circle) {
        const double dx = x - cx;
        const double dy = y - cy;
        inside = dx * dx + dy * dy <= radius * radius;
      } else {
        inside = y >= lo && y < hi && x >= lo && x < hi;
      }
      const NamedColor& c = inside ? shape : background;
      const std::size_t base = (static_cast<std::size_t>(y) * size + x) * 3;
      pixels[base] = c.r;
      pixels[base + 1] = c.g;
      pixels[base + 2] = c.b;
    }
  }
  return clamp_and_quantize(shape_info, pixels);
}

}  // namespace demo_detail

/// Generate the demo benchmark under `dir`: seeded scene images, a
/// benchmark manifest with the full 3x2 question grid, and a
/// caption-fixtures file whose original answers match the references and
/// whose optimized answers leak the paired target content.
inline DemoPaths make_demo_benchmark(const std::filesystem::path& dir, const DemoSpec& spec) {
  if (spec.pairs < 1) throw InvalidInputError("demo benchmark needs at least one pair");
  if (spec.image_size < 16) throw InvalidInputError("demo images must be at least 16x16");

  namespace dd = demo_detail;
  const auto images_dir = dir / "images";
  std::filesystem::create_directories(images_dir);

  dataset::Manifest manifest;
  manifest.version = "1";
  manifest.provenance = "synthetic demo scenes";
  manifest.base_dir = dir;

  nlohmann::ordered_json fixture_pairs = nlohmann::ordered_json::array();

  // Walk the 8*7 = 56 ordered (background, shape) color combinations so
  // source scenes stay mutually distinct for up to 56 pairs; the seed
  // rotates the walk.
  constexpr int kCombos = 56;
  auto combo = [](int index) {
    const int bg = index / 7;
    const int fg = index % 7;
    return std::pair<int, int>{bg, fg >= bg ? fg + 1 : fg};
  };
  // Area-weighted scene color; targets are chosen to sit far from their
  // source in this mix so every pair gives the attack real work to do.
  auto scene_mix = [&](int index, bool circle) {
    const auto [bgi, fgi] = combo(index);
    const double area = circle ? 0.196 : 0.25;
    const auto& bg = dd::kPalette[bgi];
    const auto& fg = dd::kPalette[fgi];
    return std::array<double, 3>{(1 - area) * bg.r + area * fg.r,
                                 (1 - area) * bg.g + area * fg.g,
                                 (1 - area) * bg.b + area * fg.b};
  };
  if (spec.pairs > kCombos) {
    throw InvalidInputError("demo benchmark supports at most 56 pairs");
  }

  for (int i = 0; i < spec.pairs; ++i) {
    const int source_combo = static_cast<int>((i + spec.seed) % kCombos);
    const auto source_mix = scene_mix(source_combo, false);
    int target_combo = (source_combo + kCombos / 2) % kCombos;
    double best_distance = -1.0;
    for (int k = 0; k < 8; ++k) {
      const int cand = static_cast<int>((source_combo + 21 + 5 * k + spec.seed) % kCombos);
      if (cand == source_combo) continue;
      const auto mix = scene_mix(cand, true);
      double dist = 0.0;
      for (int c = 0; c < 3; ++c) {
        dist += (mix[c] - source_mix[c]) * (mix[c] - source_mix[c]);
      }
      if (dist > best_distance) {
        best_distance = dist;
        target_combo = cand;
      }
    }
    const auto [sbi, sci] = combo(source_combo);
    const auto [tbi, tci] = combo(target_combo);
    const auto& sb = dd::kPalette[sbi];
    const auto& sc = dd::kPalette[sci];
    const auto& tb = dd::kPalette[tbi];
    const auto& tc = dd::kPalette[tci];

    dataset::BenchmarkRecord record;
    record.pair_id = "p" + std::to_string(i);
    record.dataset_tag = spec.dataset_tag;
    record.source_image = "images/" + record.pair_id + "_source.png";
    record.target_image = "images/" + record.pair_id + "_target.png";
    io::save_png16(dd::draw_scene(spec.image_size, sb, sc, /*circle=*/false),
                   dir / record.source_image);
    io::save_png16(dd::draw_scene(spec.image_size, tb, tc, /*circle=*/true),
                   dir / record.target_image);

    const std::string src_text = std::string("A ") + sc.name +
                                 " rectangle centered on a " + sb.name + " background.";
    const std::string tgt_text = std::string("A ") + tc.name +
                                 " circle centered on a " + tb.name + " background.";

    using eval::QuestionFormat;
    using eval::QuestionType;
    auto add = [&](QuestionType t, QuestionFormat f, std::string text,
                   std::string gt_orig, std::string gt_tgt) {
      record.questions.push_back({std::move(text), f, t, std::move(gt_orig), std::move(gt_tgt)});
    };
    add(QuestionType::baseline, QuestionFormat::open_ended,
        "What do you see in this image?", src_text, tgt_text);
    add(QuestionType::baseline, QuestionFormat::closed_form,
        "Is the main shape in this image a rectangle?",
        "Yes, the main shape is a " + std::string(sc.name) + " rectangle.",
        "No, the main shape is a " + std::string(tc.name) + " circle.");
    add(QuestionType::source, QuestionFormat::open_ended,
        "Describe the rectangle visible in this scene.",
        "There is a " + std::string(sc.name) + " rectangle in the middle of a " +
            sb.name + " background.",
        "There is no rectangle in this image.");
    add(QuestionType::source, QuestionFormat::closed_form,
        "Do you see any rectangle in this image?",
        "Yes, there is a " + std::string(sc.name) + " rectangle.",
        "No, there is no rectangle in this image.");
    add(QuestionType::target, QuestionFormat::open_ended,
        "Describe any circle visible in this scene.",
        "There is no circle in this image, only a " + std::string(sc.name) + " rectangle.",
        "There is a " + std::string(tc.name) + " circle in the middle of a " + tb.name +
            " background.");
    add(QuestionType::target, QuestionFormat::closed_form,
        "Do you see any circle in this image?", "No, there is no circle in this image.",
        "Yes, there is a " + std::string(tc.name) + " circle.");
    manifest.records.push_back(record);

    // Caption fixtures: original answers repeat the reference; optimized
    // answers leak the target-side content, so the judge flags them.
    nlohmann::ordered_json responses = nlohmann::ordered_json::array();
    for (const auto& q : record.questions) {
      responses.push_back({{"question", q.text},
                           {"original", q.ground_truth_original},
                           {"optimized", q.ground_truth_target}});
    }
    fixture_pairs.push_back({{"pair_id", record.pair_id},
                             {"source_image", record.source_image},
                             {"responses", responses}});
  }

  DemoPaths paths{dir / "manifest.jsonl", dir / "captions.json", images_dir};
  dataset::save_manifest(manifest, paths.manifest);

  nlohmann::ordered_json fixtures = {{"kind", "caption-fixtures"},
                                     {"input_height", spec.image_size},
                                     {"input_width", spec.image_size},
                                     {"channels", 3},
                                     {"pairs", fixture_pairs}};
  std::ofstream out(paths.captions, std::ios::binary);
  if (!out) throw IoError("cannot write " + paths.captions.string());
  out << fixtures.dump(2) << '\n';
  return paths;
}

}  // namespace mirage::pipeline
