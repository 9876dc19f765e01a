#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mirage/attack/adam.hpp"
#include "mirage/errors.hpp"
#include "mirage/image.hpp"
#include "mirage/models/encoder.hpp"

namespace mirage::attack {

struct AttackConfig {
  double learning_rate = 0.007;
  /// Threshold on the squared L2 distance between mean embeddings. The
  /// convergence test compares the squared norm against this value as-is.
  double tau_l = 1.44;
  /// Cosine-similarity threshold.
  double tau_c = 0.95;
  int max_iterations = 10000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Echoed into run artifacts; the optimization itself is deterministic.
  std::uint64_t seed = 0;
};

struct AttackTraceEntry {
  int iteration = 0;
  double loss = 0.0;    // squared L2 of mean-embedding difference
  double cosine = 0.0;  // cosine similarity of mean embeddings
};

enum class AttackStatus { converged, max_iterations_reached };

inline const char* to_string(AttackStatus s) {
  return s == AttackStatus::converged ? "converged" : "max_iterations_reached";
}

struct AttackResult {
  ImageTensor adversarial_image;
  AttackStatus status = AttackStatus::max_iterations_reached;
  int iterations_run = 0;  // number of optimizer updates applied
  double final_loss = 0.0;
  double final_cosine = 0.0;
  std::vector<AttackTraceEntry> trace;
};

/// Optimization diverged (non-finite loss or gradient); carries the trace
/// accumulated so far.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<AttackTraceEntry> trace)
      : Error(what), trace_(std::move(trace)) {}

  const std::vector<AttackTraceEntry>& trace() const { return trace_; }

 private:
  std::vector<AttackTraceEntry> trace_;
};

/// Squared L2 distance between two mean embeddings (no dimension
/// normalization).
inline double mse_mean_loss(const models::MeanEmbedding& a,
                            const models::MeanEmbedding& b) {
  if (a.values.size() != b.values.size()) {
    throw ShapeError("embedding dims differ: " + std::to_string(a.values.size()) +
                     " vs " + std::to_string(b.values.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return sum;
}

/// Cosine similarity, clamped to [-1,1] against rounding. Zero-norm inputs
/// are an error, never silently zero.
inline double cosine_similarity(const models::MeanEmbedding& a,
                                const models::MeanEmbedding& b) {
  if (a.values.size() != b.values.size()) {
    throw ShapeError("embedding dims differ: " + std::to_string(a.values.size()) +
                     " vs " + std::to_string(b.values.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw InvalidInputError("cosine similarity of a zero-norm embedding");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Both criteria must hold, bounds inclusive: loss <= tau_l and
/// cosine >= tau_c.
inline bool converged(double loss, double cosine, const AttackConfig& cfg) {
  return loss <= cfg.tau_l && cosine >= cfg.tau_c;
}

/// Called after every optimizer update with the iteration count (number of
/// updates applied so far) and the current iterate.
using AttackObserver = std::function<void(int, const ImageTensor&)>;

/// Iteratively optimize `source` so its mean patch embedding matches
/// `target`'s.
///
/// Each iteration measures loss and cosine at the current iterate, records a
/// trace entry, tests convergence, and only then applies an Adam update.
/// Updated pixels are clamped to [0,1] and snapped to the 16-bit pixel grid,
/// so the result serializes to 16-bit PNG without any loss — re-encoding the
/// saved file reproduces the final trace entry exactly.
inline AttackResult run_attack(const ImageTensor& source, const ImageTensor& target,
                               const models::VisionEncoder& encoder,
                               const AttackConfig& cfg,
                               const AttackObserver& observer = {}) {
  if (!encoder.descriptor().differentiable) {
    throw CapabilityError("attack requires a differentiable encoder, '" +
                          encoder.descriptor().name + "' is not");
  }
  if (cfg.max_iterations < 0) {
    throw InvalidInputError("max_iterations must be non-negative");
  }
  if (!(source.shape() == target.shape())) {
    throw ShapeError("source " + source.shape().str() + " and target " +
                     target.shape().str() + " differ");
  }

  // Grayscale inputs into an RGB encoder are broadcast up front; the
  // optimization then runs in the encoder's channel space.
  const bool broadcast = source.shape().channels == 1 &&
                         encoder.descriptor().channels == 3;
  const ImageTensor start = broadcast ? broadcast_to_rgb(source) : source;
  const ImageTensor goal = broadcast ? broadcast_to_rgb(target) : target;

  const models::MeanEmbedding target_mean = models::mean_pool(encoder.encode(goal));

  AttackResult result;
  result.adversarial_image = start;
  AdamState adam = AdamState::zeros(start.pixels().size());
  std::vector<double> work(start.pixels().size());

  for (int iteration = 0;; ++iteration) {
    const models::MeanEmbedding current =
        models::mean_pool(encoder.encode(result.adversarial_image));
    const double loss = mse_mean_loss(current, target_mean);
    const double cosine = cosine_similarity(current, target_mean);
    if (!std::isfinite(loss) || !std::isfinite(cosine)) {
      throw NumericalError("non-finite loss at iteration " + std::to_string(iteration),
                           std::move(result.trace));
    }
    result.trace.push_back({iteration, loss, cosine});

    if (converged(loss, cosine, cfg)) {
      result.status = AttackStatus::converged;
      result.iterations_run = iteration;
      break;
    }
    if (iteration >= cfg.max_iterations) {
      result.status = AttackStatus::max_iterations_reached;
      result.iterations_run = iteration;
      break;
    }

    std::vector<double> cotangent(current.values.size());
    for (std::size_t j = 0; j < cotangent.size(); ++j) {
      cotangent[j] = 2.0 * (current.values[j] - target_mean.values[j]);
    }
    const PixelArray grad = encoder.pixel_gradient(result.adversarial_image, cotangent);
    for (double g : grad.values) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient at iteration " + std::to_string(iteration),
                             std::move(result.trace));
      }
    }

    const std::vector<double> delta =
        adam_step(adam, grad.values, cfg.learning_rate, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_epsilon);
    const auto pixels = result.adversarial_image.pixels();
    for (std::size_t i = 0; i < work.size(); ++i) {
      work[i] = pixels[i] + delta[i];
    }
    result.adversarial_image = clamp_and_quantize(start.shape(), work);
    if (observer) observer(iteration + 1, result.adversarial_image);
  }

  result.final_loss = result.trace.back().loss;
  result.final_cosine = result.trace.back().cosine;
  return result;
}

}  // namespace mirage::attack
