#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"
#include "mirage/models/encoder.hpp"
#include "mirage/support/random.hpp"

namespace mirage::models {

enum class Nonlinearity { none, smooth_tanh };

/// Deterministic desk-scale encoder: patchify, then one affine projection
/// per patch with seeded Gaussian weights (std 1/sqrt(P*P*C)), optionally
/// followed by tanh. Linear enough that its gradients can be checked
/// exactly, small enough that attacks run in seconds.
struct ToyEncoderSpec {
  int input_height = 32;
  int input_width = 32;
  int channels = 3;
  int patch_size = 4;
  int embedding_dim = 16;
  std::uint64_t weight_seed = 0;
  Nonlinearity nonlinearity = Nonlinearity::none;
};

class ToyEncoder final : public VisionEncoder {
 public:
  explicit ToyEncoder(const ToyEncoderSpec& spec) : ToyEncoder(spec, seeded_weights(spec)) {}

  /// Construct with explicit projection/bias (tests, hand-built cases).
  /// `weights` is D x (P*P*C) row-major, `bias` has length D.
  static ToyEncoder with_weights(const ToyEncoderSpec& spec,
                                 std::vector<double> weights,
                                 std::vector<double> bias) {
    return ToyEncoder(spec, {std::move(weights), std::move(bias)});
  }

  /// Identity projection with zero bias; requires D == P*P*C, so each patch
  /// embedding is exactly the flattened patch.
  static ToyEncoder with_identity_projection(ToyEncoderSpec spec) {
    const int patch_len = spec.patch_size * spec.patch_size * spec.channels;
    spec.embedding_dim = patch_len;
    std::vector<double> w(static_cast<std::size_t>(patch_len) * patch_len, 0.0);
    for (int i = 0; i < patch_len; ++i) {
      w[static_cast<std::size_t>(i) * patch_len + i] = 1.0;
    }
    return ToyEncoder(spec, {std::move(w), std::vector<double>(patch_len, 0.0)});
  }

  const EncoderDescriptor& descriptor() const override { return desc_; }
  const ToyEncoderSpec& spec() const { return spec_; }

  /// D x (P*P*C) projection matrix, row-major. Exposed so tests can build
  /// independent oracles against the same weights.
  std::span<const double> projection() const { return weights_; }
  std::span<const double> bias() const { return bias_; }

  PatchEmbeddings encode(const ImageTensor& image) const override {
    const ImageTensor input = conform_input(image);
    const int grid_h = spec_.input_height / spec_.patch_size;
    const int grid_w = spec_.input_width / spec_.patch_size;
    const int n = grid_h * grid_w;
    const int d = spec_.embedding_dim;

    PatchEmbeddings out;
    out.num_patches = n;
    out.dim = d;
    out.values.resize(static_cast<std::size_t>(n) * d);

    std::vector<double> patch(patch_len());
    for (int py = 0; py < grid_h; ++py) {
      for (int px = 0; px < grid_w; ++px) {
        flatten_patch(input, py, px, patch);
        const int i = py * grid_w + px;
        for (int row = 0; row < d; ++row) {
          const double* w = &weights_[static_cast<std::size_t>(row) * patch.size()];
          double z = bias_[row];
          for (std::size_t j = 0; j < patch.size(); ++j) {
            z += w[j] * patch[j];
          }
          out.values[static_cast<std::size_t>(i) * d + row] = activate(z);
        }
      }
    }
    return out;
  }

  PixelArray pixel_gradient(const ImageTensor& image,
                            std::span<const double> cotangent) const override {
    if (static_cast<int>(cotangent.size()) != spec_.embedding_dim) {
      throw ShapeError("cotangent length " + std::to_string(cotangent.size()) +
                       " does not match embedding dim " +
                       std::to_string(spec_.embedding_dim));
    }
    const ImageTensor input = conform_input(image);
    const int grid_h = spec_.input_height / spec_.patch_size;
    const int grid_w = spec_.input_width / spec_.patch_size;
    const int n = grid_h * grid_w;
    const int d = spec_.embedding_dim;
    const double inv_n = 1.0 / n;

    PixelArray grad;
    grad.shape = input.shape();
    grad.values.assign(input.pixels().size(), 0.0);

    std::vector<double> patch(patch_len());
    std::vector<double> scaled(d);
    for (int py = 0; py < grid_h; ++py) {
      for (int px = 0; px < grid_w; ++px) {
        // scaled[row] = act'(z_row) * u_row / N for this patch
        if (spec_.nonlinearity == Nonlinearity::smooth_tanh) {
          flatten_patch(input, py, px, patch);
          for (int row = 0; row < d; ++row) {
            const double* w = &weights_[static_cast<std::size_t>(row) * patch.size()];
            double z = bias_[row];
            for (std::size_t j = 0; j < patch.size(); ++j) {
              z += w[j] * patch[j];
            }
            const double t = std::tanh(z);
            scaled[row] = (1.0 - t * t) * cotangent[row] * inv_n;
          }
        } else {
          for (int row = 0; row < d; ++row) {
            scaled[row] = cotangent[row] * inv_n;
          }
        }
        scatter_patch_gradient(py, px, scaled, grad);
      }
    }
    return grad;
  }

 private:
  struct Params {
    std::vector<double> weights;
    std::vector<double> bias;
  };

  ToyEncoder(const ToyEncoderSpec& spec, Params params)
      : spec_(spec),
        weights_(std::move(params.weights)),
        bias_(std::move(params.bias)) {
    if (spec_.patch_size <= 0 || spec_.embedding_dim <= 0) {
      throw InvalidInputError("toy encoder patch size and dim must be positive");
    }
    if (spec_.channels != 1 && spec_.channels != 3) {
      throw ShapeError("toy encoder channels must be 1 or 3, got " +
                       std::to_string(spec_.channels));
    }
    if (spec_.input_height % spec_.patch_size != 0 ||
        spec_.input_width % spec_.patch_size != 0) {
      throw ShapeError("input size " + std::to_string(spec_.input_height) + "x" +
                       std::to_string(spec_.input_width) +
                       " not divisible by patch size " +
                       std::to_string(spec_.patch_size));
    }
    const std::size_t expected =
        static_cast<std::size_t>(spec_.embedding_dim) * patch_len();
    if (weights_.size() != expected ||
        bias_.size() != static_cast<std::size_t>(spec_.embedding_dim)) {
      throw ShapeError("toy encoder weight buffers do not match spec");
    }
    desc_.name = "toy-p" + std::to_string(spec_.patch_size) + "-d" +
                 std::to_string(spec_.embedding_dim) + "-s" +
                 std::to_string(spec_.weight_seed);
    desc_.input_height = spec_.input_height;
    desc_.input_width = spec_.input_width;
    desc_.channels = spec_.channels;
    desc_.patch_size = spec_.patch_size;
    desc_.embedding_dim = spec_.embedding_dim;
    desc_.differentiable = true;
    desc_.embedding_stage =
        spec_.nonlinearity == Nonlinearity::smooth_tanh
            ? "toy.patch_affine.tanh"
            : "toy.patch_affine";
  }

  int patch_len() const {
    return spec_.patch_size * spec_.patch_size * spec_.channels;
  }

  /// Patch flattening order: rows, then columns, then channels.
  void flatten_patch(const ImageTensor& input, int py, int px,
                     std::vector<double>& out) const {
    const int p = spec_.patch_size;
    std::size_t j = 0;
    for (int dy = 0; dy < p; ++dy) {
      for (int dx = 0; dx < p; ++dx) {
        for (int c = 0; c < spec_.channels; ++c) {
          out[j++] = input.at(py * p + dy, px * p + dx, c);
        }
      }
    }
  }

  void scatter_patch_gradient(int py, int px, std::span<const double> scaled,
                              PixelArray& grad) const {
    const int p = spec_.patch_size;
    std::size_t j = 0;
    for (int dy = 0; dy < p; ++dy) {
      for (int dx = 0; dx < p; ++dx) {
        for (int c = 0; c < spec_.channels; ++c, ++j) {
          double g = 0.0;
          for (std::size_t row = 0; row < scaled.size(); ++row) {
            g += weights_[row * static_cast<std::size_t>(patch_len()) + j] * scaled[row];
          }
          grad.at(py * p + dy, px * p + dx, c) += g;
        }
      }
    }
  }

  double activate(double z) const {
    return spec_.nonlinearity == Nonlinearity::smooth_tanh ? std::tanh(z) : z;
  }

  static Params seeded_weights(const ToyEncoderSpec& spec) {
    const int patch = spec.patch_size * spec.patch_size * spec.channels;
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(patch));
    support::GaussianStream gauss(spec.weight_seed);
    Params params;
    params.weights.resize(static_cast<std::size_t>(spec.embedding_dim) * patch);
    for (double& w : params.weights) w = gauss.next() * std_dev;
    params.bias.resize(spec.embedding_dim);
    for (double& b : params.bias) b = gauss.next() * std_dev;
    return params;
  }

  ToyEncoderSpec spec_;
  EncoderDescriptor desc_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

}  // namespace mirage::models
