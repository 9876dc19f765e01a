#pragma once

#include <span>
#include <string>
#include <vector>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"

namespace mirage::models {

/// N x D per-patch encoder output, row-major.
struct PatchEmbeddings {
  int num_patches = 0;
  int dim = 0;
  std::vector<double> values;

  std::span<const double> patch(int i) const {
    return std::span<const double>(values).subspan(
        static_cast<std::size_t>(i) * dim, dim);
  }
  double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * dim + j];
  }
};

/// Patch-mean embedding vector (length D).
struct MeanEmbedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

struct EncoderDescriptor {
  std::string name;
  int input_height = 0;
  int input_width = 0;
  int channels = 3;
  int patch_size = 0;
  int embedding_dim = 0;
  bool differentiable = false;
  /// Which stage of the model the embeddings are taken from. Recorded into
  /// run results so downstream comparisons know whether a post-encoder
  /// projection was included before pooling.
  std::string embedding_stage;
};

/// Average the patch embeddings into a single vector.
inline MeanEmbedding mean_pool(const PatchEmbeddings& patches) {
  if (patches.num_patches < 1 || patches.dim < 1) {
    throw InvalidInputError("mean_pool requires at least one patch");
  }
  MeanEmbedding out;
  out.values.assign(patches.dim, 0.0);
  for (int i = 0; i < patches.num_patches; ++i) {
    const auto row = patches.patch(i);
    for (int j = 0; j < patches.dim; ++j) {
      out.values[j] += row[j];
    }
  }
  const double inv_n = 1.0 / patches.num_patches;
  for (double& v : out.values) v *= inv_n;
  return out;
}

/// Differentiable vision-encoder contract. Implementations are immutable
/// after construction and safe for concurrent read-only use.
class VisionEncoder {
 public:
  virtual ~VisionEncoder() = default;

  virtual const EncoderDescriptor& descriptor() const = 0;

  /// Map an image to N x D patch embeddings, N = (H/P)*(W/P).
  virtual PatchEmbeddings encode(const ImageTensor& image) const = 0;

  /// Vector-Jacobian product: d<mean_pool(encode(x)), cotangent>/dx.
  /// Non-differentiable adapters throw CapabilityError.
  virtual PixelArray pixel_gradient(const ImageTensor& image,
                                    std::span<const double> cotangent) const {
    (void)image;
    (void)cotangent;
    throw CapabilityError("encoder '" + descriptor().name +
                          "' does not expose pixel gradients");
  }

 protected:
  /// Validate the image against the declared input size and broadcast
  /// grayscale inputs to three channels when the encoder expects RGB.
  ImageTensor conform_input(const ImageTensor& image) const {
    const EncoderDescriptor& d = descriptor();
    const ImageShape& s = image.shape();
    if (s.height != d.input_height || s.width != d.input_width) {
      throw ShapeError("encoder '" + d.name + "' expects " +
                       std::to_string(d.input_height) + "x" +
                       std::to_string(d.input_width) + " input, got " +
                       std::to_string(s.height) + "x" + std::to_string(s.width));
    }
    if (s.channels == d.channels) return image;
    if (s.channels == 1 && d.channels == 3) return broadcast_to_rgb(image);
    throw ShapeError("encoder '" + d.name + "' expects " +
                     std::to_string(d.channels) + " channels, got " +
                     std::to_string(s.channels));
  }
};

}  // namespace mirage::models
