#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mirage/errors.hpp"

namespace mirage {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  bool operator==(const ImageShape&) const = default;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width * channels;
  }

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" +
           std::to_string(channels);
  }
};

/// Unconstrained real array laid out like an image (row-major, channel
/// interleaved). Used for gradients and other intermediate fields that are
/// not restricted to [0,1].
struct PixelArray {
  ImageShape shape;
  std::vector<double> values;

  double& at(int y, int x, int c) {
    return values[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + c];
  }
  double at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * shape.width + x) * shape.channels + c];
  }
};

/// H x W x C pixel array with all values finite and inside [0,1].
/// Storage is row-major with interleaved channels: index = (y*W + x)*C + c.
class ImageTensor {
 public:
  ImageTensor() = default;

  /// Validating constructor; throws if the shape is degenerate, the channel
  /// count is not 1 or 3, or any pixel is non-finite / out of range.
  static ImageTensor create(ImageShape shape, std::vector<double> pixels) {
    validate_shape(shape);
    if (pixels.size() != shape.pixel_count()) {
      throw ShapeError("pixel buffer holds " + std::to_string(pixels.size()) +
                       " values, shape " + shape.str() + " needs " +
                       std::to_string(shape.pixel_count()));
    }
    for (double v : pixels) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw InvalidInputError("pixel value " + std::to_string(v) +
                                " outside [0,1]");
      }
    }
    return ImageTensor(shape, std::move(pixels));
  }

  static ImageTensor filled(ImageShape shape, double value) {
    validate_shape(shape);
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      throw InvalidInputError("fill value outside [0,1]");
    }
    return ImageTensor(shape, std::vector<double>(shape.pixel_count(), value));
  }

  const ImageShape& shape() const { return shape_; }
  std::span<const double> pixels() const { return pixels_; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * shape_.width + x) * shape_.channels + c;
  }
  double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  bool operator==(const ImageTensor& other) const {
    return shape_ == other.shape_ && pixels_ == other.pixels_;
  }

 private:
  ImageTensor(ImageShape shape, std::vector<double> pixels)
      : shape_(shape), pixels_(std::move(pixels)) {}

  static void validate_shape(const ImageShape& shape) {
    if (shape.height <= 0 || shape.width <= 0) {
      throw ShapeError("image dimensions must be positive, got " + shape.str());
    }
    if (shape.channels != 1 && shape.channels != 3) {
      throw ShapeError("channel count must be 1 or 3, got " +
                       std::to_string(shape.channels));
    }
  }

  ImageShape shape_;
  std::vector<double> pixels_;
};

/// Nearest representable value on the 16-bit pixel grid k/65535. Images
/// written as 16-bit PNG round-trip exactly when every pixel sits on this
/// grid.
inline double quantize16_value(double v) {
  return std::round(v * 65535.0) / 65535.0;
}

/// Clamp to [0,1] and snap to the 16-bit grid, returning a valid image.
inline ImageTensor clamp_and_quantize(const ImageShape& shape,
                                      std::span<const double> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = quantize16_value(std::clamp(values[i], 0.0, 1.0));
  }
  return ImageTensor::create(shape, std::move(out));
}

/// Replicate a single-channel image across three channels.
inline ImageTensor broadcast_to_rgb(const ImageTensor& gray) {
  if (gray.shape().channels == 3) return gray;
  ImageShape shape{gray.shape().height, gray.shape().width, 3};
  std::vector<double> out(shape.pixel_count());
  std::size_t j = 0;
  for (double v : gray.pixels()) {
    out[j++] = v;
    out[j++] = v;
    out[j++] = v;
  }
  return ImageTensor::create(shape, std::move(out));
}

/// Bilinear resize. Sample positions use half-pixel centers so the result
/// is symmetric under image flips.
inline ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("resize target must be positive");
  }
  const ImageShape& in = img.shape();
  if (in.height == out_h && in.width == out_w) return img;

  ImageShape shape{out_h, out_w, in.channels};
  std::vector<double> out(shape.pixel_count());
  const double sy = static_cast<double>(in.height) / out_h;
  const double sx = static_cast<double>(in.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(in.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(in.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < in.channels; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
        const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
        out[(static_cast<std::size_t>(y) * out_w + x) * in.channels + c] =
            std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
      }
    }
  }
  return ImageTensor::create(shape, std::move(out));
}

}  // namespace mirage
