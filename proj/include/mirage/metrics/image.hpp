#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"

namespace mirage::metrics {

/// PSNR of two identical images is reported as this cap instead of
/// infinity, keeping aggregates finite.
inline constexpr double kPsnrCapDb = 100.0;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

namespace detail {

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b,
                               const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shapes differ, " + a.shape().str() +
                     " vs " + b.shape().str());
  }
}

inline std::array<double, kSsimWindow> gaussian_kernel() {
  std::array<double, kSsimWindow> k{};
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable 'valid' convolution with the normalized Gaussian kernel.
/// Input is H x W, output (H-10) x (W-10).
inline std::vector<double> gaussian_filter_valid(const std::vector<double>& plane,
                                                 int h, int w) {
  const auto kernel = gaussian_kernel();
  const int out_w = w - kSsimWindow + 1;
  const int out_h = h - kSsimWindow + 1;

  std::vector<double> rows(static_cast<std::size_t>(h) * out_w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) {
        acc += kernel[t] * plane[static_cast<std::size_t>(y) * w + x + t];
      }
      rows[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) {
        acc += kernel[t] * rows[static_cast<std::size_t>(y + t) * out_w + x];
      }
      out[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> extract_plane(const ImageTensor& img, int channel) {
  const ImageShape& s = img.shape();
  std::vector<double> plane(static_cast<std::size_t>(s.height) * s.width);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      plane[static_cast<std::size_t>(y) * s.width + x] = img.at(y, x, channel);
    }
  }
  return plane;
}

}  // namespace detail

/// Mean structural similarity over an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, data range 1.0. Local statistics use Gaussian
/// weighted moments, windows are 'valid' (fully inside the image), and the
/// per-channel maps are averaged.
inline double ssim(const ImageTensor& a, const ImageTensor& b) {
  detail::require_same_shape(a, b, "ssim");
  const ImageShape& s = a.shape();
  if (s.height < kSsimWindow || s.width < kSsimWindow) {
    throw InvalidInputError("ssim needs images at least " +
                            std::to_string(kSsimWindow) + "x" +
                            std::to_string(kSsimWindow) + ", got " + s.str());
  }

  constexpr double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  constexpr double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

  double channel_sum = 0.0;
  for (int c = 0; c < s.channels; ++c) {
    const auto pa = detail::extract_plane(a, c);
    const auto pb = detail::extract_plane(b, c);

    std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }

    const auto mu_a = detail::gaussian_filter_valid(pa, s.height, s.width);
    const auto mu_b = detail::gaussian_filter_valid(pb, s.height, s.width);
    const auto e_aa = detail::gaussian_filter_valid(aa, s.height, s.width);
    const auto e_bb = detail::gaussian_filter_valid(bb, s.height, s.width);
    const auto e_ab = detail::gaussian_filter_valid(ab, s.height, s.width);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den =
          (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
      acc += num / den;
    }
    channel_sum += acc / static_cast<double>(mu_a.size());
  }
  return channel_sum / s.channels;
}

/// Peak signal-to-noise ratio in dB for unit-range images:
/// 10*log10(1 / MSE), MSE over all pixels and channels. Identical images
/// report the kPsnrCapDb sentinel.
inline double psnr(const ImageTensor& a, const ImageTensor& b) {
  detail::require_same_shape(a, b, "psnr");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pa.size());
  if (mse == 0.0) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace mirage::metrics
