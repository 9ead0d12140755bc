// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/dataset.hpp"
#include "vtlm/image.hpp"
#include "vtlm/random.hpp"

namespace vtlm {

// Row-major 3x3 homogeneous transform over pixel coordinates.
using Mat3 = std::array<double, 9>;

inline Mat3 mat3_identity() {
  return {1, 0, 0, 0, 1, 0, 0, 0, 1};
}

inline Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return r;
}

inline Point apply_affine(const Mat3& m, const Point& p) {
  return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
}

// Inverts an affine transform (last row 0 0 1).
inline Mat3 mat3_affine_inverse(const Mat3& m) {
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12) throw NumericError("singular affine transform");
  const double ia = m[4] / det, ib = -m[1] / det;
  const double id = -m[3] / det, ie = m[0] / det;
  return {ia, ib, -(ia * m[2] + ib * m[5]),
          id, ie, -(id * m[2] + ie * m[5]),
          0,  0,  1};
}

struct AffineStep {
  enum Kind { kRotate, kTranslate, kZoom } kind;
  double a = 0.0;  // degrees, dx, or scale factor
  double b = 0.0;  // dy for translations
};

// One entry of the fixed augmentation table. Affine steps compose in listed
// order; blur runs after the warp; noise is its own op.
struct AugmentOp {
  int id = 0;
  std::string description;
  double noise_mean = 0.0;
  double noise_variance = 0.0;  // 8-bit intensity-squared units
  double blur_sigma = 0.0;      // pixels; 0 = no blur
  std::vector<AffineStep> steps;

  bool has_affine() const { return !steps.empty(); }
};

// The canonical 10 ops, ids 1..10.
inline const std::vector<AugmentOp>& augment_ops() {
  static const std::vector<AugmentOp> ops = [] {
    std::vector<AugmentOp> t;
    auto add = [&t](AugmentOp op) { t.push_back(std::move(op)); };
    add({1, "gaussian noise mean 0 variance 12.75", 0.0, 12.75, 0.0, {}});
    add({2, "gaussian blur sigma 5", 0.0, 0.0, 5.0, {}});
    add({3, "rotate +10 deg", 0.0, 0.0, 0.0, {{AffineStep::kRotate, 10.0, 0.0}}});
    add({4, "rotate -5 deg", 0.0, 0.0, 0.0, {{AffineStep::kRotate, -5.0, 0.0}}});
    add({5, "translate (+30, +10)", 0.0, 0.0, 0.0,
         {{AffineStep::kTranslate, 30.0, 10.0}}});
    add({6, "translate (+40, -10)", 0.0, 0.0, 0.0,
         {{AffineStep::kTranslate, 40.0, -10.0}}});
    add({7, "rotate -5 deg then translate (+30, +10)", 0.0, 0.0, 0.0,
         {{AffineStep::kRotate, -5.0, 0.0}, {AffineStep::kTranslate, 30.0, 10.0}}});
    add({8, "zoom 0.8", 0.0, 0.0, 0.0, {{AffineStep::kZoom, 0.8, 0.0}}});
    add({9, "translate (+30, +10) then zoom 1.2", 0.0, 0.0, 0.0,
         {{AffineStep::kTranslate, 30.0, 10.0}, {AffineStep::kZoom, 1.2, 0.0}}});
    add({10, "translate (+40, +20), zoom 0.9, blur sigma 3", 0.0, 0.0, 3.0,
         {{AffineStep::kTranslate, 40.0, 20.0}, {AffineStep::kZoom, 0.9, 0.0}}});
    return t;
  }();
  return ops;
}

inline const AugmentOp& augment_op(int id) {
  if (id < 1 || id > 10)
    throw ConfigError("augmentation op id must be 1..10, got " + std::to_string(id));
  return augment_ops()[static_cast<std::size_t>(id - 1)];
}

// Homogeneous matrix of the op's geometric part; identity for noise/blur.
// Rotation and zoom are centered on (W/2, H/2); positive rotation turns
// counter-clockwise in (x right, y down) coordinates.
inline Mat3 affine_of(const AugmentOp& op, int width, int height) {
  const double cx = width / 2.0, cy = height / 2.0;
  Mat3 a = mat3_identity();
  for (const AffineStep& step : op.steps) {
    Mat3 m = mat3_identity();
    switch (step.kind) {
      case AffineStep::kRotate: {
        const double t = step.a * 3.141592653589793 / 180.0;
        const double c = std::cos(t), s = std::sin(t);
        m = {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0, 0, 1};
        break;
      }
      case AffineStep::kTranslate:
        m = {1, 0, step.a, 0, 1, step.b, 0, 0, 1};
        break;
      case AffineStep::kZoom:
        m = {step.a, 0, cx * (1 - step.a), 0, step.a, cy * (1 - step.a), 0, 0, 1};
        break;
    }
    a = mat3_mul(m, a);
  }
  return a;
}

namespace detail {

// Inverse-mapped bilinear warp with zero fill outside the source frame.
inline Image warp_image(const Image& src, const Mat3& forward) {
  const Mat3 inv = mat3_affine_inverse(forward);
  Image out(src.height, src.width);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Point s = apply_affine(inv, {static_cast<double>(x), static_cast<double>(y)});
      const int x0 = static_cast<int>(std::floor(s.x));
      const int y0 = static_cast<int>(std::floor(s.y));
      const double fx = s.x - x0, fy = s.y - y0;
      double v = 0.0;
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          const int sy = y0 + dy, sx = x0 + dx;
          if (!src.in_bounds(sy, sx)) continue;
          const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
          v += wgt * src.at(sy, sx);
        }
      }
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

// Separable Gaussian truncated at +/-3 sigma. Weights are renormalized over
// the in-frame taps so borders keep their mean intensity.
inline Image blur_image(const Image& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i)
    kernel[static_cast<std::size_t>(i + radius)] =
        std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));

  const int h = src.height, w = src.width;
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = x + i;
        if (sx < 0 || sx >= w) continue;
        const double k = kernel[static_cast<std::size_t>(i + radius)];
        acc += k * src.at(y, sx);
        wsum += k;
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc / wsum;
    }
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sy = y + i;
        if (sy < 0 || sy >= h) continue;
        const double k = kernel[static_cast<std::size_t>(i + radius)];
        acc += k * tmp[static_cast<std::size_t>(sy) * w + x];
        wsum += k;
      }
      out.at(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(acc / wsum, 0.0, 255.0)));
    }
  }
  return out;
}

inline Image add_noise(const Image& src, double mean, double variance,
                       std::uint64_t seed) {
  Rng rng(seed);
  const double stddev = std::sqrt(variance);
  Image out(src.height, src.width);
  for (std::size_t i = 0; i < src.pixels.size(); ++i) {
    const double v = src.pixels[i] + rng.normal(mean, stddev);
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

}  // namespace detail

// Applies one op. Landmarks are mapped by the exact affine transform the
// image was warped with (identity for noise/blur); coordinates that land
// outside are clamped to the frame and the sample is flagged.
inline Sample apply_augment(const AugmentOp& op, const Sample& sample,
                            std::uint64_t seed) {
  Sample out = sample;
  out.transform_id = op.id;

  if (op.has_affine()) {
    const Mat3 a = affine_of(op, sample.image.width, sample.image.height);
    out.image = detail::warp_image(sample.image, a);
    for (auto& p : out.landmarks.points) {
      p = apply_affine(a, p);
      const double max_x = sample.image.width - 1;
      const double max_y = sample.image.height - 1;
      if (p.x < 0 || p.x > max_x || p.y < 0 || p.y > max_y) {
        p.x = std::clamp(p.x, 0.0, max_x);
        p.y = std::clamp(p.y, 0.0, max_y);
        out.any_clamped = true;
      }
    }
  }
  if (op.blur_sigma > 0) out.image = detail::blur_image(out.image, op.blur_sigma);
  if (op.noise_variance > 0)
    out.image = detail::add_noise(out.image, op.noise_mean, op.noise_variance, seed);
  return out;
}

// Expands a corpus of originals into originals plus one variant per op:
// (1 + |ops|) times the input count, 11x with the full table.
inline Corpus augment_corpus(const Corpus& corpus, std::uint64_t seed,
                             const std::vector<int>& op_ids = {1, 2, 3, 4, 5, 6,
                                                               7, 8, 9, 10}) {
  for (const Sample& s : corpus.samples)
    if (!s.is_original())
      throw ConfigError("augment_corpus expects originals only; " + s.id() +
                        " is already augmented");
  for (int id : op_ids) augment_op(id);  // validate ids up front

  Corpus out;
  out.pixel_to_cm = corpus.pixel_to_cm;
  out.samples.reserve(corpus.samples.size() * (1 + op_ids.size()));
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& original = corpus.samples[i];
    out.samples.push_back(original);
    for (int id : op_ids) {
      const std::uint64_t sample_seed =
          derive_seed(seed, i, static_cast<std::uint64_t>(id));
      out.samples.push_back(apply_augment(augment_op(id), original, sample_seed));
    }
  }
  out.validate();
  return out;
}

}  // namespace vtlm
