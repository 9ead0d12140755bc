// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

// One Gaussian hat per landmark, stored as channels of an H x W x L tensor.
// Peak value is exactly 1 at the landmark's nearest pixel; no truncation
// radius and no normalization constant.
template <typename T>
struct HeatMapStack {
  Tensor<T> maps;  // H x W x L
  std::vector<std::string> ids;
  double sigma = 10.0;
};

// Evaluates exp(-((x-xl)^2 + (y-yl)^2) / (2 sigma^2)) at every pixel center
// for each landmark in `group`.
template <typename T = float>
HeatMapStack<T> encode_heatmaps(const LandmarkSet& landmarks,
                                const std::vector<std::string>& group,
                                double sigma = 10.0) {
  if (group.empty()) throw ConfigError("heat-map group is empty");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  landmarks.validate();
  const int h = landmarks.height, w = landmarks.width;
  const int l = static_cast<int>(group.size());

  HeatMapStack<T> stack;
  stack.maps = Tensor<T>({h, w, l});
  stack.ids = group;
  stack.sigma = sigma;

  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c < l; ++c) {
    const Point& p = landmarks.at(group[static_cast<std::size_t>(c)]);
    for (int y = 0; y < h; ++y) {
      const double dy = y - p.y;
      for (int x = 0; x < w; ++x) {
        const double dx = x - p.x;
        stack.maps.at3(y, x, c) =
            static_cast<T>(std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  return stack;
}

struct DecodedPoint {
  int x = 0;
  int y = 0;
  bool degenerate = false;  // the whole channel was one constant value
};

// Per-channel argmax (ties broken by smallest row, then smallest column).
// A constant channel still decodes to the tie-break pixel but is flagged.
template <typename T>
std::vector<DecodedPoint> decode_heatmaps(const Tensor<T>& maps) {
  if (maps.rank() != 3)
    throw ShapeError("decode expects an HxWxL stack, got " +
                     shape_to_string(maps.shape));
  const int h = maps.dim(0), w = maps.dim(1), l = maps.dim(2);
  std::vector<DecodedPoint> out(static_cast<std::size_t>(l));
  for (int c = 0; c < l; ++c) {
    T best = maps.at3(0, 0, c);
    int bx = 0, by = 0;
    bool constant = true;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T v = maps.at3(y, x, c);
        if (v != best) constant = false;
        if (v > best) {
          best = v;
          by = y;
          bx = x;
        }
      }
    }
    out[static_cast<std::size_t>(c)] = {bx, by, constant};
  }
  return out;
}

template <typename T>
std::vector<DecodedPoint> decode_heatmaps(const HeatMapStack<T>& stack) {
  return decode_heatmaps(stack.maps);
}

}  // namespace vtlm
