// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

// 8-bit grayscale image, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w),
        pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
    if (h <= 0 || w <= 0) throw ConfigError("image dimensions must be positive");
  }

  std::uint8_t& at(int y, int x) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  bool in_bounds(int y, int x) const {
    return y >= 0 && y < height && x >= 0 && x < width;
  }
};

inline bool operator==(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width && a.pixels == b.pixels;
}

// Network input: the grayscale values scaled to [0, 1] and repeated on
// three identical channels.
template <typename T = float>
Tensor<T> to_three_channel(const Image& img) {
  Tensor<T> out({img.height, img.width, 3});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const T v = static_cast<T>(img.at(y, x)) / T(255);
      out.at3(y, x, 0) = v;
      out.at3(y, x, 1) = v;
      out.at3(y, x, 2) = v;
    }
  }
  return out;
}

}  // namespace vtlm
