// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/image.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

namespace detail {

// Skips whitespace and '#' comment lines between PGM header tokens.
inline int next_pgm_int(std::istream& in, const std::string& path) {
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw IoError("truncated PGM header in " + path);
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) throw IoError("malformed PGM header in " + path);
  return value;
}

}  // namespace detail

inline Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw IoError(path + " is not a binary PGM (P5) file");
  const int width = detail::next_pgm_int(in, path);
  const int height = detail::next_pgm_int(in, path);
  const int maxval = detail::next_pgm_int(in, path);
  if (width <= 0 || height <= 0)
    throw IoError("bad PGM dimensions in " + path);
  if (maxval != 255)
    throw IoError(path + ": only 8-bit PGM images are readable, maxval " +
                  std::to_string(maxval));
  in.get();  // single whitespace byte after the header
  Image img(height, width);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    throw IoError("truncated pixel data in " + path);
  return img;
}

inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("short write to " + path);
}

// Writes one heat-map channel as a 16-bit PGM (values scaled by 65535,
// most significant byte first per the format).
template <typename T>
void write_pgm16(const std::string& path, const Tensor<T>& maps, int channel) {
  if (maps.rank() != 3 || channel < 0 || channel >= maps.dim(2))
    throw ShapeError("write_pgm16 wants an HxWxL stack and a valid channel");
  const int h = maps.dim(0), w = maps.dim(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << w << " " << h << "\n65535\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = static_cast<double>(maps.at3(y, x, channel));
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      const auto q = static_cast<std::uint16_t>(v * 65535.0 + 0.5);
      row[static_cast<std::size_t>(x) * 2] = static_cast<std::uint8_t>(q >> 8);
      row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace vtlm
