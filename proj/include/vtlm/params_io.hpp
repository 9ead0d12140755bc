// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

// Flat binary container for named float32 arrays:
//   "VTLM" | version u32 | array count u32 | per array:
//   name length u32 | name bytes | rank u32 | dims u32... | values f32...
// All integers and values little-endian. Round trips are bit-exact.
inline constexpr std::uint32_t kParamsFormatVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "parameter container I/O assumes a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw IoError("truncated container " + path);
  return v;
}

}  // namespace detail

using NamedArrays = std::vector<std::pair<std::string, Tensor<float>>>;

inline void save_params(const std::string& path, const NamedArrays& arrays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("VTLM", 4);
  detail::write_u32(out, kParamsFormatVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, tensor] : arrays) {
    detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape)
      detail::write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path);
}

inline NamedArrays load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VTLM", 4) != 0)
    throw IoError(path + " is not a VTLM parameter container");
  const std::uint32_t version = detail::read_u32(in, path);
  if (version != kParamsFormatVersion)
    throw IoError(path + ": unsupported container version " +
                  std::to_string(version));
  const std::uint32_t count = detail::read_u32(in, path);
  NamedArrays arrays;
  arrays.reserve(count);
  for (std::uint32_t a = 0; a < count; ++a) {
    const std::uint32_t name_len = detail::read_u32(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = detail::read_u32(in, path);
    std::vector<int> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<int>(detail::read_u32(in, path));
    Tensor<float> tensor(shape);
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(float)));
    if (!in) throw IoError("truncated container " + path);
    arrays.emplace_back(std::move(name), std::move(tensor));
  }
  return arrays;
}

}  // namespace vtlm
