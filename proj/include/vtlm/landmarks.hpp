// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "vtlm/common.hpp"

namespace vtlm {

// The 21 vocal-tract landmarks in canonical (alphabetical) order. All
// per-landmark arrays in the library index against this list.
inline const std::array<std::string, 21>& landmark_ids() {
  static const std::array<std::string, 21> ids = {
      "ANS", "EG",  "ET", "LC", "LLSV", "LLV", "LT",   "N",   "NM", "NP", "NPX",
      "PL",  "PNS", "TE", "TJ", "TS",   "TT",  "ULPV", "ULV", "UT", "VT"};
  return ids;
}

inline constexpr int kLandmarkCount = 21;

inline int landmark_index(const std::string& id) {
  const auto& ids = landmark_ids();
  for (int i = 0; i < kLandmarkCount; ++i)
    if (ids[static_cast<std::size_t>(i)] == id) return i;
  throw ConfigError("unknown landmark id '" + id + "'");
}

inline bool is_landmark_id(const std::string& id) {
  for (const auto& known : landmark_ids())
    if (known == id) return true;
  return false;
}

struct Point {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

// Full set of 21 landmark coordinates for one image. Storage follows the
// canonical order; ids are implicit.
struct LandmarkSet {
  int height = 0;
  int width = 0;
  std::array<Point, 21> points{};

  const Point& at(const std::string& id) const {
    return points[static_cast<std::size_t>(landmark_index(id))];
  }
  Point& at(const std::string& id) {
    return points[static_cast<std::size_t>(landmark_index(id))];
  }

  // Every coordinate must sit inside the frame.
  void validate() const {
    if (height <= 0 || width <= 0)
      throw ConfigError("landmark set has no image size");
    for (int i = 0; i < kLandmarkCount; ++i) {
      const Point& p = points[static_cast<std::size_t>(i)];
      if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
        throw ConfigError("landmark " + landmark_ids()[static_cast<std::size_t>(i)] +
                          " at (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") is outside " +
                          std::to_string(width) + "x" + std::to_string(height));
      }
    }
  }
};

// Splits the canonical ordering into contiguous groups of the given sizes.
inline std::vector<std::vector<std::string>> group_landmarks(
    const std::vector<int>& group_sizes) {
  int total = 0;
  for (int s : group_sizes) {
    if (s <= 0) throw ConfigError("group sizes must be positive");
    total += s;
  }
  if (total != kLandmarkCount) {
    throw ConfigError("group sizes sum to " + std::to_string(total) +
                      ", expected " + std::to_string(kLandmarkCount));
  }
  std::vector<std::vector<std::string>> groups;
  groups.reserve(group_sizes.size());
  int next = 0;
  for (int s : group_sizes) {
    std::vector<std::string> group;
    group.reserve(static_cast<std::size_t>(s));
    for (int i = 0; i < s; ++i)
      group.push_back(landmark_ids()[static_cast<std::size_t>(next++)]);
    groups.push_back(std::move(group));
  }
  return groups;
}

}  // namespace vtlm
