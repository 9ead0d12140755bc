// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "vtlm/common.hpp"
#include "vtlm/image.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/pgm.hpp"

namespace vtlm {

// transform_id 0 marks an original sample; 1..10 name the augmentation op
// that produced the sample.
struct Sample {
  std::string subject;
  std::string articulation;
  Image image;
  LandmarkSet landmarks;
  int transform_id = 0;
  bool any_clamped = false;  // an augmented landmark was pushed back in-frame

  bool is_original() const { return transform_id == 0; }

  std::string provenance() const {
    return is_original() ? "original"
                         : "augmented:" + std::to_string(transform_id);
  }

  std::string id() const {
    std::string s = subject + "_" + articulation;
    if (!is_original()) s += "_a" + std::to_string(transform_id);
    return s;
  }

  void validate() const {
    if (transform_id < 0 || transform_id > 10)
      throw ConfigError("sample " + subject + "/" + articulation +
                        " has transform id " + std::to_string(transform_id));
    if (image.height != landmarks.height || image.width != landmarks.width)
      throw ConfigError("sample " + id() + " image size disagrees with landmarks");
    landmarks.validate();
  }
};

struct Corpus {
  std::vector<Sample> samples;
  double pixel_to_cm = 0.1;

  std::vector<std::string> subjects() const {
    std::vector<std::string> out;
    for (const Sample& s : samples)
      if (std::find(out.begin(), out.end(), s.subject) == out.end())
        out.push_back(s.subject);
    return out;
  }

  void validate() const {
    if (!(pixel_to_cm > 0.0)) throw ConfigError("pixel_to_cm must be positive");
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const Sample& s : samples) {
      s.validate();
      if (!seen.insert({s.subject, s.articulation, s.transform_id}).second)
        throw ConfigError("duplicate sample " + s.id());
    }
  }
};

namespace detail {

inline int parse_provenance(const std::string& text, const std::string& where) {
  if (text == "original") return 0;
  const std::string prefix = "augmented:";
  if (text.rfind(prefix, 0) == 0) {
    const int id = std::stoi(text.substr(prefix.size()));
    if (id >= 1 && id <= 10) return id;
  }
  throw IoError(where + ": bad provenance '" + text + "'");
}

}  // namespace detail

// Writes images as PGM files under <dir>/images/ plus a manifest.json.
// Returns the manifest path.
inline std::string save_corpus(const Corpus& corpus, const std::string& dir) {
  corpus.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  nlohmann::json manifest;
  manifest["pixel_to_cm"] = corpus.pixel_to_cm;
  manifest["samples"] = nlohmann::json::array();
  for (const Sample& s : corpus.samples) {
    const std::string rel = "images/" + s.id() + ".pgm";
    write_pgm((fs::path(dir) / rel).string(), s.image);
    nlohmann::json entry;
    entry["subject"] = s.subject;
    entry["articulation"] = s.articulation;
    entry["image"] = rel;
    entry["provenance"] = s.provenance();
    nlohmann::json marks = nlohmann::json::array();
    for (int i = 0; i < kLandmarkCount; ++i) {
      const Point& p = s.landmarks.points[static_cast<std::size_t>(i)];
      marks.push_back({landmark_ids()[static_cast<std::size_t>(i)], p.x, p.y});
    }
    entry["landmarks"] = std::move(marks);
    manifest["samples"].push_back(std::move(entry));
  }
  const std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << manifest.dump(2) << "\n";
  return path;
}

inline Corpus load_corpus(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path + ": " + e.what());
  }
  const fs::path base = fs::path(manifest_path).parent_path();

  Corpus corpus;
  try {
    corpus.pixel_to_cm = manifest.at("pixel_to_cm").get<double>();
    for (const auto& entry : manifest.at("samples")) {
      Sample s;
      s.subject = entry.at("subject").get<std::string>();
      s.articulation = entry.at("articulation").get<std::string>();
      s.transform_id = detail::parse_provenance(
          entry.at("provenance").get<std::string>(), s.subject + "/" + s.articulation);
      s.image = read_pgm((base / entry.at("image").get<std::string>()).string());
      const auto& marks = entry.at("landmarks");
      if (marks.size() != kLandmarkCount)
        throw IoError("sample " + s.id() + " lists " +
                      std::to_string(marks.size()) + " landmarks, expected " +
                      std::to_string(kLandmarkCount));
      s.landmarks.height = s.image.height;
      s.landmarks.width = s.image.width;
      std::set<std::string> seen_ids;
      for (const auto& m : marks) {
        const auto id = m.at(0).get<std::string>();
        if (!seen_ids.insert(id).second)
          throw IoError("sample " + s.id() + " repeats landmark " + id);
        s.landmarks.at(id) = {m.at(1).get<double>(), m.at(2).get<double>()};
      }
      corpus.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path + ": " + e.what());
  }
  try {
    corpus.validate();
  } catch (const Error& e) {
    throw IoError(manifest_path + ": " + e.what());
  }
  return corpus;
}

}  // namespace vtlm
