// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtlm/dataset.hpp"
#include "vtlm/image.hpp"
#include "vtlm/pgm.hpp"
#include "vtlm/random.hpp"
#include "vtlm/synth.hpp"

namespace fs = std::filesystem;
using vtlm::Corpus;
using vtlm::Image;
using vtlm::SynthConfig;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SynthConfig small_config() {
  SynthConfig config;
  config.n_subjects = 2;
  config.n_articulations = 3;
  config.height = 64;
  config.width = 64;
  config.seed = 11;
  return config;
}

}  // namespace

TEST_CASE("grayscale to three-channel conversion") {
  Image zeros(4, 5);
  auto t0 = vtlm::to_three_channel<double>(zeros);
  REQUIRE(t0.shape == std::vector<int>{4, 5, 3});
  for (double v : t0.data) REQUIRE(v == 0.0);

  Image bright(2, 2, 255);
  auto t1 = vtlm::to_three_channel<double>(bright);
  for (double v : t1.data) REQUIRE(v == 1.0);

  vtlm::Rng rng(3);
  Image noisy(8, 8);
  for (auto& p : noisy.pixels)
    p = static_cast<std::uint8_t>(rng.uniform_index(256));
  auto t2 = vtlm::to_three_channel<float>(noisy);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      REQUIRE(t2.at3(y, x, 0) == t2.at3(y, x, 1));
      REQUIRE(t2.at3(y, x, 1) == t2.at3(y, x, 2));
      REQUIRE(t2.at3(y, x, 0) >= 0.0f);
      REQUIRE(t2.at3(y, x, 0) <= 1.0f);
    }
  }
}

TEST_CASE("PGM files round trip bit-exactly") {
  TempDir tmp("vtlm_pgm_test");
  vtlm::Rng rng(17);
  Image img(33, 47);
  for (auto& p : img.pixels)
    p = static_cast<std::uint8_t>(rng.uniform_index(256));
  const std::string path = (tmp.path / "img.pgm").string();
  vtlm::write_pgm(path, img);
  Image back = vtlm::read_pgm(path);
  REQUIRE(back == img);
}

TEST_CASE("PGM reader handles comments and rejects other formats") {
  TempDir tmp("vtlm_pgm_hdr_test");
  const std::string path = (tmp.path / "c.pgm").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n# a comment line\n2 2\n# another\n255\n";
    out.write("\x01\x02\x03\x04", 4);
  }
  Image img = vtlm::read_pgm(path);
  REQUIRE(img.width == 2);
  REQUIRE(img.height == 2);
  REQUIRE(img.at(1, 1) == 4);

  const std::string bad = (tmp.path / "bad.pgm").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "P6\n2 2\n255\n";
    out.write("\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\x0c", 12);
  }
  REQUIRE_THROWS_AS(vtlm::read_pgm(bad), vtlm::IoError);
  REQUIRE_THROWS_AS(vtlm::read_pgm((tmp.path / "absent.pgm").string()),
                    vtlm::IoError);
}

TEST_CASE("synthetic corpus is deterministic in the seed") {
  const Corpus a = vtlm::generate_synthetic(small_config());
  const Corpus b = vtlm::generate_synthetic(small_config());
  REQUIRE(a.samples.size() == 6);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    REQUIRE(a.samples[i].image == b.samples[i].image);
    for (int l = 0; l < vtlm::kLandmarkCount; ++l) {
      REQUIRE(a.samples[i].landmarks.points[static_cast<std::size_t>(l)].x ==
              b.samples[i].landmarks.points[static_cast<std::size_t>(l)].x);
      REQUIRE(a.samples[i].landmarks.points[static_cast<std::size_t>(l)].y ==
              b.samples[i].landmarks.points[static_cast<std::size_t>(l)].y);
    }
  }
  SynthConfig other = small_config();
  other.seed = 12;
  const Corpus c = vtlm::generate_synthetic(other);
  REQUIRE_FALSE(c.samples[0].image == a.samples[0].image);
}

TEST_CASE("zero articulation amplitude freezes a subject's landmarks") {
  SynthConfig config = small_config();
  config.artic_amplitude = 0.0;
  const Corpus corpus = vtlm::generate_synthetic(config);
  for (int s = 0; s < 2; ++s) {
    const auto& first = corpus.samples[static_cast<std::size_t>(s * 3)].landmarks;
    for (int a = 1; a < 3; ++a) {
      const auto& other =
          corpus.samples[static_cast<std::size_t>(s * 3 + a)].landmarks;
      for (int l = 0; l < vtlm::kLandmarkCount; ++l) {
        REQUIRE(other.points[static_cast<std::size_t>(l)].x ==
                first.points[static_cast<std::size_t>(l)].x);
        REQUIRE(other.points[static_cast<std::size_t>(l)].y ==
                first.points[static_cast<std::size_t>(l)].y);
      }
    }
  }
}

TEST_CASE("subjects differ more than articulations under defaults") {
  SynthConfig config;
  config.n_subjects = 9;
  config.n_articulations = 12;
  config.height = 128;
  config.width = 128;
  config.seed = 7;
  const Corpus corpus = vtlm::generate_synthetic(config);
  REQUIRE(corpus.samples.size() == 108);

  // mean distance of each sample's landmark from its subject mean (intra)
  // vs distance of subject means from the global mean (inter)
  double intra = 0.0, inter = 0.0;
  int intra_n = 0, inter_n = 0;
  for (int l = 0; l < vtlm::kLandmarkCount; ++l) {
    std::vector<vtlm::Point> subject_mean(9, {0.0, 0.0});
    vtlm::Point global{0.0, 0.0};
    for (int s = 0; s < 9; ++s) {
      for (int a = 0; a < 12; ++a) {
        const auto& p = corpus.samples[static_cast<std::size_t>(s * 12 + a)]
                            .landmarks.points[static_cast<std::size_t>(l)];
        subject_mean[static_cast<std::size_t>(s)].x += p.x / 12.0;
        subject_mean[static_cast<std::size_t>(s)].y += p.y / 12.0;
      }
      global.x += subject_mean[static_cast<std::size_t>(s)].x / 9.0;
      global.y += subject_mean[static_cast<std::size_t>(s)].y / 9.0;
    }
    for (int s = 0; s < 9; ++s) {
      const auto& sm = subject_mean[static_cast<std::size_t>(s)];
      inter += std::hypot(sm.x - global.x, sm.y - global.y);
      ++inter_n;
      for (int a = 0; a < 12; ++a) {
        const auto& p = corpus.samples[static_cast<std::size_t>(s * 12 + a)]
                            .landmarks.points[static_cast<std::size_t>(l)];
        intra += std::hypot(p.x - sm.x, p.y - sm.y);
        ++intra_n;
      }
    }
  }
  intra /= intra_n;
  inter /= inter_n;
  INFO("intra " << intra << " inter " << inter);
  REQUIRE(inter > intra);
}

TEST_CASE("corpus round trips through disk bit-exactly") {
  TempDir tmp("vtlm_corpus_test");
  const Corpus corpus = vtlm::generate_synthetic(small_config());
  const std::string manifest = vtlm::save_corpus(corpus, tmp.path.string());
  const Corpus back = vtlm::load_corpus(manifest);
  REQUIRE(back.pixel_to_cm == corpus.pixel_to_cm);
  REQUIRE(back.samples.size() == corpus.samples.size());
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    REQUIRE(back.samples[i].subject == corpus.samples[i].subject);
    REQUIRE(back.samples[i].articulation == corpus.samples[i].articulation);
    REQUIRE(back.samples[i].transform_id == corpus.samples[i].transform_id);
    REQUIRE(back.samples[i].image == corpus.samples[i].image);
    for (int l = 0; l < vtlm::kLandmarkCount; ++l) {
      REQUIRE(back.samples[i].landmarks.points[static_cast<std::size_t>(l)].x ==
              corpus.samples[i].landmarks.points[static_cast<std::size_t>(l)].x);
      REQUIRE(back.samples[i].landmarks.points[static_cast<std::size_t>(l)].y ==
              corpus.samples[i].landmarks.points[static_cast<std::size_t>(l)].y);
    }
  }
}

TEST_CASE("manifest validation names the offending sample") {
  TempDir tmp("vtlm_manifest_test");
  Image img(32, 32, 100);
  vtlm::write_pgm((tmp.path / "img.pgm").string(), img);

  nlohmann::json manifest;
  manifest["pixel_to_cm"] = 0.1;
  nlohmann::json marks = nlohmann::json::array();
  for (int i = 0; i < 20; ++i)  // one short
    marks.push_back({vtlm::landmark_ids()[static_cast<std::size_t>(i)], 5.0, 5.0});
  nlohmann::json entry = {{"subject", "s77"},
                          {"articulation", "a01"},
                          {"image", "img.pgm"},
                          {"provenance", "original"},
                          {"landmarks", marks}};
  manifest["samples"] = nlohmann::json::array({entry});
  const std::string path = (tmp.path / "manifest.json").string();
  {
    std::ofstream out(path);
    out << manifest.dump();
  }
  REQUIRE_THROWS_WITH(vtlm::load_corpus(path),
                      Catch::Matchers::ContainsSubstring("s77"));

  // out-of-bounds coordinate
  marks.push_back({"VT", 99.0, 5.0});
  manifest["samples"][0]["landmarks"] = marks;
  {
    std::ofstream out(path);
    out << manifest.dump();
  }
  REQUIRE_THROWS_AS(vtlm::load_corpus(path), vtlm::IoError);

  // missing image file
  manifest["samples"][0]["landmarks"][20] = {"VT", 9.0, 5.0};
  manifest["samples"][0]["image"] = "absent.pgm";
  {
    std::ofstream out(path);
    out << manifest.dump();
  }
  REQUIRE_THROWS_AS(vtlm::load_corpus(path), vtlm::IoError);

  REQUIRE_THROWS_AS(vtlm::load_corpus((tmp.path / "nope.json").string()),
                    vtlm::IoError);
}

TEST_CASE("corpus validation rejects duplicate samples") {
  Corpus corpus = vtlm::generate_synthetic(small_config());
  corpus.samples.push_back(corpus.samples.front());
  REQUIRE_THROWS_AS(corpus.validate(), vtlm::ConfigError);
}

TEST_CASE("synthetic generation rejects runaway amplitudes") {
  SynthConfig config = small_config();
  config.morph_amplitude = 60.0;
  config.artic_amplitude = 60.0;
  config.retry_limit = 5;
  REQUIRE_THROWS_AS(vtlm::generate_synthetic(config), vtlm::ConfigError);
}
