// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtlm/augment.hpp"
#include "vtlm/common.hpp"
#include "vtlm/dataset.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/metrics.hpp"
#include "vtlm/random.hpp"
#include "vtlm/train.hpp"

namespace vtlm {

// One evaluation scheme round trains on a sub-corpus and predicts single
// images. Both stages are injectable so scheme arithmetic can be tested
// with a stub trainer.
using PredictorFn = std::function<LandmarkSet(const Image&)>;
using TrainerFn = std::function<PredictorFn(const Corpus& train, std::uint64_t seed)>;
using AugmenterFn = std::function<Corpus(const Corpus& originals)>;

// Signed residual of one predicted landmark on one test sample
// (dx, dy = predicted minus ground truth).
struct DistanceRecord {
  std::string sample_id;
  std::string subject;
  std::string landmark;
  double dx = 0.0;
  double dy = 0.0;
  double d = 0.0;
};

struct LandmarkStat {
  std::string landmark;
  std::size_t n = 0;
  double rmse_px = 0.0;
  double outlier_pct = 0.0;
};

struct SubjectStat {
  std::string subject;
  std::size_t n = 0;
  double rmse_px = 0.0;
};

struct EvaluationReport {
  std::string scheme;  // "cv" | "loso"
  std::uint64_t seed = 0;
  double pixel_to_cm = 0.1;
  std::vector<DistanceRecord> records;

  // cv metadata
  int k = 0;
  std::vector<std::vector<std::string>> folds;  // sample ids per test fold

  // loso metadata
  std::vector<std::string> subjects;
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> test_sizes;

  // optional comparisons, emitted into the summary when present
  std::vector<std::pair<std::string, TTestResult>> t_tests;

  std::vector<double> distances() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.d);
    return out;
  }

  double overall_rmse_px() const { return rmse_from_distances(distances()); }
  double overall_rmse_cm() const { return overall_rmse_px() * pixel_to_cm; }

  double mean_distance_px() const {
    const std::vector<double> d = distances();
    if (d.empty()) throw ConfigError("report has no distance records");
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  }

  // Spread across landmark-sample pairs, n-1 denominator.
  double std_distance_px() const {
    const std::vector<double> d = distances();
    if (d.empty()) throw ConfigError("report has no distance records");
    if (d.size() == 1) return 0.0;
    const double mean = mean_distance_px();
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(d.size() - 1));
  }

  double overall_outlier_pct(double threshold = 5.0) const {
    return outlier_rate(distances(), threshold);
  }

  std::array<LandmarkStat, kLandmarkCount> per_landmark(double threshold = 5.0) const {
    std::array<LandmarkStat, kLandmarkCount> stats;
    std::array<std::vector<double>, kLandmarkCount> by_landmark;
    for (const auto& r : records)
      by_landmark[static_cast<std::size_t>(landmark_index(r.landmark))].push_back(r.d);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
      stats[i].landmark = landmark_ids()[i];
      stats[i].n = by_landmark[i].size();
      if (!by_landmark[i].empty()) {
        stats[i].rmse_px = rmse_from_distances(by_landmark[i]);
        stats[i].outlier_pct = outlier_rate(by_landmark[i], threshold);
      }
    }
    return stats;
  }

  std::vector<SubjectStat> per_subject() const {
    std::map<std::string, std::vector<double>> by_subject;
    for (const auto& r : records) by_subject[r.subject].push_back(r.d);
    std::vector<SubjectStat> stats;
    stats.reserve(by_subject.size());
    for (const auto& [subject, d] : by_subject)
      stats.push_back({subject, d.size(), rmse_from_distances(d)});
    return stats;
  }
};

namespace eval_detail {

inline Corpus corpus_subset(const Corpus& corpus,
                            const std::vector<std::size_t>& idx) {
  Corpus out;
  out.pixel_to_cm = corpus.pixel_to_cm;
  out.samples.reserve(idx.size());
  for (std::size_t i : idx) out.samples.push_back(corpus.samples[i]);
  return out;
}

inline void evaluate_into(const Corpus& test, const PredictorFn& predictor,
                          std::vector<DistanceRecord>& out) {
  for (const Sample& s : test.samples) {
    const LandmarkSet pred = predictor(s.image);
    for (const auto& id : landmark_ids()) {
      const Point& truth = s.landmarks.at(id);
      const Point& guess = pred.at(id);
      DistanceRecord rec;
      rec.sample_id = s.id();
      rec.subject = s.subject;
      rec.landmark = id;
      rec.dx = guess.x - truth.x;
      rec.dy = guess.y - truth.y;
      rec.d = std::sqrt(rec.dx * rec.dx + rec.dy * rec.dy);
      out.push_back(std::move(rec));
    }
  }
}

}  // namespace eval_detail

// Randomized k-fold cross-validation over the given corpus (normally the
// augmented one). Samples are shuffled once from the seed and cut into k
// near-equal folds: the first (n mod k) folds get one extra sample.
inline EvaluationReport run_cv(const Corpus& corpus, const TrainerFn& trainer,
                               int k, std::uint64_t seed) {
  const std::size_t n = corpus.samples.size();
  if (k < 2) throw ConfigError("cross-validation requires k >= 2");
  if (static_cast<std::size_t>(k) > n)
    throw ConfigError("cross-validation with k = " + std::to_string(k) +
                      " exceeds the sample count " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xc5f01d));
  rng.shuffle(order.begin(), order.end());

  EvaluationReport report;
  report.scheme = "cv";
  report.seed = seed;
  report.pixel_to_cm = corpus.pixel_to_cm;
  report.k = k;

  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t cursor = 0;
  std::vector<std::vector<std::size_t>> fold_idx;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    fold_idx.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                          order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
    cursor += size;
  }

  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    train_idx.reserve(n - fold_idx[static_cast<std::size_t>(f)].size());
    for (int g = 0; g < k; ++g)
      if (g != f)
        train_idx.insert(train_idx.end(), fold_idx[static_cast<std::size_t>(g)].begin(),
                         fold_idx[static_cast<std::size_t>(g)].end());

    const Corpus test = eval_detail::corpus_subset(corpus, fold_idx[static_cast<std::size_t>(f)]);
    const Corpus train = eval_detail::corpus_subset(corpus, train_idx);

    std::vector<std::string> fold_ids;
    fold_ids.reserve(test.samples.size());
    for (const Sample& s : test.samples) fold_ids.push_back(s.id());
    report.folds.push_back(std::move(fold_ids));
    report.train_sizes.push_back(train.samples.size());
    report.test_sizes.push_back(test.samples.size());

    {
      std::ostringstream line;
      line << "cv fold " << (f + 1) << "/" << k << " train "
           << train.samples.size() << " test " << test.samples.size();
      emit_progress(line.str());
    }
    const PredictorFn predictor =
        trainer(train, derive_seed(seed, 0x40f, static_cast<std::uint64_t>(f)));
    eval_detail::evaluate_into(test, predictor, report.records);
  }
  return report;
}

// Leave-one-subject-out: per round the held-out subject's original images
// form the test set and the augmentation of everything else forms the
// training set.
inline EvaluationReport run_loso(const Corpus& originals,
                                 const AugmenterFn& augmenter,
                                 const TrainerFn& trainer, std::uint64_t seed) {
  for (const Sample& s : originals.samples)
    if (!s.is_original())
      throw ConfigError("leave-one-subject-out expects an unaugmented corpus; "
                        "sample " + s.id() + " is " + s.provenance());
  const std::vector<std::string> subjects = originals.subjects();
  if (subjects.size() < 2)
    throw ConfigError("leave-one-subject-out requires at least 2 subjects");

  EvaluationReport report;
  report.scheme = "loso";
  report.seed = seed;
  report.pixel_to_cm = originals.pixel_to_cm;
  report.subjects = subjects;

  for (std::size_t round = 0; round < subjects.size(); ++round) {
    const std::string& held_out = subjects[round];
    std::vector<std::size_t> test_idx, train_orig_idx;
    for (std::size_t i = 0; i < originals.samples.size(); ++i) {
      if (originals.samples[i].subject == held_out)
        test_idx.push_back(i);
      else
        train_orig_idx.push_back(i);
    }

    const Corpus test = eval_detail::corpus_subset(originals, test_idx);
    const Corpus train = augmenter(eval_detail::corpus_subset(originals, train_orig_idx));
    for (const Sample& s : train.samples)
      if (s.subject == held_out)
        throw ConfigError("augmenter leaked held-out subject " + held_out +
                          " into the training set");

    report.train_sizes.push_back(train.samples.size());
    report.test_sizes.push_back(test.samples.size());

    {
      std::ostringstream line;
      line << "loso round " << (round + 1) << "/" << subjects.size()
           << " held-out " << held_out << " train " << train.samples.size()
           << " test " << test.samples.size();
      emit_progress(line.str());
    }
    const PredictorFn predictor = trainer(train, derive_seed(seed, 0x1050, round));
    eval_detail::evaluate_into(test, predictor, report.records);
  }
  return report;
}

// Real-pipeline adapters for the injectable stages.
template <typename T = float>
TrainerFn make_model_trainer(NetworkSpec base,
                             std::vector<std::vector<std::string>> groups,
                             TrainConfig config) {
  return [base = std::move(base), groups = std::move(groups),
          config](const Corpus& train, std::uint64_t seed) -> PredictorFn {
    TrainConfig round_config = config;
    round_config.seed = seed;
    auto model = std::make_shared<TrainedModel<T>>(
        train_model<T>(base, groups, train, round_config));
    return [model](const Image& image) {
      return predict(*model, image).landmarks;
    };
  };
}

inline AugmenterFn make_augmenter(std::uint64_t seed,
                                  std::vector<int> op_ids = {}) {
  return [seed, op_ids = std::move(op_ids)](const Corpus& originals) {
    return op_ids.empty() ? augment_corpus(originals, seed)
                          : augment_corpus(originals, seed, op_ids);
  };
}

// Paired t-test between two runs on the same scheme: records are matched
// by (sample id, landmark) and the distance series are compared.
inline TTestResult compare_reports(const EvaluationReport& a,
                                   const EvaluationReport& b) {
  std::map<std::pair<std::string, std::string>, double> bd;
  for (const auto& r : b.records) bd[{r.sample_id, r.landmark}] = r.d;
  std::vector<double> da, db;
  for (const auto& r : a.records) {
    auto it = bd.find({r.sample_id, r.landmark});
    if (it == bd.end())
      throw ConfigError("reports cover different samples; cannot pair " +
                        r.sample_id + "/" + r.landmark);
    da.push_back(r.d);
    db.push_back(it->second);
  }
  return paired_ttest(da, db);
}

namespace eval_detail {

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline std::string fmt3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace eval_detail

// Writes the five report files. Distances land in distances_raw.csv with
// exactly (sample_id, landmark_id, d_px); the aggregate tables are all
// recomputable from it.
inline void report_emit(const EvaluationReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory " + out_dir + ": " + ec.message());
  const fs::path dir(out_dir);

  {
    auto out = eval_detail::open_out(dir / "rmse_per_landmark.csv");
    out << "landmark,n,rmse_px,rmse_cm\n";
    for (const LandmarkStat& s : report.per_landmark()) {
      out << s.landmark << "," << s.n << "," << eval_detail::fmt(s.rmse_px) << ","
          << eval_detail::fmt(s.rmse_px * report.pixel_to_cm) << "\n";
    }
  }
  {
    auto out = eval_detail::open_out(dir / "outliers_per_landmark.csv");
    out << "landmark,n,outlier_pct\n";
    for (const LandmarkStat& s : report.per_landmark())
      out << s.landmark << "," << s.n << "," << eval_detail::fmt(s.outlier_pct) << "\n";
  }
  {
    auto out = eval_detail::open_out(dir / "rmse_per_subject.csv");
    out << "subject,n,rmse_px,rmse_cm\n";
    for (const SubjectStat& s : report.per_subject())
      out << s.subject << "," << s.n << "," << eval_detail::fmt(s.rmse_px) << ","
          << eval_detail::fmt(s.rmse_px * report.pixel_to_cm) << "\n";
  }
  {
    auto out = eval_detail::open_out(dir / "distances_raw.csv");
    out << "sample_id,landmark_id,d_px\n";
    for (const DistanceRecord& r : report.records)
      out << r.sample_id << "," << r.landmark << "," << eval_detail::fmt(r.d) << "\n";
  }

  nlohmann::json j;
  j["scheme"] = report.scheme;
  j["seed"] = report.seed;
  j["pixel_to_cm"] = report.pixel_to_cm;
  j["n_distances"] = report.records.size();
  j["overall"] = {
      {"rmse_px", report.overall_rmse_px()},
      {"rmse_cm", report.overall_rmse_cm()},
      {"mean_px", report.mean_distance_px()},
      {"std_px", report.std_distance_px()},
      {"outlier_pct", report.overall_outlier_pct()},
  };
  j["train_sizes"] = report.train_sizes;
  j["test_sizes"] = report.test_sizes;
  if (report.scheme == "cv") {
    j["cv"] = {{"k", report.k}, {"folds", report.folds}};
  } else if (report.scheme == "loso") {
    j["loso"] = {{"subjects", report.subjects}};
  }
  if (!report.t_tests.empty()) {
    j["t_tests"] = nlohmann::json::array();
    for (const auto& [label, r] : report.t_tests) {
      const double p = r.p < 1e-300 ? 0.0 : r.p;
      j["t_tests"].push_back({{"label", label},
                              {"t", r.t},
                              {"df", r.df},
                              {"n", r.n},
                              {"p", p},
                              {"p_display", eval_detail::fmt3(p)}});
    }
  }

  auto out = eval_detail::open_out(dir / "summary.json");
  out << j.dump(2) << "\n";
  if (!out.good()) throw IoError("failed writing summary.json in " + out_dir);
}

}  // namespace vtlm
