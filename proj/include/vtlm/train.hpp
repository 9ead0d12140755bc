// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtlm/adam.hpp"
#include "vtlm/common.hpp"
#include "vtlm/dataset.hpp"
#include "vtlm/heatmap.hpp"
#include "vtlm/image.hpp"
#include "vtlm/landmarks.hpp"
#include "vtlm/network.hpp"
#include "vtlm/params_io.hpp"
#include "vtlm/random.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

enum class Precision { kF32, kF64 };

inline std::string precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}
inline Precision precision_from_name(const std::string& name) {
  if (name == "f32") return Precision::kF32;
  if (name == "f64") return Precision::kF64;
  throw ConfigError("unknown precision '" + name + "' (f32 | f64)");
}

struct TrainConfig {
  int max_epochs = 30;
  int batch_size = 4;
  AdamConfig adam;
  // Multiplies the learning rate after every epoch; 1 keeps it constant.
  double lr_decay = 1.0;
  double validation_fraction = 0.05;
  int patience = 10;
  double min_delta = 1e-5;
  double sigma = 10.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;

  void validate() const {
    if (max_epochs < 1) throw ConfigError("max epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(lr_decay > 0.0) || lr_decay > 1.0)
      throw ConfigError("lr decay must lie in (0, 1]");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0))
      throw ConfigError("validation fraction must lie in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (min_delta < 0.0) throw ConfigError("min delta must be non-negative");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  }
};

// Stops after `patience` consecutive observations that fail to improve on
// the best seen loss by more than min_delta. The first observation always
// counts as an improvement, so the earliest possible stop is observation
// patience + 1.
class PlateauMonitor {
 public:
  PlateauMonitor(int patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (min_delta < 0.0) throw ConfigError("min delta must be non-negative");
  }

  // Returns true when training should stop after this observation.
  bool observe(double loss) {
    if (loss < best_ - min_delta_) {
      best_ = loss;
      streak_ = 0;
    } else {
      ++streak_;
    }
    return streak_ >= patience_;
  }

  double best() const { return best_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int streak_ = 0;
};

struct EpochStats {
  // Both losses are measured at the end of the epoch, after its updates,
  // so the sequence tracks the model rather than the optimization path.
  double train_loss = 0.0;
  // Loss on the held-out split; equals train_loss when the validation
  // fraction rounds down to zero samples.
  double val_loss = 0.0;
};

struct GroupHistory {
  std::vector<std::string> group;
  std::vector<EpochStats> epochs;
  std::string stop_reason;  // "plateau" | "max_epochs"
};

// Groups must cover each of the 21 landmarks exactly once.
inline void validate_partition(const std::vector<std::vector<std::string>>& groups) {
  std::array<int, kLandmarkCount> seen{};
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError("empty landmark group");
    for (const auto& id : g) ++seen[static_cast<std::size_t>(landmark_index(id))];
  }
  for (int i = 0; i < kLandmarkCount; ++i) {
    if (seen[static_cast<std::size_t>(i)] != 1)
      throw ConfigError("landmark groups must partition the 21 landmarks; '" +
                        landmark_ids()[static_cast<std::size_t>(i)] +
                        "' appears " + std::to_string(seen[static_cast<std::size_t>(i)]) +
                        " times");
  }
}

inline std::vector<std::vector<std::string>> default_flatnet_groups() {
  return group_landmarks({5, 4, 4, 4, 4});
}

namespace train_detail {

// The corpus images as rank-3 HxWx3 tensors, plus the common frame size.
template <typename T>
std::vector<Tensor<T>> corpus_inputs(const Corpus& corpus, int& height, int& width) {
  if (corpus.samples.empty()) throw ConfigError("training corpus is empty");
  height = corpus.samples.front().image.height;
  width = corpus.samples.front().image.width;
  std::vector<Tensor<T>> inputs;
  inputs.reserve(corpus.samples.size());
  for (const Sample& s : corpus.samples) {
    if (s.image.height != height || s.image.width != width)
      throw ConfigError("sample " + s.id() + " is " +
                        std::to_string(s.image.height) + "x" +
                        std::to_string(s.image.width) + ", expected " +
                        std::to_string(height) + "x" + std::to_string(width));
    inputs.push_back(to_three_channel<T>(s.image));
  }
  return inputs;
}

template <typename T>
Tensor<T> gather_batch(const std::vector<Tensor<T>>& items,
                       const std::vector<std::size_t>& order,
                       std::size_t start, std::size_t count) {
  const Tensor<T>& first = items[order[start]];
  std::vector<int> shape = {static_cast<int>(count)};
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor<T> batch(shape);
  const std::size_t stride = first.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor<T>& item = items[order[start + i]];
    std::copy(item.data.begin(), item.data.end(),
              batch.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return batch;
}

template <typename T>
double split_loss(const Network<T>& net, const std::vector<Tensor<T>>& inputs,
                  const std::vector<Tensor<T>>& targets,
                  const std::vector<std::size_t>& idx, int batch_size) {
  double weighted = 0.0;
  for (std::size_t start = 0; start < idx.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), idx.size() - start);
    Tensor<T> in = gather_batch(inputs, idx, start, count);
    Tensor<T> tg = gather_batch(targets, idx, start, count);
    weighted += static_cast<double>(mae_loss(net.forward(in), tg)) *
                static_cast<double>(count);
  }
  return weighted / static_cast<double>(idx.size());
}

}  // namespace train_detail

// Trains one group network on the whole corpus. A validation split of
// lround(n * validation_fraction) samples is held out at random from the
// config seed; when that rounds to zero the plateau monitor watches the
// training loss instead.
template <typename T>
std::pair<Network<T>, GroupHistory> train_single(const NetworkSpec& spec,
                                                 const Corpus& corpus,
                                                 const TrainConfig& config,
                                                 std::uint64_t net_seed) {
  config.validate();
  int height = 0, width = 0;
  std::vector<Tensor<T>> inputs =
      train_detail::corpus_inputs<T>(corpus, height, width);

  std::vector<Tensor<T>> targets;
  targets.reserve(corpus.samples.size());
  for (const Sample& s : corpus.samples)
    targets.push_back(encode_heatmaps<T>(s.landmarks, spec.group, config.sigma).maps);

  const std::size_t n = inputs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, 0x5b117));
  split_rng.shuffle(order.begin(), order.end());
  std::size_t n_val = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) * config.validation_fraction));
  if (n_val >= n) n_val = n - 1;
  std::vector<std::size_t> val_idx(order.begin(),
                                   order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                                     order.end());

  Network<T> net(spec, net_seed);
  Adam<T> optimizer(config.adam);
  std::vector<Tensor<T>*> params = net.parameters();

  GroupHistory history;
  history.group = spec.group;
  history.stop_reason = "max_epochs";
  PlateauMonitor monitor(config.patience, config.min_delta);

  const std::string group_label = [&] {
    std::string s;
    for (const auto& id : spec.group) s += (s.empty() ? "" : ",") + id;
    return s;
  }();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng epoch_rng(derive_seed(config.seed, 0xe90c4, static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(train_idx.begin(), train_idx.end());

    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(
          static_cast<std::size_t>(config.batch_size), train_idx.size() - start);
      Tensor<T> in = train_detail::gather_batch(inputs, train_idx, start, count);
      Tensor<T> tg = train_detail::gather_batch(targets, train_idx, start, count);

      typename Network<T>::Trace trace;
      Tensor<T> out = net.forward(in, &trace);
      const double loss = static_cast<double>(mae_loss(out, tg));
      if (!std::isfinite(loss))
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch) + " in group [" + group_label + "]");

      net.zero_grads();
      net.backward(trace, mae_loss_backward(out, tg));
      optimizer.step(params);
    }
    if (config.lr_decay < 1.0)
      optimizer.set_learning_rate(optimizer.config().learning_rate *
                                  config.lr_decay);

    EpochStats stats;
    stats.train_loss = train_detail::split_loss(net, inputs, targets, train_idx,
                                                config.batch_size);
    stats.val_loss = val_idx.empty()
                         ? stats.train_loss
                         : train_detail::split_loss(net, inputs, targets, val_idx,
                                                    config.batch_size);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
      throw NumericError("non-finite epoch loss at epoch " +
                         std::to_string(epoch) + " in group [" + group_label + "]");
    history.epochs.push_back(stats);
    {
      std::ostringstream line;
      line << "group [" << group_label << "] epoch " << epoch << "/"
           << config.max_epochs << " train " << stats.train_loss << " val "
           << stats.val_loss;
      emit_progress(line.str());
    }
    if (monitor.observe(stats.val_loss)) {
      history.stop_reason = "plateau";
      break;
    }
  }
  return {std::move(net), std::move(history)};
}

template <typename T>
struct TrainedGroup {
  Network<T> net;
  GroupHistory history;
};

template <typename T>
struct TrainedModel {
  Architecture architecture = Architecture::kFlatNet;
  int height = 0;
  int width = 0;
  double sigma = 10.0;
  std::uint64_t seed = 0;
  std::vector<TrainedGroup<T>> groups;

  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& g : groups) total += g.net.parameter_count();
    return total;
  }
};

// Trains one network per group; `base` supplies everything but the group.
// Groups must partition the 21 landmarks (flatnet uses 5 groups, convonly
// a single group of all 21).
template <typename T>
TrainedModel<T> train_model(const NetworkSpec& base,
                            const std::vector<std::vector<std::string>>& groups,
                            const Corpus& corpus, const TrainConfig& config) {
  config.validate();
  validate_partition(groups);
  if (corpus.samples.empty()) throw ConfigError("training corpus is empty");

  TrainedModel<T> model;
  model.architecture = base.architecture;
  model.height = corpus.samples.front().image.height;
  model.width = corpus.samples.front().image.width;
  model.sigma = config.sigma;
  model.seed = config.seed;

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    NetworkSpec spec = base;
    spec.group = groups[gi];
    auto [net, history] = train_single<T>(
        spec, corpus, config, derive_seed(config.seed, 0x9e0, gi));
    model.groups.push_back({std::move(net), std::move(history)});
  }
  return model;
}

template <typename T>
struct Prediction {
  LandmarkSet landmarks;
  std::array<bool, kLandmarkCount> degenerate{};
  HeatMapStack<T> stack;  // all 21 channels in canonical order
};

// Runs every group network on one image and decodes the assembled stack.
template <typename T>
Prediction<T> predict(const TrainedModel<T>& model, const Image& image) {
  if (image.height != model.height || image.width != model.width)
    throw ShapeError("predict expects " + std::to_string(model.height) + "x" +
                     std::to_string(model.width) + " images, got " +
                     std::to_string(image.height) + "x" +
                     std::to_string(image.width));

  Prediction<T> result;
  result.stack.maps = Tensor<T>({image.height, image.width, kLandmarkCount});
  result.stack.ids.assign(landmark_ids().begin(), landmark_ids().end());
  result.stack.sigma = model.sigma;

  Tensor<T> plane = to_three_channel<T>(image);
  Tensor<T> input({1, image.height, image.width, 3});
  std::copy(plane.data.begin(), plane.data.end(), input.data.begin());

  for (const TrainedGroup<T>& g : model.groups) {
    Tensor<T> out = g.net.forward(input);
    const auto& ids = g.net.spec().group;
    for (std::size_t c = 0; c < ids.size(); ++c) {
      const int ch = landmark_index(ids[c]);
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
          result.stack.maps.at3(y, x, ch) = out.at4(0, y, x, static_cast<int>(c));
    }
  }

  std::vector<DecodedPoint> decoded = decode_heatmaps(result.stack.maps);
  result.landmarks.height = image.height;
  result.landmarks.width = image.width;
  for (int i = 0; i < kLandmarkCount; ++i) {
    result.landmarks.points[static_cast<std::size_t>(i)] =
        Point{static_cast<double>(decoded[static_cast<std::size_t>(i)].x),
              static_cast<double>(decoded[static_cast<std::size_t>(i)].y)};
    result.degenerate[static_cast<std::size_t>(i)] =
        decoded[static_cast<std::size_t>(i)].degenerate;
  }
  return result;
}

// Mean decoded distance of one group network over a corpus, in pixels.
// This is the overfit-convergence measure: forward, decode, compare.
template <typename T>
double mean_group_distance(const Network<T>& net, const Corpus& corpus) {
  if (corpus.samples.empty()) throw ConfigError("corpus is empty");
  const auto& group = net.spec().group;
  double total = 0.0;
  std::size_t count = 0;
  for (const Sample& s : corpus.samples) {
    Tensor<T> plane = to_three_channel<T>(s.image);
    Tensor<T> input({1, s.image.height, s.image.width, 3});
    std::copy(plane.data.begin(), plane.data.end(), input.data.begin());
    Tensor<T> out = net.forward(input);
    Tensor<T> maps({s.image.height, s.image.width, static_cast<int>(group.size())});
    std::copy(out.data.begin(), out.data.end(), maps.data.begin());
    std::vector<DecodedPoint> decoded = decode_heatmaps(maps);
    for (std::size_t c = 0; c < group.size(); ++c) {
      const Point& truth = s.landmarks.at(group[c]);
      const double dx = static_cast<double>(decoded[c].x) - truth.x;
      const double dy = static_cast<double>(decoded[c].y) - truth.y;
      total += std::sqrt(dx * dx + dy * dy);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

namespace train_detail {

inline nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["architecture"] = architecture_name(spec.architecture);
  j["landmarks"] = spec.group;
  j["input_channels"] = spec.input_channels;
  if (spec.architecture == Architecture::kFlatNet) {
    j["dilation_rates"] = spec.dilation_rates;
    j["branch_width"] = spec.branch_width;
    j["l4_width"] = spec.l4_width;
    j["l5_width"] = spec.l5_width;
    j["l6_width"] = spec.l6_width;
  } else {
    j["convonly_widths"] = spec.convonly_widths;
    j["convonly_kernel"] = spec.convonly_kernel;
  }
  return j;
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.architecture = architecture_from_name(j.at("architecture").get<std::string>());
  spec.group = j.at("landmarks").get<std::vector<std::string>>();
  spec.input_channels = j.at("input_channels").get<int>();
  if (spec.architecture == Architecture::kFlatNet) {
    spec.dilation_rates = j.at("dilation_rates").get<std::vector<int>>();
    spec.branch_width = j.at("branch_width").get<int>();
    spec.l4_width = j.at("l4_width").get<int>();
    spec.l5_width = j.at("l5_width").get<int>();
    spec.l6_width = j.at("l6_width").get<int>();
  } else {
    spec.convonly_widths = j.at("convonly_widths").get<std::vector<int>>();
    spec.convonly_kernel = j.at("convonly_kernel").get<int>();
  }
  spec.validate();
  return spec;
}

}  // namespace train_detail

// Model directory layout: model.json (structure, history, seed) plus one
// parameter container per group. Parameters are stored in f32.
template <typename T>
void save_model(const TrainedModel<T>& model, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory " + dir + ": " + ec.message());

  nlohmann::json j;
  j["format_version"] = 1;
  j["architecture"] = architecture_name(model.architecture);
  j["height"] = model.height;
  j["width"] = model.width;
  j["sigma"] = model.sigma;
  j["seed"] = model.seed;
  j["parameter_count"] = model.parameter_count();
  j["groups"] = nlohmann::json::array();

  for (std::size_t gi = 0; gi < model.groups.size(); ++gi) {
    const TrainedGroup<T>& g = model.groups[gi];
    const std::string params_file = "group" + std::to_string(gi) + ".vtlm";

    NamedArrays arrays;
    g.net.for_each_layer([&arrays](const auto& layer) {
      arrays.emplace_back(layer.name + ".w", layer.w.template cast<float>());
      arrays.emplace_back(layer.name + ".b", layer.b.template cast<float>());
    });
    save_params((fs::path(dir) / params_file).string(), arrays);

    nlohmann::json gj = train_detail::spec_to_json(g.net.spec());
    gj["params_file"] = params_file;
    nlohmann::json hist;
    hist["stop_reason"] = g.history.stop_reason;
    hist["train_loss"] = nlohmann::json::array();
    hist["val_loss"] = nlohmann::json::array();
    for (const EpochStats& e : g.history.epochs) {
      hist["train_loss"].push_back(e.train_loss);
      hist["val_loss"].push_back(e.val_loss);
    }
    gj["history"] = hist;
    j["groups"].push_back(gj);
  }

  std::ofstream out(fs::path(dir) / "model.json");
  if (!out) throw IoError("cannot write model.json in " + dir);
  out << j.dump(2) << "\n";
  if (!out.good()) throw IoError("failed writing model.json in " + dir);
}

template <typename T = float>
TrainedModel<T> load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "model.json");
  if (!in) throw IoError("cannot open model.json in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model.json in " + dir + ": " + e.what());
  }

  try {
    if (j.at("format_version").get<int>() != 1)
      throw IoError("unsupported model format version");

    TrainedModel<T> model;
    model.architecture =
        architecture_from_name(j.at("architecture").get<std::string>());
    model.height = j.at("height").get<int>();
    model.width = j.at("width").get<int>();
    model.sigma = j.at("sigma").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();

    std::vector<std::vector<std::string>> groups;
    for (const nlohmann::json& gj : j.at("groups")) {
      NetworkSpec spec = train_detail::spec_from_json(gj);
      groups.push_back(spec.group);
      Network<T> net(spec, 0);

      NamedArrays arrays =
          load_params((fs::path(dir) / gj.at("params_file").get<std::string>()).string());
      auto named = net.named_parameters();
      if (arrays.size() != named.size())
        throw IoError("parameter container does not match the architecture");
      for (std::size_t i = 0; i < named.size(); ++i) {
        if (arrays[i].first != named[i].first ||
            arrays[i].second.shape != named[i].second->shape)
          throw IoError("parameter mismatch at '" + named[i].first + "'");
        for (std::size_t k = 0; k < arrays[i].second.data.size(); ++k)
          named[i].second->data[k] = static_cast<T>(arrays[i].second.data[k]);
      }

      TrainedGroup<T> tg{std::move(net), {}};
      tg.history.group = spec.group;
      const nlohmann::json& hist = gj.at("history");
      tg.history.stop_reason = hist.at("stop_reason").get<std::string>();
      const auto& tl = hist.at("train_loss");
      const auto& vl = hist.at("val_loss");
      if (tl.size() != vl.size()) throw IoError("corrupt training history");
      for (std::size_t e = 0; e < tl.size(); ++e)
        tg.history.epochs.push_back(
            {tl[e].get<double>(), vl[e].get<double>()});
      model.groups.push_back(std::move(tg));
    }
    validate_partition(groups);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model.json in " + dir + ": " + e.what());
  }
}

}  // namespace vtlm
