// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// vtlm: batch front end for the landmark-localization pipeline. One binary,
// six subcommands: synth, augment, train, predict, eval, gradcheck.
//
// Configuration comes from flags plus an optional JSON config file whose
// keys are the long flag names without dashes; flags win. Every run writes
// <out>/run.json with the fully resolved configuration, so a run can be
// reproduced from its artifacts alone. Progress goes to stderr; files are
// the only machine-readable output. Outputs land under --out, which falls
// back to $VTLM_OUTPUT_ROOT/<subcommand>; relative --out paths also resolve
// under that root when it is set.
//
// Exit codes: 0 success, 2 usage or bad configuration, 3 I/O failure,
// 4 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtlm/augment.hpp"
#include "vtlm/common.hpp"
#include "vtlm/dataset.hpp"
#include "vtlm/eval.hpp"
#include "vtlm/gradcheck.hpp"
#include "vtlm/network.hpp"
#include "vtlm/ops.hpp"
#include "vtlm/pgm.hpp"
#include "vtlm/random.hpp"
#include "vtlm/synth.hpp"
#include "vtlm/train.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

const char* kOutputRootVar = "VTLM_OUTPUT_ROOT";

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw vtlm::IoError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw vtlm::IoError("malformed config file " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw vtlm::ConfigError("config file " + path + " must hold a JSON object");
  return j;
}

// Final value of one option: command-line flag, else config-file key, else
// the built-in default already in `var`. Records the outcome for run.json
// and reports whether the user supplied it at all.
struct Resolver {
  CLI::App* cmd = nullptr;
  json cfg = json::object();
  json record = json::object();

  template <typename T>
  bool resolve(const std::string& name, T& var) {
    bool provided = cmd->count("--" + name) > 0;
    if (!provided) {
      const auto it = cfg.find(name);
      if (it != cfg.end()) {
        try {
          var = it->template get<T>();
        } catch (const json::exception& e) {
          throw vtlm::ConfigError("config key '" + name + "': " + e.what());
        }
        provided = true;
      }
    }
    record[name] = var;
    return provided;
  }
};

struct CommonArgs {
  std::string config_path;
  std::string out;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON config file; command-line flags win over its keys");
    cmd->add_option("--out", out,
                    "output directory (default: $VTLM_OUTPUT_ROOT/<subcommand>)");
  }

  Resolver resolver(CLI::App* cmd) const {
    return Resolver{cmd, load_config_file(config_path)};
  }
};

bool output_root_set() {
  const char* root = std::getenv(kOutputRootVar);
  return root != nullptr && *root != '\0';
}

fs::path resolve_out(const std::string& subcommand, const std::string& given) {
  const char* root = std::getenv(kOutputRootVar);
  if (given.empty()) {
    if (output_root_set()) return fs::path(root) / subcommand;
    throw vtlm::ConfigError("missing --out (pass the flag or set " +
                            std::string(kOutputRootVar) + ")");
  }
  fs::path p(given);
  if (p.is_relative() && output_root_set()) return fs::path(root) / p;
  return p;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw vtlm::IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out.good()) throw vtlm::IoError("failed writing " + path.string());
}

// The reproducibility artifact: no timestamps or host details, only the
// resolved configuration, so identical runs produce identical bytes.
void write_run_json(const fs::path& out_dir, const std::string& subcommand,
                    const json& resolved) {
  json j;
  j["subcommand"] = subcommand;
  j["resolved"] = resolved;
  write_json_file(out_dir / "run.json", j);
}

void resolve_seed(Resolver& r, std::uint64_t& seed, bool required) {
  if (!r.resolve("seed", seed) && required)
    throw vtlm::ConfigError(
        "--seed is required (on the command line or in the config file)");
}

void resolve_jobs(Resolver& r, int& jobs) {
  r.resolve("jobs", jobs);
  if (jobs < 1) throw vtlm::ConfigError("--jobs must be at least 1");
  vtlm::tensor_jobs() = jobs;
}

std::string fmt17(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Architecture and optimizer knobs shared by train and eval.
struct TrainArgs {
  std::string arch = "flatnet";
  std::vector<int> group_sizes;
  std::vector<int> dilations = {1, 2, 4, 8, 16};
  int branch_width = 32;
  int l4_width = 512;
  int l5_width = 512;
  int l6_width = 256;
  std::vector<int> convonly_widths = {16, 32, 32, 32, 16};
  int convonly_kernel = 9;
  int max_epochs = 30;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double lr_decay = 1.0;
  double val_fraction = 0.05;
  int patience = 10;
  double min_delta = 1e-5;
  double sigma = 10.0;
  std::string precision = "f32";

  void add(CLI::App* cmd) {
    cmd->add_option("--arch", arch, "network architecture: flatnet | convonly")
        ->capture_default_str();
    cmd->add_option("--groups", group_sizes,
                    "landmark group sizes summing to 21 (default 5,4,4,4,4 "
                    "for flatnet, 21 for convonly)")
        ->delimiter(',');
    cmd->add_option("--dilations", dilations,
                    "five distinct dilation rates for the flatnet branches")
        ->delimiter(',');
    cmd->add_option("--branch-width", branch_width,
                    "channels per flatnet branch")
        ->capture_default_str();
    cmd->add_option("--l4-width", l4_width, "flatnet 5x5 fusion width")
        ->capture_default_str();
    cmd->add_option("--l5-width", l5_width, "flatnet first 1x1 width")
        ->capture_default_str();
    cmd->add_option("--l6-width", l6_width, "flatnet second 1x1 width")
        ->capture_default_str();
    cmd->add_option("--convonly-widths", convonly_widths,
                    "five interior widths of the convonly baseline")
        ->delimiter(',');
    cmd->add_option("--convonly-kernel", convonly_kernel,
                    "odd kernel size of the convonly baseline")
        ->capture_default_str();
    cmd->add_option("--max-epochs", max_epochs, "epoch cap per group")
        ->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "training batch size")
        ->capture_default_str();
    cmd->add_option("--lr", learning_rate, "Adam learning rate")
        ->capture_default_str();
    cmd->add_option("--lr-decay", lr_decay,
                    "per-epoch learning-rate multiplier in (0, 1]")
        ->capture_default_str();
    cmd->add_option("--val-fraction", val_fraction,
                    "held-out fraction for plateau monitoring, in (0, 1)")
        ->capture_default_str();
    cmd->add_option("--patience", patience,
                    "epochs without improvement before stopping")
        ->capture_default_str();
    cmd->add_option("--min-delta", min_delta,
                    "loss improvement below this counts as a plateau")
        ->capture_default_str();
    cmd->add_option("--sigma", sigma, "heat-map Gaussian width in pixels")
        ->capture_default_str();
    cmd->add_option("--precision", precision, "training arithmetic: f32 | f64")
        ->capture_default_str();
  }

  void resolve(Resolver& r) {
    r.resolve("arch", arch);
    r.resolve("groups", group_sizes);
    r.resolve("dilations", dilations);
    r.resolve("branch-width", branch_width);
    r.resolve("l4-width", l4_width);
    r.resolve("l5-width", l5_width);
    r.resolve("l6-width", l6_width);
    r.resolve("convonly-widths", convonly_widths);
    r.resolve("convonly-kernel", convonly_kernel);
    r.resolve("max-epochs", max_epochs);
    r.resolve("batch-size", batch_size);
    r.resolve("lr", learning_rate);
    r.resolve("lr-decay", lr_decay);
    r.resolve("val-fraction", val_fraction);
    r.resolve("patience", patience);
    r.resolve("min-delta", min_delta);
    r.resolve("sigma", sigma);
    r.resolve("precision", precision);
  }

  vtlm::NetworkSpec base_spec() const {
    vtlm::NetworkSpec spec;
    spec.architecture = vtlm::architecture_from_name(arch);
    spec.dilation_rates = dilations;
    spec.branch_width = branch_width;
    spec.l4_width = l4_width;
    spec.l5_width = l5_width;
    spec.l6_width = l6_width;
    spec.convonly_widths = convonly_widths;
    spec.convonly_kernel = convonly_kernel;
    return spec;
  }

  std::vector<std::vector<std::string>> landmark_groups() const {
    if (!group_sizes.empty()) return vtlm::group_landmarks(group_sizes);
    if (vtlm::architecture_from_name(arch) == vtlm::Architecture::kFlatNet)
      return vtlm::default_flatnet_groups();
    return vtlm::group_landmarks({vtlm::kLandmarkCount});
  }

  vtlm::TrainConfig train_config(std::uint64_t seed) const {
    vtlm::TrainConfig config;
    config.max_epochs = max_epochs;
    config.batch_size = batch_size;
    config.adam.learning_rate = learning_rate;
    config.lr_decay = lr_decay;
    config.validation_fraction = val_fraction;
    config.patience = patience;
    config.min_delta = min_delta;
    config.sigma = sigma;
    config.seed = seed;
    config.precision = vtlm::precision_from_name(precision);
    return config;
  }
};

json groups_to_json(const std::vector<std::vector<std::string>>& groups) {
  json out = json::array();
  for (const auto& g : groups) out.push_back(g);
  return out;
}

// ---------------------------------------------------------------- synth --

struct SynthCmd {
  CommonArgs common;
  int subjects = 9;
  int articulations = 62;
  int height = 256;
  int width = 256;
  double morph_amp = 1.0;
  double artic_amp = 1.0;
  std::uint64_t seed = 0;

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    r.resolve("subjects", subjects);
    r.resolve("articulations", articulations);
    r.resolve("height", height);
    r.resolve("width", width);
    r.resolve("morph-amp", morph_amp);
    r.resolve("artic-amp", artic_amp);
    resolve_seed(r, seed, false);
    r.resolve("out", common.out);
    const fs::path out = resolve_out("synth", common.out);
    r.record["out"] = out.string();

    vtlm::SynthConfig config;
    config.n_subjects = subjects;
    config.n_articulations = articulations;
    config.height = height;
    config.width = width;
    config.seed = seed;
    config.morph_amplitude = morph_amp;
    config.artic_amplitude = artic_amp;

    const vtlm::Corpus corpus = vtlm::generate_synthetic(config);
    const std::string manifest = vtlm::save_corpus(corpus, out.string());
    write_run_json(out, "synth", r.record);
    vtlm::emit_progress("synth: wrote " + std::to_string(corpus.samples.size()) +
                        " samples, manifest " + manifest);
  }
};

// -------------------------------------------------------------- augment --

struct AugmentCmd {
  CommonArgs common;
  std::string manifest;
  std::vector<int> ops = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed = 0;

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    r.resolve("manifest", manifest);
    if (manifest.empty()) throw vtlm::ConfigError("missing --manifest");
    r.resolve("augment-ops", ops);
    resolve_seed(r, seed, false);
    r.resolve("out", common.out);
    const fs::path out = resolve_out("augment", common.out);
    r.record["out"] = out.string();

    const vtlm::Corpus corpus = vtlm::load_corpus(manifest);
    const vtlm::Corpus augmented = vtlm::augment_corpus(corpus, seed, ops);
    const std::string path = vtlm::save_corpus(augmented, out.string());
    write_run_json(out, "augment", r.record);
    vtlm::emit_progress("augment: " + std::to_string(corpus.samples.size()) +
                        " -> " + std::to_string(augmented.samples.size()) +
                        " samples, manifest " + path);
  }
};

// ---------------------------------------------------------------- train --

template <typename T>
void train_to_dir(const vtlm::NetworkSpec& base,
                  const std::vector<std::vector<std::string>>& groups,
                  const vtlm::Corpus& corpus, const vtlm::TrainConfig& config,
                  const fs::path& out) {
  const vtlm::TrainedModel<T> model =
      vtlm::train_model<T>(base, groups, corpus, config);
  vtlm::save_model(model, out.string());
  vtlm::emit_progress("train: saved model with " +
                      std::to_string(model.parameter_count()) +
                      " parameters to " + out.string());
}

struct TrainCmd {
  CommonArgs common;
  TrainArgs train;
  std::string manifest;
  std::uint64_t seed = 0;
  int jobs = 1;

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    r.resolve("manifest", manifest);
    if (manifest.empty()) throw vtlm::ConfigError("missing --manifest");
    train.resolve(r);
    resolve_seed(r, seed, true);
    resolve_jobs(r, jobs);
    r.resolve("out", common.out);
    const fs::path out = resolve_out("train", common.out);
    r.record["out"] = out.string();

    const vtlm::NetworkSpec base = train.base_spec();
    const auto groups = train.landmark_groups();
    r.record["resolved-groups"] = groups_to_json(groups);
    const vtlm::TrainConfig config = train.train_config(seed);

    const vtlm::Corpus corpus = vtlm::load_corpus(manifest);
    if (config.precision == vtlm::Precision::kF64)
      train_to_dir<double>(base, groups, corpus, config, out);
    else
      train_to_dir<float>(base, groups, corpus, config, out);
    write_run_json(out, "train", r.record);
  }
};

// -------------------------------------------------------------- predict --

struct PredictCmd {
  CommonArgs common;
  std::string model_dir;
  std::string image_path;
  bool emit_heatmaps = false;
  int jobs = 1;

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    r.resolve("model", model_dir);
    if (model_dir.empty()) throw vtlm::ConfigError("missing --model");
    r.resolve("image", image_path);
    if (image_path.empty()) throw vtlm::ConfigError("missing --image");
    r.resolve("emit-heatmaps", emit_heatmaps);
    resolve_jobs(r, jobs);
    r.resolve("out", common.out);
    const fs::path out = resolve_out("predict", common.out);
    r.record["out"] = out.string();

    const vtlm::TrainedModel<float> model = vtlm::load_model<float>(model_dir);
    const vtlm::Image image = vtlm::read_pgm(image_path);
    const vtlm::Prediction<float> pred = vtlm::predict(model, image);
    const std::string sample_id = fs::path(image_path).stem().string();
    r.record["sample-id"] = sample_id;

    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
      throw vtlm::IoError("cannot create " + out.string() + ": " + ec.message());

    std::ofstream csv(out / "landmarks.csv");
    if (!csv) throw vtlm::IoError("cannot write " + (out / "landmarks.csv").string());
    csv << "landmark_id,x,y\n";
    for (int i = 0; i < vtlm::kLandmarkCount; ++i) {
      const vtlm::Point& p = pred.landmarks.points[static_cast<std::size_t>(i)];
      csv << vtlm::landmark_ids()[static_cast<std::size_t>(i)] << ","
          << fmt17(p.x) << "," << fmt17(p.y) << "\n";
      if (pred.degenerate[static_cast<std::size_t>(i)])
        vtlm::emit_progress("predict: warning: heat map for landmark " +
                            vtlm::landmark_ids()[static_cast<std::size_t>(i)] +
                            " is constant; defaulting to (0, 0)");
    }
    if (!csv.good())
      throw vtlm::IoError("failed writing " + (out / "landmarks.csv").string());
    csv.close();

    if (emit_heatmaps) {
      for (int i = 0; i < vtlm::kLandmarkCount; ++i) {
        const std::string name =
            sample_id + "_" + vtlm::landmark_ids()[static_cast<std::size_t>(i)] + ".pgm";
        vtlm::write_pgm16((out / name).string(), pred.stack.maps, i);
      }
    }
    write_run_json(out, "predict", r.record);
    vtlm::emit_progress("predict: wrote landmarks for " + sample_id + " to " +
                        out.string());
  }
};

// ----------------------------------------------------------------- eval --

struct EvalCmd {
  CommonArgs common;
  TrainArgs train;
  std::string manifest;
  std::string scheme = "cv";
  int k = 10;
  std::vector<int> ops = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed = 0;
  int jobs = 1;

  template <typename T>
  vtlm::EvaluationReport run_scheme(const vtlm::Corpus& corpus,
                                    const vtlm::NetworkSpec& base,
                                    const std::vector<std::vector<std::string>>& groups,
                                    const vtlm::TrainConfig& config) const {
    const vtlm::TrainerFn trainer =
        vtlm::make_model_trainer<T>(base, groups, config);
    if (scheme == "cv") return vtlm::run_cv(corpus, trainer, k, seed);
    const vtlm::AugmenterFn augmenter =
        vtlm::make_augmenter(vtlm::derive_seed(seed, 0xa09), ops);
    return vtlm::run_loso(corpus, augmenter, trainer, seed);
  }

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    r.resolve("manifest", manifest);
    if (manifest.empty()) throw vtlm::ConfigError("missing --manifest");
    r.resolve("scheme", scheme);
    if (scheme != "cv" && scheme != "loso")
      throw vtlm::ConfigError("unknown scheme '" + scheme +
                              "' (valid values: cv, loso)");
    r.resolve("k", k);
    r.resolve("augment-ops", ops);
    train.resolve(r);
    resolve_seed(r, seed, true);
    resolve_jobs(r, jobs);
    r.resolve("out", common.out);
    const fs::path out = resolve_out("eval", common.out);
    r.record["out"] = out.string();

    const vtlm::NetworkSpec base = train.base_spec();
    const auto groups = train.landmark_groups();
    r.record["resolved-groups"] = groups_to_json(groups);
    const vtlm::TrainConfig config = train.train_config(seed);

    const vtlm::Corpus corpus = vtlm::load_corpus(manifest);
    const vtlm::EvaluationReport report =
        config.precision == vtlm::Precision::kF64
            ? run_scheme<double>(corpus, base, groups, config)
            : run_scheme<float>(corpus, base, groups, config);

    vtlm::report_emit(report, out.string());
    write_run_json(out, "eval", r.record);

    std::ostringstream done;
    done << "eval: overall rmse " << report.overall_rmse_px() << " px ("
         << report.overall_rmse_cm() << " cm), outliers "
         << report.overall_outlier_pct() << "%, reports in " << out.string();
    vtlm::emit_progress(done.str());
  }
};

// ------------------------------------------------------------ gradcheck --

struct NamedCheck {
  std::string name;
  vtlm::GradCheckResult result;
};

// Random projection of the op output makes a smooth scalar objective whose
// analytic gradient is exactly the op's backward applied to the projection.
vtlm::Tensor<double> random_tensor(const std::vector<int>& shape, vtlm::Rng& rng,
                                   double lo, double hi) {
  vtlm::Tensor<double> t(shape);
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

vtlm::Tensor<double> projection_for(const std::vector<int>& shape,
                                    std::uint64_t seed) {
  vtlm::Rng rng(seed);
  vtlm::Tensor<double> proj(shape);
  double scale = 1.0 / static_cast<double>(proj.size());
  for (auto& v : proj.data) v = rng.uniform(-1.0, 1.0) * scale;
  return proj;
}

double dot(const vtlm::Tensor<double>& a, const vtlm::Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

vtlm::GradCheckResult conv_check(int kernel, int dilation, int n, int h, int w,
                                 int cin, int cout, std::uint64_t seed,
                                 double step) {
  vtlm::Rng rng(vtlm::derive_seed(seed, 0xc0,
                                  static_cast<std::uint64_t>(kernel * 100 + dilation)));
  vtlm::Tensor<double> x = random_tensor({n, h, w, cin}, rng, -1.0, 1.0);
  vtlm::Tensor<double> wt =
      random_tensor({kernel, kernel, cin, cout}, rng, -0.5, 0.5);
  vtlm::Tensor<double> b = random_tensor({cout}, rng, -0.5, 0.5);
  vtlm::ConvSpec spec;
  spec.kernel_h = spec.kernel_w = kernel;
  spec.dilation = dilation;
  spec.in_channels = cin;
  spec.out_channels = cout;

  const vtlm::Tensor<double> proj =
      projection_for({n, h, w, cout}, vtlm::derive_seed(seed, 0x9d0));
  const vtlm::ConvGrads<double> grads =
      vtlm::conv2d_backward(proj, x, wt, spec, true);
  x.ensure_grad();
  wt.ensure_grad();
  b.ensure_grad();
  x.grad = grads.input.data;
  wt.grad = grads.weights.data;
  b.grad = grads.bias.data;

  const auto loss = [&] { return dot(vtlm::conv2d(x, wt, b, spec), proj); };
  return vtlm::check_gradients({&x, &wt, &b}, loss, step);
}

vtlm::GradCheckResult relu_check(std::uint64_t seed, double step) {
  vtlm::Rng rng(vtlm::derive_seed(seed, 0x3e1));
  vtlm::Tensor<double> x = random_tensor({2, 5, 6, 3}, rng, -1.0, 1.0);
  // keep every element off the kink so the finite difference is two-sided
  for (auto& v : x.data) v += v >= 0.0 ? 0.1 : -0.1;
  const vtlm::Tensor<double> proj =
      projection_for(x.shape, vtlm::derive_seed(seed, 0x3e2));
  x.ensure_grad();
  x.grad = vtlm::relu_backward(proj, x).data;
  const auto loss = [&] { return dot(vtlm::relu(x), proj); };
  return vtlm::check_gradients({&x}, loss, step);
}

vtlm::GradCheckResult tanh_check(std::uint64_t seed, double step) {
  vtlm::Rng rng(vtlm::derive_seed(seed, 0x7a1));
  vtlm::Tensor<double> x = random_tensor({2, 5, 6, 3}, rng, -2.0, 2.0);
  const vtlm::Tensor<double> proj =
      projection_for(x.shape, vtlm::derive_seed(seed, 0x7a2));
  x.ensure_grad();
  x.grad = vtlm::tanh_backward(proj, vtlm::tanh_op(x)).data;
  const auto loss = [&] { return dot(vtlm::tanh_op(x), proj); };
  return vtlm::check_gradients({&x}, loss, step);
}

vtlm::GradCheckResult mae_check(std::uint64_t seed, double step) {
  vtlm::Rng rng(vtlm::derive_seed(seed, 0x5a1));
  vtlm::Tensor<double> target = random_tensor({4, 3, 5, 2}, rng, -1.0, 1.0);
  vtlm::Tensor<double> pred(target.shape);
  // keep |pred - target| well above the step so no tie flips sign
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double gap = rng.uniform(0.05, 0.5);
    pred.data[i] = target.data[i] + (rng.uniform() < 0.5 ? -gap : gap);
  }
  pred.ensure_grad();
  pred.grad = vtlm::mae_loss_backward(pred, target).data;
  const auto loss = [&] { return vtlm::mae_loss(pred, target); };
  return vtlm::check_gradients({&pred}, loss, step);
}

vtlm::GradCheckResult network_check(const vtlm::NetworkSpec& spec, int h, int w,
                                    std::uint64_t seed, double step) {
  vtlm::Network<double> net(spec, vtlm::derive_seed(seed, 0x6e7));
  vtlm::Rng rng(vtlm::derive_seed(seed, 0x6e8));
  const vtlm::Tensor<double> input =
      random_tensor({1, h, w, spec.input_channels}, rng, -1.0, 1.0);
  const vtlm::Tensor<double> proj = projection_for(
      {1, h, w, static_cast<int>(spec.group.size())},
      vtlm::derive_seed(seed, 0x6e9));

  typename vtlm::Network<double>::Trace trace;
  net.forward(input, &trace);
  net.zero_grads();
  net.backward(trace, proj);

  const auto loss = [&] { return dot(net.forward(input), proj); };
  return vtlm::check_gradients(net.parameters(), loss, step);
}

struct GradcheckCmd {
  CommonArgs common;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double threshold = 1e-4;
  int jobs = 1;

  void run(CLI::App* cmd) {
    Resolver r = common.resolver(cmd);
    resolve_seed(r, seed, false);
    r.resolve("step", step);
    r.resolve("threshold", threshold);
    resolve_jobs(r, jobs);
    r.resolve("out", common.out);
    if (!(step > 0.0)) throw vtlm::ConfigError("--step must be positive");
    if (!(threshold > 0.0)) throw vtlm::ConfigError("--threshold must be positive");

    std::vector<NamedCheck> checks;
    checks.push_back({"conv-3x3-d1", conv_check(3, 1, 2, 6, 7, 3, 4, seed, step)});
    checks.push_back({"conv-5x5-d2", conv_check(5, 2, 1, 9, 8, 2, 3, seed, step)});
    checks.push_back({"conv-9x9-d4", conv_check(9, 4, 1, 10, 11, 2, 2, seed, step)});
    checks.push_back({"relu", relu_check(seed, step)});
    checks.push_back({"tanh", tanh_check(seed, step)});
    checks.push_back({"mae", mae_check(seed, step)});

    vtlm::NetworkSpec flat;
    flat.group = vtlm::default_flatnet_groups().front();
    flat.branch_width = 2;
    flat.l4_width = 4;
    flat.l5_width = 4;
    flat.l6_width = 4;
    checks.push_back({"flatnet-16x16", network_check(flat, 16, 16, seed, step)});

    vtlm::NetworkSpec conv;
    conv.architecture = vtlm::Architecture::kConvOnly;
    conv.group = vtlm::default_flatnet_groups().front();
    conv.convonly_widths = {2, 3, 2, 3, 2};
    conv.convonly_kernel = 3;
    checks.push_back({"convonly-12x12", network_check(conv, 12, 12, seed, step)});

    double overall = 0.0;
    json results = json::array();
    for (const NamedCheck& c : checks) {
      overall = std::max(overall, c.result.max_rel_err);
      std::ostringstream line;
      line << c.name << " checked " << c.result.checked << " max_rel_err "
           << fmt17(c.result.max_rel_err);
      std::cout << line.str() << "\n";
      results.push_back({{"name", c.name},
                         {"checked", c.result.checked},
                         {"max_rel_err", c.result.max_rel_err}});
    }
    const bool pass = overall < threshold;
    std::cout << "overall max_rel_err " << fmt17(overall) << " threshold "
              << fmt17(threshold) << " " << (pass ? "PASS" : "FAIL") << "\n";

    // artifacts are optional here: written when a destination is resolvable
    if (!common.out.empty() || output_root_set()) {
      const fs::path out = resolve_out("gradcheck", common.out);
      r.record["out"] = out.string();
      std::error_code ec;
      fs::create_directories(out, ec);
      if (ec)
        throw vtlm::IoError("cannot create " + out.string() + ": " + ec.message());
      json summary;
      summary["checks"] = results;
      summary["overall_max_rel_err"] = overall;
      summary["threshold"] = threshold;
      summary["pass"] = pass;
      write_json_file(out / "gradcheck.json", summary);
      write_run_json(out, "gradcheck", r.record);
    }
    if (!pass)
      throw vtlm::NumericError("gradient check failed: max relative error " +
                               fmt17(overall) + " exceeds " + fmt17(threshold));
  }
};

}  // namespace

int main(int argc, char** argv) {
  vtlm::progress_sink() = [](const std::string& line) {
    std::cerr << line << std::endl;
  };

  CLI::App app{
      "vocal-tract landmark localization: corpus synthesis, augmentation, "
      "heat-map network training, prediction, and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vtlm 0.1.0");
  app.footer("Environment:\n  " + std::string(kOutputRootVar) +
             "  default root for output directories\n\n"
             "Exit codes: 0 success, 2 usage, 3 I/O failure, 4 numerical "
             "failure.");

  SynthCmd synth;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "generate a synthetic corpus with exact landmark ground truth");
  synth_cmd->add_option("--subjects", synth.subjects, "number of subjects")
      ->capture_default_str();
  synth_cmd
      ->add_option("--articulations", synth.articulations,
                   "articulations per subject")
      ->capture_default_str();
  synth_cmd->add_option("--height", synth.height, "image height in pixels")
      ->capture_default_str();
  synth_cmd->add_option("--width", synth.width, "image width in pixels")
      ->capture_default_str();
  synth_cmd
      ->add_option("--morph-amp", synth.morph_amp,
                   "inter-subject shape variation scale")
      ->capture_default_str();
  synth_cmd
      ->add_option("--artic-amp", synth.artic_amp,
                   "intra-subject pose variation scale")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")
      ->capture_default_str();
  synth.common.add(synth_cmd);
  synth_cmd->callback([&] { synth.run(synth_cmd); });

  AugmentCmd augment;
  CLI::App* augment_cmd = app.add_subcommand(
      "augment", "expand an original corpus with the fixed op table");
  augment_cmd->add_option("--manifest", augment.manifest,
                          "manifest.json of the original corpus");
  augment_cmd
      ->add_option("--augment-ops", augment.ops,
                   "op ids to apply, comma separated (default all ten)")
      ->delimiter(',');
  augment_cmd->add_option("--seed", augment.seed, "noise seed")
      ->capture_default_str();
  augment.common.add(augment_cmd);
  augment_cmd->callback([&] { augment.run(augment_cmd); });

  TrainCmd train;
  CLI::App* train_cmd = app.add_subcommand(
      "train", "train one network per landmark group and save the model");
  train_cmd->add_option("--manifest", train.manifest,
                        "manifest.json of the training corpus");
  train.train.add(train_cmd);
  train_cmd->add_option("--seed", train.seed,
                        "training seed (required here or in the config file)");
  train_cmd->add_option("--jobs", train.jobs, "worker threads for tensor ops")
      ->capture_default_str();
  train.common.add(train_cmd);
  train_cmd->callback([&] { train.run(train_cmd); });

  PredictCmd predict;
  CLI::App* predict_cmd = app.add_subcommand(
      "predict", "locate the 21 landmarks on one image with a saved model");
  predict_cmd->add_option("--model", predict.model_dir, "model directory");
  predict_cmd->add_option("--image", predict.image_path, "input PGM image");
  predict_cmd->add_flag("--emit-heatmaps", predict.emit_heatmaps,
                        "also write one 16-bit PGM heat map per landmark");
  predict_cmd->add_option("--jobs", predict.jobs, "worker threads for tensor ops")
      ->capture_default_str();
  predict.common.add(predict_cmd);
  predict_cmd->callback([&] { predict.run(predict_cmd); });

  EvalCmd eval;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "run a cross-validation scheme and emit the report files");
  eval_cmd->add_option("--manifest", eval.manifest,
                       "manifest.json of the corpus to evaluate on");
  eval_cmd->add_option("--scheme", eval.scheme, "evaluation scheme: cv | loso")
      ->capture_default_str();
  eval_cmd->add_option("--k", eval.k, "fold count for the cv scheme")
      ->capture_default_str();
  eval_cmd
      ->add_option("--augment-ops", eval.ops,
                   "op ids for per-round training augmentation (loso)")
      ->delimiter(',');
  eval.train.add(eval_cmd);
  eval_cmd->add_option("--seed", eval.seed,
                       "evaluation seed (required here or in the config file)");
  eval_cmd->add_option("--jobs", eval.jobs, "worker threads for tensor ops")
      ->capture_default_str();
  eval.common.add(eval_cmd);
  eval_cmd->callback([&] { eval.run(eval_cmd); });

  GradcheckCmd gradcheck;
  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck",
      "verify analytic gradients against finite differences and print the "
      "max relative errors");
  gradcheck_cmd->add_option("--seed", gradcheck.seed, "case seed")
      ->capture_default_str();
  gradcheck_cmd->add_option("--step", gradcheck.step, "finite-difference step")
      ->capture_default_str();
  gradcheck_cmd
      ->add_option("--threshold", gradcheck.threshold,
                   "max relative error accepted as a pass")
      ->capture_default_str();
  gradcheck_cmd
      ->add_option("--jobs", gradcheck.jobs, "worker threads for tensor ops")
      ->capture_default_str();
  gradcheck.common.add(gradcheck_cmd);
  gradcheck_cmd->callback([&] { gradcheck.run(gradcheck_cmd); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const vtlm::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const vtlm::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const vtlm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
