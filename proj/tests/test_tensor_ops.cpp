// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "vtlm/adam.hpp"
#include "vtlm/gradcheck.hpp"
#include "vtlm/ops.hpp"
#include "vtlm/params_io.hpp"
#include "vtlm/random.hpp"
#include "vtlm/tensor.hpp"

using vtlm::ConvSpec;
using vtlm::Rng;
using vtlm::Tensor;

namespace {

// Reference dilated convolution, written as plain nested loops with no
// shared code paths with the library implementation.
Tensor<double> conv_reference(const Tensor<double>& in, const Tensor<double>& w,
                              const Tensor<double>& b, const ConvSpec& spec) {
  const int n = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const int ph = (spec.kernel_h - 1) * spec.dilation / 2;
  const int pw = (spec.kernel_w - 1) * spec.dilation / 2;
  Tensor<double> out({n, h, wd, spec.out_channels});
  for (int s = 0; s < n; ++s) {
    for (int oy = 0; oy < h; ++oy) {
      for (int ox = 0; ox < wd; ++ox) {
        for (int co = 0; co < spec.out_channels; ++co) {
          double acc = b.data[static_cast<std::size_t>(co)];
          for (int ki = 0; ki < spec.kernel_h; ++ki) {
            for (int kj = 0; kj < spec.kernel_w; ++kj) {
              const int iy = oy - ph + ki * spec.dilation;
              const int ix = ox - pw + kj * spec.dilation;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              for (int ci = 0; ci < spec.in_channels; ++ci) {
                acc += in.at4(s, iy, ix, ci) * w.at4(ki, kj, ci, co);
              }
            }
          }
          out.at4(s, oy, ox, co) = acc;
        }
      }
    }
  }
  return out;
}

void fill_uniform(Tensor<double>& t, Rng& rng, double lo, double hi) {
  for (auto& v : t.data) v = rng.uniform(lo, hi);
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("tensor layout is row-major NHWC") {
  Tensor<double> t({2, 3, 4, 5});
  REQUIRE(t.size() == 120);
  REQUIRE(t.offset4(0, 0, 0, 0) == 0);
  REQUIRE(t.offset4(0, 0, 0, 1) == 1);
  REQUIRE(t.offset4(0, 0, 1, 0) == 5);
  REQUIRE(t.offset4(0, 1, 0, 0) == 20);
  REQUIRE(t.offset4(1, 0, 0, 0) == 60);
  REQUIRE(t.offset4(1, 2, 3, 4) == 119);
}

TEST_CASE("tensor construction validates shape") {
  REQUIRE_THROWS_AS(Tensor<float>({2, 0, 3}), vtlm::ShapeError);
  REQUIRE_THROWS_AS(Tensor<float>({-1}), vtlm::ShapeError);
  REQUIRE_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1.f, 2.f, 3.f}),
                    vtlm::ShapeError);
}

TEST_CASE("tensor cast and finiteness") {
  Tensor<float> t({2, 2}, std::vector<float>{1.f, 2.f, 3.f, 4.f});
  Tensor<double> d = t.cast<double>();
  REQUIRE(d.data == std::vector<double>{1.0, 2.0, 3.0, 4.0});
  REQUIRE(t.all_finite());
  t.data[2] = std::numeric_limits<float>::quiet_NaN();
  REQUIRE_FALSE(t.all_finite());
}

TEST_CASE("convolution matches hand-computed 3x3 case") {
  // 1x3x3x1 input 1..9, 3x3 kernel of ones, zero bias: each output is the
  // sum of the in-frame neighborhood.
  Tensor<double> in({1, 3, 3, 1},
                    std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> w({3, 3, 1, 1}, 1.0);
  Tensor<double> b({1});
  ConvSpec spec{3, 3, 1, 1, 1};
  Tensor<double> out = vtlm::conv2d(in, w, b, spec);
  const std::vector<double> expected{12, 21, 16, 27, 45, 33, 24, 39, 28};
  for (std::size_t i = 0; i < expected.size(); ++i)
    REQUIRE(out.data[i] == Catch::Approx(expected[i]).margin(1e-12));
}

TEST_CASE("1x1 identity kernel preserves the input") {
  Rng rng(31);
  Tensor<double> in({2, 4, 5, 3});
  fill_uniform(in, rng, -2.0, 2.0);
  Tensor<double> w({1, 1, 3, 3});
  for (int c = 0; c < 3; ++c) w.at4(0, 0, c, c) = 1.0;
  Tensor<double> b({3});
  Tensor<double> out = vtlm::conv2d(in, w, b, ConvSpec{1, 1, 1, 3, 3});
  REQUIRE(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("convolution agrees with the loop reference across shapes") {
  Rng rng(2026);
  const int kernels[] = {1, 3, 5, 9};
  for (int c = 0; c < 60; ++c) {
    const int n = 1 + static_cast<int>(rng.uniform_index(3));
    const int h = 3 + static_cast<int>(rng.uniform_index(10));
    const int wd = 3 + static_cast<int>(rng.uniform_index(10));
    const int cin = 1 + static_cast<int>(rng.uniform_index(4));
    const int cout = 1 + static_cast<int>(rng.uniform_index(4));
    ConvSpec spec;
    spec.kernel_h = kernels[rng.uniform_index(4)];
    spec.kernel_w = kernels[rng.uniform_index(4)];
    spec.dilation = 1 + static_cast<int>(rng.uniform_index(5));
    spec.in_channels = cin;
    spec.out_channels = cout;

    Tensor<double> in({n, h, wd, cin});
    Tensor<double> w({spec.kernel_h, spec.kernel_w, cin, cout});
    Tensor<double> b({cout});
    fill_uniform(in, rng, -1.0, 1.0);
    fill_uniform(w, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);

    INFO("case " << c << " kernel " << spec.kernel_h << "x" << spec.kernel_w
                 << " dilation " << spec.dilation << " input "
                 << vtlm::shape_to_string(in.shape));
    Tensor<double> got = vtlm::conv2d(in, w, b, spec);
    Tensor<double> want = conv_reference(in, w, b, spec);
    REQUIRE(max_abs_diff(got, want) < 1e-10);
  }
}

TEST_CASE("float convolution tracks the double reference") {
  Rng rng(404);
  Tensor<double> in({2, 8, 8, 3});
  Tensor<double> w({5, 5, 3, 4});
  Tensor<double> b({4});
  fill_uniform(in, rng, -1.0, 1.0);
  fill_uniform(w, rng, -1.0, 1.0);
  fill_uniform(b, rng, -1.0, 1.0);
  ConvSpec spec{5, 5, 2, 3, 4};
  Tensor<double> want = conv_reference(in, w, b, spec);
  Tensor<float> got = vtlm::conv2d(in.cast<float>(), w.cast<float>(),
                                   b.cast<float>(), spec);
  double m = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(got.data[i]) - want.data[i]));
  REQUIRE(m < 1e-3);
}

TEST_CASE("convolution result is independent of the worker count") {
  Rng rng(88);
  Tensor<double> in({4, 9, 7, 3});
  Tensor<double> w({3, 3, 3, 5});
  Tensor<double> b({5});
  fill_uniform(in, rng, -1.0, 1.0);
  fill_uniform(w, rng, -1.0, 1.0);
  fill_uniform(b, rng, -1.0, 1.0);
  ConvSpec spec{3, 3, 2, 3, 5};
  Tensor<double> proj({4, 9, 7, 5});
  fill_uniform(proj, rng, -1.0, 1.0);

  vtlm::tensor_jobs() = 1;
  Tensor<double> out1 = vtlm::conv2d(in, w, b, spec);
  auto g1 = vtlm::conv2d_backward(proj, in, w, spec, true);
  vtlm::tensor_jobs() = 3;
  Tensor<double> out3 = vtlm::conv2d(in, w, b, spec);
  auto g3 = vtlm::conv2d_backward(proj, in, w, spec, true);
  vtlm::tensor_jobs() = 1;

  REQUIRE(out1.data == out3.data);
  REQUIRE(g1.weights.data == g3.weights.data);
  REQUIRE(g1.bias.data == g3.bias.data);
  REQUIRE(g1.input.data == g3.input.data);
}

TEST_CASE("convolution rejects invalid configurations") {
  Tensor<double> in({1, 4, 4, 2});
  Tensor<double> w({3, 3, 2, 1});
  Tensor<double> b({1});
  // even kernel with odd dilation has no symmetric same-padding
  REQUIRE_THROWS_AS(vtlm::conv2d(in, Tensor<double>({2, 2, 2, 1}), b,
                                 ConvSpec{2, 2, 1, 2, 1}),
                    vtlm::ConfigError);
  // channel mismatch between input and spec
  REQUIRE_THROWS_AS(vtlm::conv2d(in, w, b, ConvSpec{3, 3, 1, 3, 1}),
                    vtlm::ShapeError);
  // weight tensor shape disagrees with the spec
  REQUIRE_THROWS_AS(vtlm::conv2d(in, Tensor<double>({3, 3, 2, 2}), b,
                                 ConvSpec{3, 3, 1, 2, 1}),
                    vtlm::ShapeError);
  // bias length disagrees
  REQUIRE_THROWS_AS(vtlm::conv2d(in, w, Tensor<double>({2}),
                                 ConvSpec{3, 3, 1, 2, 1}),
                    vtlm::ShapeError);
  // non-positive fields
  ConvSpec bad{3, 3, 0, 2, 1};
  REQUIRE_THROWS_AS(bad.validate(4, 4), vtlm::ConfigError);
}

TEST_CASE("activation and loss forwards") {
  Tensor<double> x({1, 1, 2, 2}, std::vector<double>{-1.5, 0.0, 0.5, 2.0});
  Tensor<double> r = vtlm::relu(x);
  REQUIRE(r.data == std::vector<double>{0.0, 0.0, 0.5, 2.0});
  Tensor<double> t = vtlm::tanh_op(x);
  REQUIRE(t.data[0] == Catch::Approx(std::tanh(-1.5)).margin(1e-15));
  REQUIRE(t.data[1] == 0.0);
  REQUIRE(t.data[3] == Catch::Approx(std::tanh(2.0)).margin(1e-15));

  Tensor<double> pred({3}, std::vector<double>{1.0, 2.0, 3.0});
  Tensor<double> target({3}, std::vector<double>{2.0, 2.0, 5.0});
  REQUIRE(vtlm::mae_loss(pred, target) == Catch::Approx(1.0).margin(1e-15));
  Tensor<double> g = vtlm::mae_loss_backward(pred, target);
  REQUIRE(g.data[0] == Catch::Approx(-1.0 / 3.0).margin(1e-15));
  REQUIRE(g.data[1] == 0.0);
  REQUIRE(g.data[2] == Catch::Approx(-1.0 / 3.0).margin(1e-15));
}

TEST_CASE("channel concatenation interleaves per pixel and splits back") {
  Rng rng(55);
  Tensor<double> a({1, 2, 2, 2});
  Tensor<double> b({1, 2, 2, 3});
  fill_uniform(a, rng, -1.0, 1.0);
  fill_uniform(b, rng, -1.0, 1.0);
  Tensor<double> cat = vtlm::concat_channels<double>({&a, &b});
  REQUIRE(cat.shape == std::vector<int>{1, 2, 2, 5});
  for (int h = 0; h < 2; ++h) {
    for (int w = 0; w < 2; ++w) {
      for (int c = 0; c < 2; ++c) REQUIRE(cat.at4(0, h, w, c) == a.at4(0, h, w, c));
      for (int c = 0; c < 3; ++c)
        REQUIRE(cat.at4(0, h, w, 2 + c) == b.at4(0, h, w, c));
    }
  }
  auto parts = vtlm::concat_channels_backward(cat, {2, 3});
  REQUIRE(parts[0].data == a.data);
  REQUIRE(parts[1].data == b.data);

  Tensor<double> mismatched({2, 2, 2, 1});
  REQUIRE_THROWS_AS(vtlm::concat_channels<double>({&a, &mismatched}),
                    vtlm::ShapeError);
}

TEST_CASE("convolution gradients pass central-difference checks") {
  Rng rng(7171);
  Tensor<double> in({2, 5, 4, 2});
  Tensor<double> w({3, 3, 2, 3});
  Tensor<double> b({3});
  fill_uniform(in, rng, -1.0, 1.0);
  fill_uniform(w, rng, -0.5, 0.5);
  fill_uniform(b, rng, -0.5, 0.5);
  ConvSpec spec{3, 3, 2, 2, 3};
  Tensor<double> proj({2, 5, 4, 3});
  fill_uniform(proj, rng, -1.0, 1.0);

  auto loss = [&]() {
    Tensor<double> out = vtlm::conv2d(in, w, b, spec);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.data[i] * proj.data[i];
    return s;
  };
  auto grads = vtlm::conv2d_backward(proj, in, w, spec, true);
  in.grad = grads.input.data;
  w.grad = grads.weights.data;
  b.grad = grads.bias.data;
  auto result = vtlm::check_gradients({&in, &w, &b}, loss);
  INFO("worst analytic " << result.worst_analytic << " numeric "
                         << result.worst_numeric);
  REQUIRE(result.checked == in.size() + w.size() + b.size());
  REQUIRE(result.max_rel_err < 1e-4);
}

TEST_CASE("activation and loss gradients pass central-difference checks") {
  Rng rng(909);

  SECTION("relu away from the kink") {
    Tensor<double> x({1, 3, 3, 2});
    for (auto& v : x.data) {
      v = rng.uniform(0.2, 1.5);
      if (rng.uniform() < 0.5) v = -v;
    }
    Tensor<double> proj(x.shape);
    fill_uniform(proj, rng, -1.0, 1.0);
    auto loss = [&]() {
      Tensor<double> y = vtlm::relu(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * proj.data[i];
      return s;
    };
    x.grad = vtlm::relu_backward(proj, x).data;
    REQUIRE(vtlm::check_gradients({&x}, loss).max_rel_err < 1e-4);
  }

  SECTION("tanh") {
    Tensor<double> x({1, 3, 3, 2});
    fill_uniform(x, rng, -2.0, 2.0);
    Tensor<double> proj(x.shape);
    fill_uniform(proj, rng, -1.0, 1.0);
    auto loss = [&]() {
      Tensor<double> y = vtlm::tanh_op(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * proj.data[i];
      return s;
    };
    x.grad = vtlm::tanh_backward(proj, vtlm::tanh_op(x)).data;
    REQUIRE(vtlm::check_gradients({&x}, loss).max_rel_err < 1e-4);
  }

  SECTION("mean absolute error away from ties") {
    Tensor<double> pred({2, 2, 2, 2});
    Tensor<double> target(pred.shape);
    fill_uniform(pred, rng, -1.0, 1.0);
    for (std::size_t i = 0; i < target.size(); ++i)
      target.data[i] = pred.data[i] + (rng.uniform() < 0.5 ? 0.4 : -0.4) +
                       rng.uniform(-0.05, 0.05);
    auto loss = [&]() { return vtlm::mae_loss(pred, target); };
    pred.grad = vtlm::mae_loss_backward(pred, target).data;
    REQUIRE(vtlm::check_gradients({&pred}, loss).max_rel_err < 1e-4);
  }
}

TEST_CASE("composed conv-relu-conv-tanh stack passes gradient checks") {
  ConvSpec spec1{3, 3, 2, 2, 3};
  ConvSpec spec2{1, 1, 1, 3, 2};
  Tensor<double> in({2, 5, 6, 2});
  Tensor<double> w1({3, 3, 2, 3}), b1({3});
  Tensor<double> w2({1, 1, 3, 2}), b2({2});
  Tensor<double> target({2, 5, 6, 2});

  // pick a seed whose intermediate activations stay clear of the relu kink
  // and of loss ties, so finite differences are trustworthy
  bool found = false;
  for (std::uint64_t seed = 0; seed < 100 && !found; ++seed) {
    Rng rng(vtlm::derive_seed(314, seed));
    fill_uniform(in, rng, -1.0, 1.0);
    fill_uniform(w1, rng, -0.5, 0.5);
    fill_uniform(b1, rng, -0.3, 0.3);
    fill_uniform(w2, rng, -0.5, 0.5);
    fill_uniform(b2, rng, -0.3, 0.3);
    fill_uniform(target, rng, -0.9, 0.9);
    Tensor<double> c1 = vtlm::conv2d(in, w1, b1, spec1);
    Tensor<double> y = vtlm::tanh_op(
        vtlm::conv2d(vtlm::relu(c1), w2, b2, spec2));
    bool ok = true;
    for (double v : c1.data)
      if (std::abs(v) < 1e-3) ok = false;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (std::abs(y.data[i] - target.data[i]) < 1e-3) ok = false;
    found = ok;
  }
  REQUIRE(found);

  auto loss = [&]() {
    Tensor<double> h1 = vtlm::relu(vtlm::conv2d(in, w1, b1, spec1));
    Tensor<double> y = vtlm::tanh_op(vtlm::conv2d(h1, w2, b2, spec2));
    return vtlm::mae_loss(y, target);
  };

  Tensor<double> c1 = vtlm::conv2d(in, w1, b1, spec1);
  Tensor<double> h1 = vtlm::relu(c1);
  Tensor<double> y = vtlm::tanh_op(vtlm::conv2d(h1, w2, b2, spec2));
  Tensor<double> up = vtlm::tanh_backward(vtlm::mae_loss_backward(y, target), y);
  auto g2 = vtlm::conv2d_backward(up, h1, w2, spec2, true);
  Tensor<double> up1 = vtlm::relu_backward(g2.input, c1);
  auto g1 = vtlm::conv2d_backward(up1, in, w1, spec1, true);

  in.grad = g1.input.data;
  w1.grad = g1.weights.data;
  b1.grad = g1.bias.data;
  w2.grad = g2.weights.data;
  b2.grad = g2.bias.data;
  auto result = vtlm::check_gradients({&in, &w1, &b1, &w2, &b2}, loss);
  INFO("worst analytic " << result.worst_analytic << " numeric "
                         << result.worst_numeric);
  REQUIRE(result.max_rel_err < 1e-4);
}

TEST_CASE("Adam first step matches the closed form") {
  // m-hat and v-hat both equal the raw gradient on step one, so the update
  // is lr * g / (|g| + eps); frozen for lr=0.1, g=1.
  Tensor<double> w({1}, std::vector<double>{1.0});
  w.grad = {1.0};
  vtlm::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  vtlm::Adam<double> opt(cfg);
  opt.step({&w});
  REQUIRE(w.data[0] == Catch::Approx(0.90000000099999999).epsilon(1e-12));
  REQUIRE(opt.step_count() == 1);
}

TEST_CASE("Adam with constant gradient keeps unit-scale steps") {
  Tensor<double> w({1}, std::vector<double>{1.0});
  vtlm::AdamConfig cfg;
  cfg.learning_rate = 0.1;
  vtlm::Adam<double> opt(cfg);
  for (int i = 0; i < 5; ++i) {
    w.grad = {1.0};
    opt.step({&w});
  }
  REQUIRE(w.data[0] == Catch::Approx(0.5).margin(1e-6));
}

TEST_CASE("Adam default configuration") {
  vtlm::Adam<float> opt;
  REQUIRE(opt.config().learning_rate == Catch::Approx(1e-4));
  REQUIRE(opt.config().beta1 == Catch::Approx(0.9));
  REQUIRE(opt.config().beta2 == Catch::Approx(0.999));
  REQUIRE(opt.config().epsilon == Catch::Approx(1e-8));
  vtlm::AdamConfig bad;
  bad.beta1 = 1.0;
  REQUIRE_THROWS_AS(vtlm::Adam<float>(bad), vtlm::ConfigError);
}

TEST_CASE("Adam rejects parameters without gradients") {
  Tensor<double> w({2});
  vtlm::Adam<double> opt;
  REQUIRE_THROWS_AS(opt.step({&w}), vtlm::ConfigError);
}

TEST_CASE("parameter containers round trip bit-exactly") {
  Rng rng(515);
  vtlm::NamedArrays arrays;
  Tensor<float> w({3, 3, 2, 4});
  Tensor<float> b({4});
  for (auto& v : w.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : b.data) v = static_cast<float>(rng.normal(0.0, 100.0));
  b.data[0] = 0.0f;
  b.data[1] = -0.0f;
  b.data[2] = 1e-38f;
  arrays.emplace_back("conv1.weights", w);
  arrays.emplace_back("conv1.bias", b);

  const std::string path = "params_roundtrip_test.vtlm";
  vtlm::save_params(path, arrays);
  auto back = vtlm::load_params(path);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0].first == "conv1.weights");
  REQUIRE(back[0].second.shape == w.shape);
  for (std::size_t i = 0; i < w.size(); ++i) {
    REQUIRE(std::memcmp(&back[0].second.data[i], &w.data[i], 4) == 0);
  }
  REQUIRE(back[1].second.shape == b.shape);
  for (std::size_t i = 0; i < b.size(); ++i) {
    REQUIRE(std::memcmp(&back[1].second.data[i], &b.data[i], 4) == 0);
  }
  std::remove(path.c_str());

  // refuse foreign or truncated files
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  REQUIRE_THROWS_AS(vtlm::load_params(path), vtlm::IoError);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(vtlm::load_params(path), vtlm::IoError);
}
