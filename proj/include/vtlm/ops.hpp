// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

// Number of worker threads tensor ops may use internally. Results are
// bitwise independent of this value: parallel sections write disjoint
// output ranges and all reductions run in fixed index order.
inline int& tensor_jobs() {
  static int jobs = 1;
  return jobs;
}

// 2-d convolution descriptor. Output spatial size always equals input
// spatial size ("same" zero padding) and the stride is fixed at 1; the
// architectures built on top of this engine never resample.
struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int dilation = 1;
  int in_channels = 1;
  int out_channels = 1;

  int pad_h() const { return (kernel_h - 1) * dilation / 2; }
  int pad_w() const { return (kernel_w - 1) * dilation / 2; }
  int extent_h() const { return (kernel_h - 1) * dilation + 1; }
  int extent_w() const { return (kernel_w - 1) * dilation + 1; }

  void validate(int in_h, int in_w) const {
    if (kernel_h <= 0 || kernel_w <= 0 || dilation <= 0 || in_channels <= 0 ||
        out_channels <= 0) {
      throw ConfigError("conv spec fields must be positive");
    }
    if ((kernel_h - 1) * dilation % 2 != 0 ||
        (kernel_w - 1) * dilation % 2 != 0) {
      throw ConfigError(
          "conv spec does not admit symmetric same-padding: kernel " +
          std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
          " dilation " + std::to_string(dilation));
    }
    if (extent_h() > in_h + 2 * pad_h() || extent_w() > in_w + 2 * pad_w()) {
      throw ConfigError("dilated kernel extent " + std::to_string(extent_h()) +
                        "x" + std::to_string(extent_w()) +
                        " exceeds padded input " + std::to_string(in_h) + "x" +
                        std::to_string(in_w));
    }
  }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMat<T>>;

// Gathers the receptive field of every output pixel of one sample into a
// (H*W) x (kh*kw*Cin) matrix; out-of-frame taps are zero.
template <typename T>
void im2col(const T* in, int h, int w, int cin, const ConvSpec& spec, T* col) {
  const int kh = spec.kernel_h, kw = spec.kernel_w, d = spec.dilation;
  const int ph = spec.pad_h(), pw = spec.pad_w();
  const std::size_t k = static_cast<std::size_t>(kh) * kw * cin;
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      T* row = col + (static_cast<std::size_t>(oy) * w + ox) * k;
      for (int ki = 0; ki < kh; ++ki) {
        const int iy = oy - ph + ki * d;
        if (iy < 0 || iy >= h) {
          std::fill(row, row + static_cast<std::size_t>(kw) * cin, T(0));
          row += static_cast<std::size_t>(kw) * cin;
          continue;
        }
        for (int kj = 0; kj < kw; ++kj) {
          const int ix = ox - pw + kj * d;
          if (ix < 0 || ix >= w) {
            std::fill(row, row + cin, T(0));
          } else {
            const T* src = in + (static_cast<std::size_t>(iy) * w + ix) * cin;
            std::copy(src, src + cin, row);
          }
          row += cin;
        }
      }
    }
  }
}

// Scatter-adds a (H*W) x (kh*kw*Cin) gradient matrix back onto the input
// plane of one sample (transpose of im2col).
template <typename T>
void col2im_accumulate(const T* col, int h, int w, int cin,
                       const ConvSpec& spec, T* in_grad) {
  const int kh = spec.kernel_h, kw = spec.kernel_w, d = spec.dilation;
  const int ph = spec.pad_h(), pw = spec.pad_w();
  const std::size_t k = static_cast<std::size_t>(kh) * kw * cin;
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      const T* row = col + (static_cast<std::size_t>(oy) * w + ox) * k;
      for (int ki = 0; ki < kh; ++ki) {
        const int iy = oy - ph + ki * d;
        if (iy < 0 || iy >= h) {
          row += static_cast<std::size_t>(kw) * cin;
          continue;
        }
        for (int kj = 0; kj < kw; ++kj) {
          const int ix = ox - pw + kj * d;
          if (ix >= 0 && ix < w) {
            T* dst = in_grad + (static_cast<std::size_t>(iy) * w + ix) * cin;
            for (int c = 0; c < cin; ++c) dst[c] += row[c];
          }
          row += cin;
        }
      }
    }
  }
}

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& weights,
                     const Tensor<T>& bias, const ConvSpec& spec) {
  if (input.rank() != 4) {
    throw ShapeError("conv2d input must be NxHxWxC, got " +
                     shape_to_string(input.shape));
  }
  if (weights.rank() != 4 || weights.dim(0) != spec.kernel_h ||
      weights.dim(1) != spec.kernel_w || weights.dim(2) != spec.in_channels ||
      weights.dim(3) != spec.out_channels) {
    throw ShapeError("conv2d weights must be kh x kw x Cin x Cout matching the spec, got " +
                     shape_to_string(weights.shape));
  }
  if (bias.rank() != 1 || bias.dim(0) != spec.out_channels) {
    throw ShapeError("conv2d bias must have out_channels entries, got " +
                     shape_to_string(bias.shape));
  }
  if (input.dim(3) != spec.in_channels) {
    throw ShapeError("conv2d input has " + std::to_string(input.dim(3)) +
                     " channels, spec expects " +
                     std::to_string(spec.in_channels));
  }
  spec.validate(input.dim(1), input.dim(2));
}

}  // namespace detail

// Dilated cross-correlation with "same" zero padding and stride 1.
// input: N x H x W x Cin; weights: kh x kw x Cin x Cout; bias: Cout.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weights,
                 const Tensor<T>& bias, const ConvSpec& spec) {
  detail::check_conv_args(input, weights, bias, spec);
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cin = spec.in_channels, cout = spec.out_channels;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t k = static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w * cin;

  Tensor<T> out({n, h, w, cout});
  detail::MapConstMat<T> wmat(weights.data.data(), static_cast<Eigen::Index>(k), cout);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data.data(), cout);

  parallel_for(static_cast<std::size_t>(n), tensor_jobs(), [&](std::size_t s) {
    std::vector<T> col(hw * k);
    detail::im2col(input.data.data() + s * hw * cin, h, w, cin, spec, col.data());
    detail::MapConstMat<T> colm(col.data(), static_cast<Eigen::Index>(hw),
                                static_cast<Eigen::Index>(k));
    detail::MapMat<T> outm(out.data.data() + s * hw * cout,
                           static_cast<Eigen::Index>(hw), cout);
    outm.noalias() = colm * wmat;
    outm.rowwise() += bvec.transpose();
  });
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> input;    // empty when input gradient was not requested
  Tensor<T> weights;
  Tensor<T> bias;
};

// Reverse-mode gradients of conv2d w.r.t. input, weights and bias.
// Skipping the input gradient (first layer of a network) saves one GEMM
// and the col2im scatter.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& upstream, const Tensor<T>& input,
                             const Tensor<T>& weights, const ConvSpec& spec,
                             bool need_input_grad = true) {
  const int n = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cin = spec.in_channels, cout = spec.out_channels;
  if (upstream.shape != std::vector<int>{n, h, w, cout}) {
    throw ShapeError("conv2d_backward upstream shape " +
                     shape_to_string(upstream.shape) + " does not match output");
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t k = static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w * cin;

  ConvGrads<T> grads;
  grads.weights = Tensor<T>(weights.shape);
  grads.bias = Tensor<T>({cout});
  if (need_input_grad) grads.input = Tensor<T>(input.shape);

  detail::MapConstMat<T> wmat(weights.data.data(), static_cast<Eigen::Index>(k), cout);

  // Per-sample partial weight/bias gradients, reduced in sample order below
  // so the result does not depend on the thread count.
  std::vector<std::vector<T>> wparts(static_cast<std::size_t>(n));
  std::vector<std::vector<T>> bparts(static_cast<std::size_t>(n));

  parallel_for(static_cast<std::size_t>(n), tensor_jobs(), [&](std::size_t s) {
    std::vector<T> col(hw * k);
    detail::im2col(input.data.data() + s * hw * cin, h, w, cin, spec, col.data());
    detail::MapConstMat<T> colm(col.data(), static_cast<Eigen::Index>(hw),
                                static_cast<Eigen::Index>(k));
    detail::MapConstMat<T> gout(upstream.data.data() + s * hw * cout,
                                static_cast<Eigen::Index>(hw), cout);

    wparts[s].resize(k * cout);
    detail::MapMat<T> wpart(wparts[s].data(), static_cast<Eigen::Index>(k), cout);
    wpart.noalias() = colm.transpose() * gout;

    bparts[s].resize(static_cast<std::size_t>(cout));
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> bpart(bparts[s].data(), cout);
    bpart = gout.colwise().sum().transpose();

    if (need_input_grad) {
      std::vector<T> gcol(hw * k);
      detail::MapMat<T> gcolm(gcol.data(), static_cast<Eigen::Index>(hw),
                              static_cast<Eigen::Index>(k));
      gcolm.noalias() = gout * wmat.transpose();
      detail::col2im_accumulate(gcol.data(), h, w, cin, spec,
                                grads.input.data.data() + s * hw * cin);
    }
  });

  for (std::size_t s = 0; s < static_cast<std::size_t>(n); ++s) {
    for (std::size_t i = 0; i < grads.weights.size(); ++i)
      grads.weights.data[i] += wparts[s][i];
    for (int c = 0; c < cout; ++c) grads.bias.data[c] += bparts[s][c];
  }
  return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

// Subgradient at 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& upstream, const Tensor<T>& x) {
  require_same_shape(upstream, x, "relu_backward");
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data[i] = x.data[i] > T(0) ? upstream.data[i] : T(0);
  return out;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data[i] = std::tanh(x.data[i]);
  return out;
}

// Takes the forward output y = tanh(x); dx = upstream * (1 - y^2).
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& upstream, const Tensor<T>& y) {
  require_same_shape(upstream, y, "tanh_backward");
  Tensor<T> out(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i)
    out.data[i] = upstream.data[i] * (T(1) - y.data[i] * y.data[i]);
  return out;
}

// Concatenates along the channel axis; parts must agree on N, H, W.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Tensor<T>& first = *parts.front();
  if (first.rank() != 4) {
    throw ShapeError("concat_channels expects NxHxWxC parts, got " +
                     shape_to_string(first.shape));
  }
  int total_c = 0;
  for (const Tensor<T>* p : parts) {
    if (p->rank() != 4 || p->dim(0) != first.dim(0) ||
        p->dim(1) != first.dim(1) || p->dim(2) != first.dim(2)) {
      throw ShapeError("concat_channels: spatial mismatch " +
                       shape_to_string(p->shape) + " vs " +
                       shape_to_string(first.shape));
    }
    total_c += p->dim(3);
  }
  Tensor<T> out({first.dim(0), first.dim(1), first.dim(2), total_c});
  const std::size_t pixels =
      static_cast<std::size_t>(first.dim(0)) * first.dim(1) * first.dim(2);
  for (std::size_t px = 0; px < pixels; ++px) {
    T* dst = out.data.data() + px * total_c;
    for (const Tensor<T>* p : parts) {
      const int c = p->dim(3);
      const T* src = p->data.data() + px * c;
      std::copy(src, src + c, dst);
      dst += c;
    }
  }
  return out;
}

// Splits an upstream gradient back into per-part gradients.
template <typename T>
std::vector<Tensor<T>> concat_channels_backward(const Tensor<T>& upstream,
                                                const std::vector<int>& widths) {
  int total_c = 0;
  for (int c : widths) total_c += c;
  if (upstream.rank() != 4 || upstream.dim(3) != total_c) {
    throw ShapeError("concat_channels_backward: channel mismatch");
  }
  std::vector<Tensor<T>> parts;
  parts.reserve(widths.size());
  for (int c : widths)
    parts.emplace_back(std::vector<int>{upstream.dim(0), upstream.dim(1),
                                        upstream.dim(2), c});
  const std::size_t pixels = static_cast<std::size_t>(upstream.dim(0)) *
                             upstream.dim(1) * upstream.dim(2);
  for (std::size_t px = 0; px < pixels; ++px) {
    const T* src = upstream.data.data() + px * total_c;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      const int c = widths[p];
      std::copy(src, src + c, parts[p].data.data() + px * c);
      src += c;
    }
  }
  return parts;
}

// Mean absolute error over all elements. Accumulates in index order.
template <typename T>
T mae_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mae_loss");
  T sum = T(0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(pred.data[i] - target.data[i]);
  return sum / static_cast<T>(pred.size());
}

// d(mae)/d(pred) = sign(pred - target) / count, 0 at ties.
template <typename T>
Tensor<T> mae_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mae_loss_backward");
  Tensor<T> out(pred.shape);
  const T inv = T(1) / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.data[i] - target.data[i];
    out.data[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
  }
  return out;
}

}  // namespace vtlm
