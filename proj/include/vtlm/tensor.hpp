// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "vtlm/common.hpp"

namespace vtlm {

inline std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// Dense n-d array. Image batches use N x H x W x C layout throughout the
// library. `grad` is either empty or exactly data.size() long.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;
  std::vector<T> grad;

  Tensor() = default;

  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(element_count(shape), T(0));
  }

  Tensor(std::vector<int> s, T fill) : shape(std::move(s)) {
    data.assign(element_count(shape), fill);
  }

  Tensor(std::vector<int> s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != element_count(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_to_string(shape));
    }
  }

  static std::size_t element_count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_to_string(s));
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool has_grad() const { return !grad.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }

  void zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), T(0));
  }

  // 4-d accessors (N x H x W x C).
  T& at4(int n, int h, int w, int c) {
    return data[offset4(n, h, w, c)];
  }
  const T& at4(int n, int h, int w, int c) const {
    return data[offset4(n, h, w, c)];
  }
  std::size_t offset4(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape[1] + h) * shape[2] + w) *
               shape[3] +
           c;
  }

  // 3-d accessors (H x W x C), used by heat-map stacks.
  T& at3(int h, int w, int c) { return data[offset3(h, w, c)]; }
  const T& at3(int h, int w, int c) const { return data[offset3(h, w, c)]; }
  std::size_t offset3(int h, int w, int c) const {
    return (static_cast<std::size_t>(h) * shape[1] + w) * shape[2] + c;
  }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape == b.shape;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                        const char* what) {
  if (!same_shape(a, b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_to_string(a.shape) + " vs " +
                     shape_to_string(b.shape));
  }
}

}  // namespace vtlm
