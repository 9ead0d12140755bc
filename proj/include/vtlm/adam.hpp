// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vtlm/common.hpp"
#include "vtlm/tensor.hpp"

namespace vtlm {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed set of parameter tensors. Moment buffers are laid out
// per tensor and updated element by element in index order; the update is
// p -= lr * mhat / (sqrt(vhat) + eps) with bias-corrected moments.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : cfg_(config) {
    if (cfg_.learning_rate <= 0 || cfg_.beta1 < 0 || cfg_.beta1 >= 1 ||
        cfg_.beta2 < 0 || cfg_.beta2 >= 1 || cfg_.epsilon <= 0) {
      throw ConfigError("invalid Adam configuration");
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

  // Adjusts the step size mid-run (moment buffers are kept); used by
  // per-epoch learning-rate schedules.
  void set_learning_rate(double lr) {
    if (lr <= 0) throw ConfigError("learning rate must be positive");
    cfg_.learning_rate = lr;
  }

  // Applies one update using each tensor's .grad. The parameter list must
  // be the same (sizes and order) on every call.
  void step(const std::vector<Tensor<T>*>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i]->size(), T(0));
        v_[i].assign(params[i]->size(), T(0));
      }
    }
    if (params.size() != m_.size()) {
      throw ConfigError("Adam::step called with a different parameter list");
    }
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T corr1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, t_));
    const T corr2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T>& p = *params[i];
      if (!p.has_grad() || p.grad.size() != m_[i].size()) {
        throw ConfigError("Adam::step: parameter " + std::to_string(i) +
                          " has no gradient of matching size");
      }
      for (std::size_t j = 0; j < m_[i].size(); ++j) {
        const T g = p.grad[j];
        m_[i][j] = b1 * m_[i][j] + (T(1) - b1) * g;
        v_[i][j] = b2 * v_[i][j] + (T(1) - b2) * g * g;
        const T mhat = m_[i][j] / corr1;
        const T vhat = v_[i][j] / corr2;
        p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

}  // namespace vtlm
