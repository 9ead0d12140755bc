// Copyright 2026 The vtlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vtlm/tensor.hpp"

namespace vtlm {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of analytic gradients. The caller fills each
// tensor's .grad beforehand; loss() must recompute the scalar objective
// from the tensors' current .data. Relative error is
// |a - n| / max(1, |a|, |n|), which degrades to absolute error near zero.
inline GradCheckResult check_gradients(
    const std::vector<Tensor<double>*>& params,
    const std::function<double()>& loss, double step = 1e-5) {
  GradCheckResult result;
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    Tensor<double>& p = *params[ti];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + step;
      const double up = loss();
      p.data[i] = saved - step;
      const double down = loss();
      p.data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[i];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_tensor = ti;
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace vtlm
