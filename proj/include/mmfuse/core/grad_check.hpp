#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "mmfuse/core/tensor.hpp"

namespace mmfuse {

// Compares reverse-mode gradients of a scalar function against central
// differences (f(p+eps) - f(p-eps)) / (2 eps), entry by entry.
//
// Returns max |analytic - numeric| / max(1, |numeric|) over every entry of
// every parameter. `f` must rebuild its graph from the current parameter
// values on each call and be deterministic (no dropout).
inline double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps = 1e-5) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = f().item();
      values[i] = orig - eps;
      const double down = f().item();
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  for (auto& p : params) p.zero_grad();
  return worst;
}

}  // namespace mmfuse
