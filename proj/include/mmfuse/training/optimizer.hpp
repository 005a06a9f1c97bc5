#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mmfuse/core/error.hpp"
#include "mmfuse/core/parameter.hpp"

namespace mmfuse {

enum class OptimizerKind { adam, adamw };

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // AdamW only; applied to parameters with decay == true
};

// Bias-corrected Adam. The AdamW variant first shrinks decayed weights by
// (1 - lr * weight_decay), independent of the gradient.
class Adam {
public:
  Adam(OptimizerKind kind, ParameterList params, AdamOptions opts = {})
      : kind_(kind), params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.size(), 0.0);
      v_.emplace_back(p.tensor.size(), 0.0);
    }
  }

  OptimizerKind kind() const { return kind_; }
  std::size_t steps() const { return t_; }
  ParameterList& parameters() { return params_; }

  void zero_grad() { mmfuse::zero_grad(params_); }

  void step(double lr) {
    for (const auto& p : params_)
      if (!p.tensor.has_grad()) throw TrainingError("optimizer_step: parameter '" + p.name + "' has no gradient");
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto w = p.tensor.mutable_values();
      auto g = p.tensor.grad();
      auto& m = m_[k];
      auto& v = v_[k];
      const double shrink = (kind_ == OptimizerKind::adamw && p.decay) ? 1.0 - lr * opts_.weight_decay : 1.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        w[i] = w[i] * shrink - lr * mhat / (std::sqrt(vhat) + opts_.eps);
      }
    }
  }

private:
  OptimizerKind kind_;
  ParameterList params_;
  AdamOptions opts_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

inline void optimizer_step(Adam& opt, double lr) { opt.step(lr); }

}  // namespace mmfuse
