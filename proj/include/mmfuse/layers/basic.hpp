#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/ops.hpp"
#include "mmfuse/core/parameter.hpp"
#include "mmfuse/core/rng.hpp"

namespace mmfuse {

// y = x W + b over the last axis of x.
class Linear {
public:
  Linear() = default;
  Linear(std::size_t in_dim, std::size_t out_dim, Rng& rng)
      : weight(init_uniform({in_dim, out_dim}, in_dim, rng)), bias(init_uniform({out_dim}, in_dim, rng)) {}
  Linear(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {
    if (weight.rank() != 2 || bias.size() != weight.dim(1))
      throw DimensionError("Linear: weight " + shape_str(weight.shape()) + " / bias " + shape_str(bias.shape()));
  }

  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }

  Tensor forward(const Tensor& x) const {
    if (x.shape().back() != in_dim())
      throw DimensionError("Linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    return add(matmul(x, weight), bias);
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "weight"), weight, true});
    out.push_back({join_name(prefix, "bias"), bias, false});
  }

  Tensor weight;
  Tensor bias;
};

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return Linear(w, b).forward(x); }

class LayerNorm {
public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t features, double eps = 1e-5)
      : gain(Tensor::full({features}, 1.0, true)), bias(Tensor::zeros({features}, true)), eps(eps) {}

  Tensor forward(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "gain"), gain, false});
    out.push_back({join_name(prefix, "bias"), bias, false});
  }

  Tensor gain;
  Tensor bias;
  double eps = 1e-5;
};

// Inverted dropout: in training mode each entry is zeroed with probability p
// and survivors are scaled by 1/(1-p); identity in eval mode.
inline Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(p) ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace mmfuse
