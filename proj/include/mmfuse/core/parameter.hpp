#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmfuse/core/rng.hpp"
#include "mmfuse/core/tensor.hpp"

namespace mmfuse {

// A named trainable tensor. `decay` marks weights that take decoupled weight
// decay; biases and norm gains do not.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool decay = true;
};

using ParameterList = std::vector<Parameter>;

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from the given stream.
inline Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

inline void zero_grad(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace mmfuse
