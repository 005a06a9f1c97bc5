#pragma once

#include <string>
#include <vector>

#include "mmfuse/core/ops.hpp"
#include "mmfuse/core/parameter.hpp"

namespace mmfuse {

// Stack of same-padded temporal convolutions mapping [T, in_dim] to
// [T, out_dim], with ReLU between consecutive layers (none after the last).
class Conv1dStack {
public:
  struct Layer {
    Tensor weight;  // [kernel, c_in, c_out]
    Tensor bias;    // [c_out]
  };

  Conv1dStack() = default;
  Conv1dStack(std::size_t num_layers, std::size_t kernel, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    if (num_layers == 0) throw std::invalid_argument("Conv1dStack: need at least one layer");
    if (kernel == 0 || kernel % 2 == 0) throw std::invalid_argument("Conv1dStack: kernel size must be odd");
    for (std::size_t i = 0; i < num_layers; ++i) {
      std::size_t ci = i == 0 ? in_dim : out_dim;
      layers.push_back({init_uniform({kernel, ci, out_dim}, kernel * ci, rng), init_uniform({out_dim}, kernel * ci, rng)});
    }
  }
  explicit Conv1dStack(std::vector<Layer> l) : layers(std::move(l)) {}

  std::size_t in_dim() const { return layers.front().weight.dim(1); }
  std::size_t out_dim() const { return layers.back().weight.dim(2); }

  Tensor forward(const Tensor& x) const {
    if (x.shape().back() != in_dim())
      throw DimensionError("conv_embed: input " + shape_str(x.shape()) + " but stack expects " + std::to_string(in_dim()) +
                           " features");
    Tensor y = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      y = conv1d(y, layers[i].weight, layers[i].bias);
      if (i + 1 < layers.size()) y = relu(y);
    }
    return y;
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto p = join_name(prefix, "conv" + std::to_string(i));
      out.push_back({p + ".weight", layers[i].weight, true});
      out.push_back({p + ".bias", layers[i].bias, false});
    }
  }

  std::vector<Layer> layers;
};

inline Tensor conv_embed(const Tensor& x, const Conv1dStack& stack) { return stack.forward(x); }

}  // namespace mmfuse
