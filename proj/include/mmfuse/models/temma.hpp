#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/layers/attention.hpp"
#include "mmfuse/layers/basic.hpp"
#include "mmfuse/layers/conv_embed.hpp"
#include "mmfuse/layers/positional.hpp"

namespace mmfuse {

enum class OutputActivation { sigmoid, linear };

struct TemmaConfig {
  std::vector<std::size_t> modality_dims;
  std::size_t d_model = 64;
  std::size_t conv_layers = 5;
  std::size_t kernel = 3;
  std::size_t encoder_blocks = 4;
  std::size_t heads = 4;
  std::size_t ff_dim = 128;  // position-wise FC width inside each encoder block
  std::size_t head_hidden = 256;
  double dropout = 0.2;
  std::size_t output_dim = 1;
  OutputActivation output_activation = OutputActivation::sigmoid;
  std::size_t max_len = 4096;

  // Humor: one probability. Reaction: seven unbounded intensities.
  static TemmaConfig humor(std::vector<std::size_t> dims) {
    TemmaConfig c;
    c.modality_dims = std::move(dims);
    return c;
  }
  static TemmaConfig reaction(std::vector<std::size_t> dims) {
    TemmaConfig c;
    c.modality_dims = std::move(dims);
    c.output_dim = 7;
    c.output_activation = OutputActivation::linear;
    return c;
  }

  void validate() const {
    if (modality_dims.empty()) throw std::invalid_argument("TemmaConfig: no modalities");
    for (auto d : modality_dims)
      if (d == 0) throw std::invalid_argument("TemmaConfig: zero-width modality");
    if (d_model == 0 || heads == 0 || d_model % heads != 0)
      throw std::invalid_argument("TemmaConfig: heads must divide d_model");
    if (output_dim != 1 && output_dim != 7) throw std::invalid_argument("TemmaConfig: output_dim must be 1 or 7");
    if (kernel % 2 == 0) throw std::invalid_argument("TemmaConfig: kernel must be odd");
    if (conv_layers == 0 || encoder_blocks == 0 || head_hidden == 0 || ff_dim == 0)
      throw std::invalid_argument("TemmaConfig: layer counts and widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("TemmaConfig: dropout must be in [0, 1)");
  }
};

// Transformer encoder with temporal (per-modality) and multimodal attention.
//
// Per sample: each modality [T, d_m] is conv-embedded to d_model and the
// sinusoidal position table is added after the conv stack. The modalities are
// stacked to [M, T, d_model] and pass through the encoder blocks:
//   x = LN(x + TMA(x));  x = LN(x + MMA(x));  x = LN(x + FC(x))
// then mean-pooled over time, flattened across modalities, and mapped through
// FC(head_hidden) + ReLU + dropout and the output layer.
class Temma {
public:
  struct Block {
    MultiHeadAttention temporal;
    MultimodalAttention multimodal;
    Linear ff_in, ff_out;
    LayerNorm norm_temporal, norm_multimodal, norm_ff;
  };

  Temma(TemmaConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const auto M = cfg_.modality_dims.size();
    for (auto d : cfg_.modality_dims) embed_.emplace_back(cfg_.conv_layers, cfg_.kernel, d, cfg_.d_model, rng);
    pe_ = PositionalEncoding(cfg_.max_len, cfg_.d_model);
    for (std::size_t b = 0; b < cfg_.encoder_blocks; ++b) {
      blocks_.push_back({MultiHeadAttention(cfg_.d_model, cfg_.heads, rng),
                         MultimodalAttention(M, cfg_.d_model, cfg_.heads, rng), Linear(cfg_.d_model, cfg_.ff_dim, rng),
                         Linear(cfg_.ff_dim, cfg_.d_model, rng), LayerNorm(cfg_.d_model), LayerNorm(cfg_.d_model),
                         LayerNorm(cfg_.d_model)});
    }
    fc_ = Linear(M * cfg_.d_model, cfg_.head_hidden, rng);
    out_ = Linear(cfg_.head_hidden, cfg_.output_dim, rng);
  }

  const TemmaConfig& config() const { return cfg_; }

  // Returns [output_dim]: probabilities for the sigmoid head, raw intensities
  // for the linear head.
  Tensor forward(const std::vector<Tensor>& modalities, bool training, Rng& rng) const {
    const auto M = cfg_.modality_dims.size();
    if (modalities.size() != M)
      throw DimensionError("temma_forward: got " + std::to_string(modalities.size()) + " modalities, configured for " +
                           std::to_string(M));
    const std::size_t T = modalities[0].rank() == 2 ? modalities[0].dim(0) : 0;
    std::vector<Tensor> embedded;
    for (std::size_t m = 0; m < M; ++m) {
      const auto& x = modalities[m];
      if (x.rank() != 2 || x.dim(0) != T || x.dim(1) != cfg_.modality_dims[m])
        throw DimensionError("temma_forward: modality " + std::to_string(m) + " has shape " + shape_str(x.shape()) +
                             ", expected [" + std::to_string(T) + "x" + std::to_string(cfg_.modality_dims[m]) + "]");
      Tensor e = add(embed_[m].forward(x), pe_.encode(T));
      embedded.push_back(reshape(e, {1, T, cfg_.d_model}));
    }
    Tensor h = encode(concat(embedded, 0));
    Tensor pooled = reshape(mean_axis(h, 1), {1, M * cfg_.d_model});
    Tensor z = dropout(relu(fc_.forward(pooled)), cfg_.dropout, training, rng);
    Tensor y = reshape(out_.forward(z), {cfg_.output_dim});
    return cfg_.output_activation == OutputActivation::sigmoid ? sigmoid(y) : y;
  }

  // Encoder stack over [M, T, d_model].
  Tensor encode(Tensor x) const {
    for (const auto& b : blocks_) {
      x = b.norm_temporal.forward(add(x, tma(x, b.temporal).output));
      x = b.norm_multimodal.forward(add(x, mma(x, b.multimodal).output));
      x = b.norm_ff.forward(add(x, b.ff_out.forward(relu(b.ff_in.forward(x)))));
    }
    return x;
  }

  // Eval-mode prediction; linear-head intensities are clamped to [0, 1].
  std::vector<double> predict(const std::vector<Tensor>& modalities) const {
    Rng unused(0);
    Tensor y = forward(modalities, false, unused);
    std::vector<double> out(y.values().begin(), y.values().end());
    if (cfg_.output_activation == OutputActivation::linear)
      for (auto& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
  }

  ParameterList parameters(const std::string& prefix = "") const {
    ParameterList out;
    for (std::size_t m = 0; m < embed_.size(); ++m) embed_[m].append_parameters(out, join_name(prefix, "embed" + std::to_string(m)));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto p = join_name(prefix, "block" + std::to_string(i));
      const auto& b = blocks_[i];
      b.temporal.append_parameters(out, p + ".tma");
      b.multimodal.append_parameters(out, p + ".mma");
      b.ff_in.append_parameters(out, p + ".ff_in");
      b.ff_out.append_parameters(out, p + ".ff_out");
      b.norm_temporal.append_parameters(out, p + ".ln_tma");
      b.norm_multimodal.append_parameters(out, p + ".ln_mma");
      b.norm_ff.append_parameters(out, p + ".ln_ff");
    }
    fc_.append_parameters(out, join_name(prefix, "fc"));
    out_.append_parameters(out, join_name(prefix, "out"));
    return out;
  }

private:
  TemmaConfig cfg_;
  std::vector<Conv1dStack> embed_;
  PositionalEncoding pe_;
  std::vector<Block> blocks_;
  Linear fc_, out_;
};

inline Tensor temma_forward(const std::vector<Tensor>& sample, const Temma& model, bool training, Rng& rng) {
  return model.forward(sample, training, rng);
}

}  // namespace mmfuse
