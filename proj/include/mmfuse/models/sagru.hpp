#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/layers/attention.hpp"
#include "mmfuse/layers/basic.hpp"
#include "mmfuse/layers/recurrent.hpp"

namespace mmfuse {

struct SaGruConfig {
  std::vector<std::size_t> modality_dims;  // audio, video, bio
  std::size_t heads = 2;
  std::size_t gru_layers = 2;
  std::size_t hidden = 64;
  bool bidirectional = true;
  std::size_t fusion_units = 6;

  void validate() const {
    if (modality_dims.empty()) throw std::invalid_argument("SaGruConfig: no modalities");
    for (auto d : modality_dims)
      if (heads == 0 || d == 0 || d % heads != 0)
        throw std::invalid_argument("SaGruConfig: heads (" + std::to_string(heads) + ") must divide every modality width");
    if (gru_layers == 0 || hidden == 0 || fusion_units == 0)
      throw std::invalid_argument("SaGruConfig: layer count and widths must be positive");
  }
};

// Single-modality regressor: self-attention over time, a stack of GRU
// layers, and a linear head giving one value per timestep.
class SaGruModel {
public:
  SaGruModel() = default;
  SaGruModel(std::size_t input_dim, const SaGruConfig& cfg, Rng& rng) : attention_(input_dim, cfg.heads, rng) {
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < cfg.gru_layers; ++l) {
      gru_.emplace_back(in, cfg.hidden, cfg.bidirectional, rng);
      in = gru_.back().output_dim();
    }
    head_ = Linear(in, 1, rng);
  }

  std::size_t input_dim() const { return attention_.d_model(); }

  // [T, d] -> [T];  [B, T, d] -> [B, T].
  Tensor forward(const Tensor& x) const {
    if ((x.rank() != 2 && x.rank() != 3) || x.shape().back() != input_dim())
      throw DimensionError("sagru_modality_forward: input " + shape_str(x.shape()) + " but model expects " +
                           std::to_string(input_dim()) + " features");
    Tensor h = attention_.forward(x, x, x).output;
    for (const auto& g : gru_) h = g.forward(h);
    Tensor y = head_.forward(h);
    Shape s(x.shape().begin(), x.shape().end() - 1);
    return reshape(y, s);
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    attention_.append_parameters(out, join_name(prefix, "att"));
    for (std::size_t l = 0; l < gru_.size(); ++l) gru_[l].append_parameters(out, join_name(prefix, "gru" + std::to_string(l)));
    head_.append_parameters(out, join_name(prefix, "head"));
  }

  ParameterList parameters(const std::string& prefix = "") const {
    ParameterList out;
    append_parameters(out, prefix);
    return out;
  }

  MultiHeadAttention& attention() { return attention_; }
  std::vector<GruLayer>& gru() { return gru_; }
  Linear& head() { return head_; }

private:
  MultiHeadAttention attention_;
  std::vector<GruLayer> gru_;
  Linear head_;
};

inline Tensor sagru_modality_forward(const Tensor& x, const SaGruModel& model) { return model.forward(x); }

// Late fusion: per-modality prediction sequences are stacked as features,
// run through a (bi)LSTM and mapped to one value per timestep.
class LateFusion {
public:
  LateFusion() = default;
  LateFusion(std::size_t inputs, std::size_t units, bool bidirectional, Rng& rng)
      : lstm_(inputs, units, bidirectional, rng), head_(lstm_.output_dim(), 1, rng) {}

  std::size_t inputs() const { return lstm_.input_dim(); }

  // Fused input: each prediction [T] or [B, T] becomes one feature column.
  Tensor stack(const std::vector<Tensor>& predictions) const {
    if (predictions.size() != inputs())
      throw DimensionError("late_fusion_forward: expected " + std::to_string(inputs()) + " prediction sequences, got " +
                           std::to_string(predictions.size()));
    std::vector<Tensor> cols;
    for (const auto& p : predictions) {
      if (p.shape() != predictions[0].shape())
        throw DimensionError("late_fusion_forward: length mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(predictions[0].shape()));
      Shape s = p.shape();
      s.push_back(1);
      cols.push_back(reshape(p, s));
    }
    return concat(cols, cols[0].rank() - 1);
  }

  Tensor recurrent(const Tensor& fused) const { return lstm_.forward(fused); }

  Tensor forward(const std::vector<Tensor>& predictions) const {
    Tensor y = head_.forward(recurrent(stack(predictions)));
    return reshape(y, predictions[0].shape());
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    lstm_.append_parameters(out, join_name(prefix, "lstm"));
    head_.append_parameters(out, join_name(prefix, "head"));
  }

  ParameterList parameters(const std::string& prefix = "") const {
    ParameterList out;
    append_parameters(out, prefix);
    return out;
  }

  LstmLayer& lstm() { return lstm_; }
  Linear& head() { return head_; }

private:
  LstmLayer lstm_;
  Linear head_;
};

inline Tensor late_fusion_forward(const std::vector<Tensor>& predictions, const LateFusion& fusion) {
  return fusion.forward(predictions);
}

// Per-modality SA-GRU regressors plus the late-fusion head.
class StressModel {
public:
  StressModel(SaGruConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (auto d : cfg_.modality_dims) branches_.emplace_back(d, cfg_, rng);
    fusion_ = LateFusion(cfg_.modality_dims.size(), cfg_.fusion_units, true, rng);
  }

  const SaGruConfig& config() const { return cfg_; }
  std::vector<SaGruModel>& branches() { return branches_; }
  const std::vector<SaGruModel>& branches() const { return branches_; }
  LateFusion& fusion() { return fusion_; }
  const LateFusion& fusion() const { return fusion_; }

  // Per-modality inputs [T, d_m] or [B, T, d_m] -> fused prediction.
  Tensor forward(const std::vector<Tensor>& modalities) const {
    if (modalities.size() != branches_.size())
      throw DimensionError("stress model: got " + std::to_string(modalities.size()) + " modalities, configured for " +
                           std::to_string(branches_.size()));
    std::vector<Tensor> preds;
    for (std::size_t m = 0; m < branches_.size(); ++m) preds.push_back(branches_[m].forward(modalities[m]));
    return fusion_.forward(preds);
  }

  ParameterList parameters() const {
    ParameterList out;
    for (std::size_t m = 0; m < branches_.size(); ++m) branches_[m].append_parameters(out, "branch" + std::to_string(m));
    fusion_.append_parameters(out, "fusion");
    return out;
  }

private:
  SaGruConfig cfg_;
  std::vector<SaGruModel> branches_;
  LateFusion fusion_;
};

}  // namespace mmfuse
