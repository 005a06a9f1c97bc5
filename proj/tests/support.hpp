#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmfuse/core/grad_check.hpp"
#include "mmfuse/data/dataset.hpp"
#include "mmfuse/layers/attention.hpp"
#include "mmfuse/layers/basic.hpp"
#include "mmfuse/layers/conv_embed.hpp"
#include "mmfuse/layers/positional.hpp"
#include "mmfuse/layers/recurrent.hpp"
#include "mmfuse/models/sagru.hpp"
#include "mmfuse/models/temma.hpp"
#include "mmfuse/training/losses.hpp"

namespace mmfuse::testing {

inline Tensor random_tensor(Shape s, Rng& rng, bool requires_grad = true, double scale_by = 1.0) {
  std::vector<double> v(numel(s));
  for (auto& x : v) x = rng.normal() * scale_by;
  return Tensor(std::move(s), std::move(v), requires_grad);
}

inline std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

// Contracts y against fixed random weights so every output entry matters.
inline Tensor probe(const Tensor& y, const Tensor& r) { return sum(mul(y, r)); }

struct GradCase {
  std::string name;
  std::function<double()> run;  // max relative error
};

// Tiny instances of every layer and both models, dropout off.
inline std::vector<GradCase> gradient_cases(std::uint64_t seed = 1) {
  std::vector<GradCase> cases;

  cases.push_back({"conv stack", [seed] {
                     Rng rng(seed);
                     Conv1dStack stack(2, 3, 3, 4, rng);
                     auto x = random_tensor({5, 3}, rng);
                     auto r = random_tensor({5, 4}, rng, false);
                     auto ps = tensors_of([&] { ParameterList p; stack.append_parameters(p, "c"); return p; }());
                     ps.push_back(x);
                     return grad_check([&] { return probe(stack.forward(x), r); }, ps);
                   }});

  cases.push_back({"positional add", [seed] {
                     Rng rng(seed + 1);
                     auto x = random_tensor({4, 6}, rng);
                     auto pe = positional_encode(4, 6);
                     std::vector<Tensor> ps{x};
                     return grad_check([&] { return sum(square(mmfuse::tanh(add(x, pe)))); }, ps);
                   }});

  cases.push_back({"attention", [seed] {
                     Rng rng(seed + 2);
                     MultiHeadAttention mha(4, 2, rng);
                     auto q = random_tensor({3, 4}, rng), k = random_tensor({5, 4}, rng), v = random_tensor({5, 4}, rng);
                     auto r = random_tensor({3, 4}, rng, false);
                     ParameterList pl;
                     mha.append_parameters(pl, "a");
                     auto ps = tensors_of(pl);
                     ps.insert(ps.end(), {q, k, v});
                     return grad_check([&] { return probe(attention(q, k, v, mha).output, r); }, ps);
                   }});

  cases.push_back({"tma", [seed] {
                     Rng rng(seed + 3);
                     MultiHeadAttention mha(4, 2, rng);
                     auto x = random_tensor({2, 3, 4}, rng);
                     auto r = random_tensor({2, 3, 4}, rng, false);
                     ParameterList pl;
                     mha.append_parameters(pl, "t");
                     auto ps = tensors_of(pl);
                     ps.push_back(x);
                     return grad_check([&] { return probe(tma(x, mha).output, r); }, ps);
                   }});

  cases.push_back({"mma", [seed] {
                     Rng rng(seed + 4);
                     MultimodalAttention layer(3, 4, 2, rng);
                     auto x = random_tensor({3, 2, 4}, rng);
                     auto r = random_tensor({3, 2, 4}, rng, false);
                     ParameterList pl;
                     layer.append_parameters(pl, "m");
                     auto ps = tensors_of(pl);
                     ps.push_back(x);
                     return grad_check([&] { return probe(mma(x, layer).output, r); }, ps);
                   }});

  cases.push_back({"gru", [seed] {
                     Rng rng(seed + 5);
                     GruLayer gru(3, 2, true, rng);
                     auto x = random_tensor({4, 3}, rng);
                     auto h0 = random_tensor({2}, rng);
                     auto r = random_tensor({4, 4}, rng, false);
                     ParameterList pl;
                     gru.append_parameters(pl, "g");
                     auto ps = tensors_of(pl);
                     ps.insert(ps.end(), {x, h0});
                     return grad_check([&] { return probe(gru_forward(x, gru, h0), r); }, ps);
                   }});

  cases.push_back({"lstm", [seed] {
                     Rng rng(seed + 6);
                     LstmLayer lstm(3, 2, true, rng);
                     auto x = random_tensor({2, 4, 3}, rng);
                     auto r = random_tensor({2, 4, 4}, rng, false);
                     ParameterList pl;
                     lstm.append_parameters(pl, "l");
                     auto ps = tensors_of(pl);
                     ps.push_back(x);
                     return grad_check([&] { return probe(lstm_forward(x, lstm), r); }, ps);
                   }});

  cases.push_back({"layer norm", [seed] {
                     Rng rng(seed + 7);
                     auto x = random_tensor({3, 5}, rng);
                     auto g = random_tensor({5}, rng), b = random_tensor({5}, rng);
                     auto r = random_tensor({3, 5}, rng, false);
                     std::vector<Tensor> ps{x, g, b};
                     return grad_check([&] { return probe(layer_norm(x, g, b), r); }, ps);
                   }});

  cases.push_back({"linear", [seed] {
                     Rng rng(seed + 8);
                     Linear lin(4, 3, rng);
                     auto x = random_tensor({2, 4}, rng);
                     auto r = random_tensor({2, 3}, rng, false);
                     std::vector<Tensor> ps{lin.weight, lin.bias, x};
                     return grad_check([&] { return probe(mmfuse::tanh(lin.forward(x)), r); }, ps);
                   }});

  cases.push_back({"temma humor", [seed] {
                     Rng rng(seed + 9);
                     auto cfg = TemmaConfig::humor({3, 5});
                     cfg.d_model = 8;
                     cfg.heads = 2;
                     cfg.conv_layers = 2;
                     cfg.encoder_blocks = 2;
                     cfg.ff_dim = 8;
                     cfg.head_hidden = 8;
                     Temma model(cfg, rng);
                     std::vector<Tensor> xs{random_tensor({4, 3}, rng, false), random_tensor({4, 5}, rng, false)};
                     auto ps = tensors_of(model.parameters());
                     Rng unused(0);
                     return grad_check(
                         [&] { return bce_loss(model.forward(xs, false, unused), Tensor::vector({1.0})); }, ps);
                   }});

  cases.push_back({"temma reaction", [seed] {
                     Rng rng(seed + 10);
                     auto cfg = TemmaConfig::reaction({3, 5});
                     cfg.d_model = 8;
                     cfg.heads = 2;
                     cfg.conv_layers = 2;
                     cfg.encoder_blocks = 1;
                     cfg.ff_dim = 8;
                     cfg.head_hidden = 8;
                     Temma model(cfg, rng);
                     std::vector<Tensor> xs{random_tensor({4, 3}, rng, false), random_tensor({4, 5}, rng, false)};
                     auto y = random_tensor({7}, rng, false);
                     auto ps = tensors_of(model.parameters());
                     Rng unused(0);
                     return grad_check([&] { return mse_loss(model.forward(xs, false, unused), y); }, ps);
                   }});

  cases.push_back({"sa-gru", [seed] {
                     Rng rng(seed + 11);
                     SaGruConfig cfg{{4}, 2, 2, 3, true, 6};
                     SaGruModel model(4, cfg, rng);
                     auto x = random_tensor({2, 5, 4}, rng);
                     auto y = random_tensor({10}, rng, false);
                     auto ps = tensors_of(model.parameters());
                     ps.push_back(x);
                     return grad_check([&] { return ccc_loss(reshape(model.forward(x), {10}), y); }, ps);
                   }});

  cases.push_back({"late fusion", [seed] {
                     Rng rng(seed + 12);
                     LateFusion fusion(3, 6, true, rng);
                     std::vector<Tensor> preds{random_tensor({5}, rng), random_tensor({5}, rng), random_tensor({5}, rng)};
                     auto y = random_tensor({5}, rng, false);
                     auto ps = tensors_of(fusion.parameters());
                     ps.insert(ps.end(), preds.begin(), preds.end());
                     return grad_check([&] { return ccc_loss(late_fusion_forward(preds, fusion), y); }, ps);
                   }});

  return cases;
}

// Random multimodal tables with different row spacings and start offsets.
inline std::vector<data::FeatureTable> random_tables(Rng& rng) {
  const std::size_t M = 1 + rng.below(3);
  std::vector<data::FeatureTable> tables;
  for (std::size_t m = 0; m < M; ++m) {
    data::FeatureTable t;
    t.modality = "m" + std::to_string(m);
    t.columns = data::default_feature_columns(1 + rng.below(4));
    const std::int64_t spacing = 5 * static_cast<std::int64_t>(1 + rng.below(10));
    std::int64_t ts = static_cast<std::int64_t>(rng.below(40));
    const std::size_t rows = 20 + rng.below(60);
    std::vector<double> row(t.arity());
    for (std::size_t r = 0; r < rows; ++r, ts += spacing) {
      for (std::size_t c = 0; c < row.size(); ++c) row[c] = c == 0 && m == 0 ? 3.25 : rng.normal(1.0, 4.0);
      t.append_row(ts, 0, row);
    }
    tables.push_back(std::move(t));
  }
  return tables;
}

// Checks alignment, windowing and normalization invariants on one random
// fixture. Returns an empty string when everything holds.
inline std::string data_fixture_violation(Rng& rng, bool* skipped = nullptr) {
  using namespace data;
  auto tables = random_tables(rng);
  const std::int64_t hop = 10 * static_cast<std::int64_t>(1 + rng.below(5));
  AlignedSample s;
  try {
    s = align_modalities(tables, hop);
  } catch (const DataError&) {
    if (skipped) *skipped = true;
    return "";  // too little overlap for this hop; nothing to check
  }
  for (std::size_t m = 0; m < tables.size(); ++m)
    if (s.modalities[m].rows != s.length()) return "aligned modalities disagree on T";

  // align is idempotent
  std::vector<FeatureTable> again;
  for (std::size_t m = 0; m < tables.size(); ++m) again.push_back(to_table(s, m));
  auto s2 = align_modalities(again, hop);
  if (s2.timestamps != s.timestamps || s2.modalities != s.modalities) return "align is not idempotent";

  // windows with hop == win reconstruct the sequence; padding is zero
  const std::size_t T = s.length(), win = 1 + rng.below(T + 3);
  auto wins = window(s, win, win);
  if (wins.size() != (T + win - 1) / win) return "unexpected window count";
  for (std::size_t m = 0; m < tables.size(); ++m) {
    std::vector<double> joined;
    for (const auto& w : wins) {
      const auto& mat = w.modalities[m];
      joined.insert(joined.end(), mat.data.begin(), mat.data.begin() + static_cast<std::ptrdiff_t>(w.valid * mat.cols));
      for (std::size_t i = w.valid * mat.cols; i < mat.data.size(); ++i)
        if (mat.data[i] != 0.0) return "padding is not zero";
      if (w.padded != (w.valid < win)) return "padded flag wrong";
    }
    if (joined != s.modalities[m].data) return "windows do not reconstruct the sequence";
  }

  // normalization: zero mean on non-constant features, constant features untouched, invertible
  Dataset ds = wins;
  auto [normed, stats] = normalize(ds);
  for (std::size_t m = 0; m < tables.size(); ++m) {
    const auto d = s.modalities[m].cols;
    for (std::size_t c = 0; c < d; ++c) {
      double sum = 0.0, n = 0.0;
      for (const auto& w : normed)
        for (std::size_t r = 0; r < w.valid; ++r) {
          sum += w.modalities[m](r, c);
          n += 1.0;
        }
      double lo = 1e300, hi = -1e300;
      for (const auto& w : ds)
        for (std::size_t r = 0; r < w.valid; ++r) {
          lo = std::min(lo, w.modalities[m](r, c));
          hi = std::max(hi, w.modalities[m](r, c));
        }
      if (m == 0 && c == 0 && lo != hi) return "fixture lost its constant feature";
      if (lo == hi) {
        for (const auto& w : normed)
          for (std::size_t r = 0; r < w.valid; ++r)
            if (w.modalities[m](r, c) != lo) return "constant feature was changed";
      } else if (std::abs(sum / n) > 1e-9) {
        return "normalized mean is not zero";
      }
    }
  }
  auto back = denormalize(normed, stats);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t m = 0; m < ds[i].modalities.size(); ++m)
      for (std::size_t k = 0; k < ds[i].modalities[m].data.size(); ++k) {
        const double a = ds[i].modalities[m].data[k], b = back[i].modalities[m].data[k];
        if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(a))) return "normalization does not round-trip";
      }
  return "";
}

}  // namespace mmfuse::testing
