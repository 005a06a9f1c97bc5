#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/ops.hpp"
#include "mmfuse/core/parameter.hpp"

namespace mmfuse {

namespace detail {

// Brings [T, d] or [B, T, d] to [B, T, d].
inline Tensor as_batched(const Tensor& x, std::size_t expected_dim, const char* who) {
  if ((x.rank() != 2 && x.rank() != 3) || x.shape().back() != expected_dim)
    throw DimensionError(std::string(who) + ": input " + shape_str(x.shape()) + " but layer expects " +
                         std::to_string(expected_dim) + " features");
  return x.rank() == 3 ? x : reshape(x, {1, x.dim(0), x.dim(1)});
}

// Initial state [B, H]: zeros, or a given [H] / [B, H] tensor.
inline Tensor initial_state(const Tensor& h0, std::size_t batch, std::size_t hidden) {
  Tensor zeros = Tensor::zeros({batch, hidden});
  if (!h0.defined()) return zeros;
  if (h0.size() == hidden) return add(zeros, reshape(h0, {hidden}));
  if (h0.size() == batch * hidden) return reshape(h0, {batch, hidden});
  throw DimensionError("initial state " + shape_str(h0.shape()) + " does not fit [" + std::to_string(batch) + "x" +
                       std::to_string(hidden) + "]");
}

inline Tensor step_input(const Tensor& projected, std::size_t t) {
  const auto& s = projected.shape();
  return reshape(slice(projected, 1, t, 1), {s[0], s[2]});
}

// Runs `step` over time (optionally reversed) and restores the original time
// order of the collected [B, H] states: [B, T, H].
template <class Step>
Tensor scan(std::size_t batch, std::size_t steps, std::size_t hidden, bool reverse, Step step) {
  std::vector<Tensor> outs(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    std::size_t t = reverse ? steps - 1 - i : i;
    outs[t] = reshape(step(t), {batch, 1, hidden});
  }
  return concat(outs, 1);
}

inline Tensor unbatch_like(const Tensor& y, const Tensor& input) {
  return input.rank() == 3 ? y : reshape(y, {y.dim(1), y.dim(2)});
}

}  // namespace detail

// One GRU layer, optionally bidirectional. Gate blocks in the 3H-wide weight
// columns are ordered [reset r, update z, candidate n]:
//   r = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
//   z = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
//   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
//   h' = (1 - z) * n + z * h
class GruLayer {
public:
  struct Direction {
    Tensor w_ih;  // [in, 3H]
    Tensor w_hh;  // [H, 3H]
    Tensor b_ih;  // [3H]
    Tensor b_hh;  // [3H]
  };

  GruLayer() = default;
  GruLayer(std::size_t input_dim, std::size_t hidden_dim, bool bidirectional, Rng& rng)
      : input_dim_(input_dim), hidden_dim_(hidden_dim) {
    for (int d = 0; d < (bidirectional ? 2 : 1); ++d) {
      dirs.push_back({init_uniform({input_dim, 3 * hidden_dim}, input_dim, rng),
                      init_uniform({hidden_dim, 3 * hidden_dim}, hidden_dim, rng),
                      init_uniform({3 * hidden_dim}, input_dim, rng), init_uniform({3 * hidden_dim}, hidden_dim, rng)});
    }
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  bool bidirectional() const { return dirs.size() == 2; }
  std::size_t output_dim() const { return hidden_dim_ * dirs.size(); }

  // x [T, in] or [B, T, in] -> [T, out] or [B, T, out], out = H or 2H.
  Tensor forward(const Tensor& x, const Tensor& h0 = {}) const {
    Tensor xb = detail::as_batched(x, input_dim_, "gru_forward");
    const std::size_t B = xb.dim(0), T = xb.dim(1), H = hidden_dim_;
    std::vector<Tensor> per_dir;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      const auto& p = dirs[d];
      Tensor xp = add(matmul(xb, p.w_ih), p.b_ih);
      Tensor h = detail::initial_state(h0, B, H);
      per_dir.push_back(detail::scan(B, T, H, d == 1, [&](std::size_t t) {
        Tensor xt = detail::step_input(xp, t);
        Tensor hp = add(matmul(h, p.w_hh), p.b_hh);
        Tensor r = sigmoid(add(slice(xt, 1, 0, H), slice(hp, 1, 0, H)));
        Tensor z = sigmoid(add(slice(xt, 1, H, H), slice(hp, 1, H, H)));
        Tensor n = tanh(add(slice(xt, 1, 2 * H, H), mul(r, slice(hp, 1, 2 * H, H))));
        h = add(n, mul(z, sub(h, n)));
        return h;
      }));
    }
    Tensor y = per_dir.size() == 1 ? per_dir[0] : concat(per_dir, 2);
    return detail::unbatch_like(y, x);
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      auto p = join_name(prefix, d == 0 ? "fwd" : "bwd");
      out.push_back({p + ".w_ih", dirs[d].w_ih, true});
      out.push_back({p + ".w_hh", dirs[d].w_hh, true});
      out.push_back({p + ".b_ih", dirs[d].b_ih, false});
      out.push_back({p + ".b_hh", dirs[d].b_hh, false});
    }
  }

  std::vector<Direction> dirs;

private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

inline Tensor gru_forward(const Tensor& x, const GruLayer& layer, const Tensor& h0 = {}) { return layer.forward(x, h0); }

// One LSTM layer, optionally bidirectional. Gate blocks in the 4H-wide
// columns are ordered [input i, forget f, cell g, output o]:
//   c' = f * c + i * g,  h' = o * tanh(c')
class LstmLayer {
public:
  struct Direction {
    Tensor w_ih;  // [in, 4H]
    Tensor w_hh;  // [H, 4H]
    Tensor b_ih;  // [4H]
    Tensor b_hh;  // [4H]
  };

  LstmLayer() = default;
  LstmLayer(std::size_t input_dim, std::size_t hidden_dim, bool bidirectional, Rng& rng)
      : input_dim_(input_dim), hidden_dim_(hidden_dim) {
    for (int d = 0; d < (bidirectional ? 2 : 1); ++d) {
      dirs.push_back({init_uniform({input_dim, 4 * hidden_dim}, input_dim, rng),
                      init_uniform({hidden_dim, 4 * hidden_dim}, hidden_dim, rng),
                      init_uniform({4 * hidden_dim}, input_dim, rng), init_uniform({4 * hidden_dim}, hidden_dim, rng)});
    }
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  bool bidirectional() const { return dirs.size() == 2; }
  std::size_t output_dim() const { return hidden_dim_ * dirs.size(); }

  Tensor forward(const Tensor& x) const {
    Tensor xb = detail::as_batched(x, input_dim_, "lstm_forward");
    const std::size_t B = xb.dim(0), T = xb.dim(1), H = hidden_dim_;
    std::vector<Tensor> per_dir;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      const auto& p = dirs[d];
      Tensor xp = add(matmul(xb, p.w_ih), p.b_ih);
      Tensor h = Tensor::zeros({B, H});
      Tensor c = Tensor::zeros({B, H});
      per_dir.push_back(detail::scan(B, T, H, d == 1, [&](std::size_t t) {
        Tensor gates = add(detail::step_input(xp, t), add(matmul(h, p.w_hh), p.b_hh));
        Tensor i = sigmoid(slice(gates, 1, 0, H));
        Tensor f = sigmoid(slice(gates, 1, H, H));
        Tensor g = tanh(slice(gates, 1, 2 * H, H));
        Tensor o = sigmoid(slice(gates, 1, 3 * H, H));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        return h;
      }));
    }
    Tensor y = per_dir.size() == 1 ? per_dir[0] : concat(per_dir, 2);
    return detail::unbatch_like(y, x);
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      auto p = join_name(prefix, d == 0 ? "fwd" : "bwd");
      out.push_back({p + ".w_ih", dirs[d].w_ih, true});
      out.push_back({p + ".w_hh", dirs[d].w_hh, true});
      out.push_back({p + ".b_ih", dirs[d].b_ih, false});
      out.push_back({p + ".b_hh", dirs[d].b_hh, false});
    }
  }

  std::vector<Direction> dirs;

private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

inline Tensor lstm_forward(const Tensor& y, const LstmLayer& layer) { return layer.forward(y); }

}  // namespace mmfuse
