#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/core/tensor.hpp"

// Differentiable operations over Tensor.
//
// Broadcasting (binary elementwise ops): shapes are aligned on their trailing
// axes; a missing leading axis or an axis of length 1 expands to the other
// operand's length. Any other mismatch is a DimensionError.

namespace mmfuse {

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

inline double& grad_of(const std::shared_ptr<Node>& n, std::size_t i) { return n->ensure_grad()[i]; }

// out[i] = in[src[i]]; the backward scatters. Shared by reshape-free index ops.
inline Tensor index_map(const char* op, const Tensor& x, Shape out_shape, std::vector<std::size_t> src) {
  std::vector<double> out(src.size());
  auto xv = x.values();
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = xv[src[i]];
  return Tensor::make_result(op, std::move(out_shape), std::move(out), {x},
                             [src = std::move(src)](Node& self) {
                               auto& in = self.inputs[0];
                               if (!in->requires_grad) return;
                               auto& g = in->ensure_grad();
                               for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
                             });
}

struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::vector<std::size_t> a_idx, b_idx;
};

inline BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  std::size_t r = std::max(a.size(), b.size());
  Shape ap(r, 1), bp(r, 1);
  std::copy(a.begin(), a.end(), ap.begin() + static_cast<std::ptrdiff_t>(r - a.size()));
  std::copy(b.begin(), b.end(), bp.begin() + static_cast<std::ptrdiff_t>(r - b.size()));
  p.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (ap[i] == bp[i] || bp[i] == 1) {
      p.out[i] = ap[i];
    } else if (ap[i] == 1) {
      p.out[i] = bp[i];
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
  }
  auto as = strides_of(ap), bs = strides_of(bp);
  std::size_t n = numel(p.out);
  p.a_idx.resize(n);
  p.b_idx.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t ai = 0, bi = 0;
  for (std::size_t k = 0; k < n; ++k) {
    p.a_idx[k] = ai;
    p.b_idx[k] = bi;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      if (ap[d] != 1) ai += as[d];
      if (bp[d] != 1) bi += bs[d];
      if (idx[d] < p.out[d]) break;
      if (ap[d] != 1) ai -= as[d] * ap[d];
      if (bp[d] != 1) bi -= bs[d] * bp[d];
      idx[d] = 0;
    }
  }
  return p;
}

// f(a, b) with partials da(a, b, out), db(a, b, out).
template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  auto plan = plan_broadcast(a.shape(), b.shape(), op);
  auto av = a.values(), bv = b.values();
  std::size_t n = numel(plan.out);
  std::vector<double> out(n);
  if (plan.same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[plan.a_idx[i]], bv[plan.b_idx[i]]);
  }
  Shape shape = plan.out;
  return Tensor::make_result(op, std::move(shape), std::move(out), {a, b}, [plan = std::move(plan), da, db](Node& self) {
    auto& A = self.inputs[0];
    auto& B = self.inputs[1];
    const auto& av = A->value;
    const auto& bv = B->value;
    std::size_t n = self.value.size();
    auto ai = [&](std::size_t i) { return plan.same ? i : plan.a_idx[i]; };
    auto bi = [&](std::size_t i) { return plan.same ? i : plan.b_idx[i]; };
    if (A->requires_grad) {
      auto& g = A->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[ai(i)] += self.grad[i] * da(av[ai(i)], bv[bi(i)], self.value[i]);
    }
    if (B->requires_grad) {
      auto& g = B->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[bi(i)] += self.grad[i] * db(av[ai(i)], bv[bi(i)], self.value[i]);
    }
  });
}

// f(x) with derivative df(x, out).
template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return Tensor::make_result(op, x.shape(), std::move(out), {x}, [df](Node& self) {
    auto& X = self.inputs[0];
    auto& g = X->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(X->value[i], self.value[i]);
  });
}

inline double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

inline Tensor scale(const Tensor& x, double c) {
  return detail::unary("scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(const Tensor& x, double c) {
  return detail::unary("add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary("sigmoid", x, detail::sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

inline Tensor exp(const Tensor& x) {
  return detail::unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& x) {
  return detail::unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

// Gradient passes only where the input lies inside [lo, hi].
inline Tensor clamp(const Tensor& x, double lo, double hi) {
  return detail::unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

inline Tensor sum(const Tensor& x) {
  auto v = x.values();
  double s = std::accumulate(v.begin(), v.end(), 0.0);
  return Tensor::make_result("sum", {1}, {s}, {x}, [](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

// Mean over one axis; the axis is removed from the shape (a rank-1 input yields [1]).
inline Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const auto& s = x.shape();
  if (axis >= s.size()) throw DimensionError("mean_axis: axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1, n = s[axis];
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) os.push_back(s[i]);
  if (os.empty()) os.push_back(1);
  std::vector<double> out(outer * inner, 0.0);
  auto xv = x.values();
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * n + k) * inner + i] * inv;
  return Tensor::make_result("mean_axis", os, std::move(out), {x}, [outer, inner, n, inv](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i) g[(o * n + k) * inner + i] += self.grad[o * inner + i] * inv;
  });
}

// ---- shape manipulation ----------------------------------------------------

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.values().begin(), x.values().end());
  return Tensor::make_result("reshape", std::move(shape), std::move(out), {x}, [](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// Reorders axes: output axis i is input axis perm[i].
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const auto& s = x.shape();
  if (perm.size() != s.size()) throw DimensionError("permute: rank mismatch for " + shape_str(s));
  std::vector<bool> used(s.size(), false);
  for (auto p : perm) {
    if (p >= s.size() || used[p]) throw DimensionError("permute: invalid permutation");
    used[p] = true;
  }
  auto in_strides = detail::strides_of(s);
  Shape os(s.size());
  std::vector<std::size_t> st(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    os[i] = s[perm[i]];
    st[i] = in_strides[perm[i]];
  }
  std::size_t n = x.size();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> idx(s.size(), 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    src[k] = off;
    for (std::size_t d = os.size(); d-- > 0;) {
      ++idx[d];
      off += st[d];
      if (idx[d] < os[d]) break;
      off -= st[d] * os[d];
      idx[d] = 0;
    }
  }
  return detail::index_map("permute", x, std::move(os), std::move(src));
}

// Swaps the last two axes.
inline Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) throw DimensionError("transpose: need rank >= 2, got " + shape_str(x.shape()));
  std::vector<std::size_t> perm(x.rank());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(x, perm);
}

inline Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis])
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os[axis] = length;
  std::vector<std::size_t> src;
  src.reserve(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < length; ++k)
      for (std::size_t i = 0; i < inner; ++i) src.push_back((o * s[axis] + start + k) * inner + i);
  return detail::index_map("slice", x, std::move(os), std::move(src));
}

// Flat gather into a rank-1 tensor.
inline Tensor gather(const Tensor& x, std::vector<std::size_t> flat_indices) {
  if (flat_indices.empty()) throw DimensionError("gather: empty index list");
  for (auto i : flat_indices)
    if (i >= x.size()) throw DimensionError("gather: index out of range for " + shape_str(x.shape()));
  Shape os{flat_indices.size()};
  return detail::index_map("gather", x, std::move(os), std::move(flat_indices));
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: empty tensor list");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) throw DimensionError("concat: axis out of range for " + shape_str(ref));
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == ref[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " does not match " + shape_str(ref) + " off axis " +
                                  std::to_string(axis));
    total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  Shape os = ref;
  os[axis] = total;
  std::vector<double> out(numel(os));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    std::size_t len = p.shape()[axis] * inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + static_cast<std::ptrdiff_t>(o * len), pv.begin() + static_cast<std::ptrdiff_t>((o + 1) * len),
                out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + off));
    off += len;
  }
  return Tensor::make_result("concat", std::move(os), std::move(out), parts,
                             [outer, inner, total, axis, offsets](detail::Node& self) {
                               for (std::size_t p = 0; p < self.inputs.size(); ++p) {
                                 auto& in = self.inputs[p];
                                 if (!in->requires_grad) continue;
                                 auto& g = in->ensure_grad();
                                 std::size_t len = in->shape[axis] * inner;
                                 for (std::size_t o = 0; o < outer; ++o)
                                   for (std::size_t i = 0; i < len; ++i)
                                     g[o * len + i] += self.grad[o * total * inner + offsets[p] + i];
                               }
                             });
}

// ---- linear algebra --------------------------------------------------------

// Matrix product contracting a's last axis with b's second-to-last axis.
//   b rank 2:            a [..., k] x b [k, m] -> [..., m]
//   equal ranks >= 3:    leading (batch) axes must agree; batched product.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  auto fail = [&] { throw DimensionError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs)); };
  if (as.empty() || bs.size() < 2 || (as.size() == 1 && bs.size() != 2)) fail();
  std::size_t batch = 1, n = 0, k = as.back(), m = bs.back();
  bool shared_b = bs.size() == 2;
  Shape os;
  if (shared_b) {
    if (bs[0] != k) fail();
    n = a.size() / k;
    os.assign(as.begin(), as.end() - 1);
    os.push_back(m);
  } else {
    if (as.size() != bs.size() || bs[bs.size() - 2] != k) fail();
    for (std::size_t i = 0; i + 2 < as.size(); ++i) {
      if (as[i] != bs[i]) fail();
      batch *= as[i];
    }
    n = as[as.size() - 2];
    os = as;
    os.back() = m;
  }
  auto av = a.values(), bv = b.values();
  std::vector<double> out(batch * n * m, 0.0);
  for (std::size_t bt = 0; bt < batch; ++bt) {
    const double* A = av.data() + bt * n * k;
    const double* B = bv.data() + (shared_b ? 0 : bt * k * m);
    double* C = out.data() + bt * n * m;
    for (std::size_t i = 0; i < n; ++i) {
      double* Ci = C + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        if (aip == 0.0) continue;
        const double* Bp = B + p * m;
        for (std::size_t j = 0; j < m; ++j) Ci[j] += aip * Bp[j];
      }
    }
  }
  return Tensor::make_result("matmul", std::move(os), std::move(out), {a, b},
                             [batch, n, k, m, shared_b](detail::Node& self) {
                               auto& A = self.inputs[0];
                               auto& B = self.inputs[1];
                               const double* G = self.grad.data();
                               if (A->requires_grad) {
                                 auto& ga = A->ensure_grad();
                                 for (std::size_t bt = 0; bt < batch; ++bt) {
                                   const double* Bb = B->value.data() + (shared_b ? 0 : bt * k * m);
                                   for (std::size_t i = 0; i < n; ++i) {
                                     const double* Gi = G + (bt * n + i) * m;
                                     double* gai = ga.data() + (bt * n + i) * k;
                                     for (std::size_t p = 0; p < k; ++p) {
                                       const double* Bp = Bb + p * m;
                                       double acc = 0.0;
                                       for (std::size_t j = 0; j < m; ++j) acc += Gi[j] * Bp[j];
                                       gai[p] += acc;
                                     }
                                   }
                                 }
                               }
                               if (B->requires_grad) {
                                 auto& gb = B->ensure_grad();
                                 for (std::size_t bt = 0; bt < batch; ++bt) {
                                   const double* Ab = A->value.data() + bt * n * k;
                                   double* gbb = gb.data() + (shared_b ? 0 : bt * k * m);
                                   for (std::size_t i = 0; i < n; ++i) {
                                     const double* Gi = G + (bt * n + i) * m;
                                     for (std::size_t p = 0; p < k; ++p) {
                                       const double aip = Ab[i * k + p];
                                       if (aip == 0.0) continue;
                                       double* gbp = gbb + p * m;
                                       for (std::size_t j = 0; j < m; ++j) gbp[j] += aip * Gi[j];
                                     }
                                   }
                                 }
                               }
                             });
}

// ---- normalization-style ops -----------------------------------------------

// Softmax over the last axis, stabilized by subtracting each slice's max.
inline Tensor softmax_last_axis(const Tensor& x) {
  const std::size_t L = x.shape().back();
  const std::size_t rows = x.size() / L;
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = xv.data() + r * L;
    double* yi = out.data() + r * L;
    double mx = *std::max_element(xi, xi + L);
    double z = 0.0;
    for (std::size_t j = 0; j < L; ++j) z += (yi[j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < L; ++j) yi[j] /= z;
  }
  return Tensor::make_result("softmax", x.shape(), std::move(out), {x}, [rows, L](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * L;
      const double* gy = self.grad.data() + r * L;
      double dot = 0.0;
      for (std::size_t j = 0; j < L; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < L; ++j) g[r * L + j] += y[j] * (gy[j] - dot);
    }
  });
}

// Per last-axis slice: (x - mean) / sqrt(var + eps) * gain + bias, population variance.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  const std::size_t D = x.shape().back();
  if (gain.size() != D || bias.size() != D)
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + " vs features of " + shape_str(x.shape()));
  const std::size_t rows = x.size() / D;
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  std::vector<double> out(x.size()), xhat(x.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = xv.data() + r * D;
    double mu = 0.0;
    for (std::size_t j = 0; j < D; ++j) mu += xi[j];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t j = 0; j < D; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(D);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < D; ++j) {
      double h = (xi[j] - mu) * inv_std[r];
      xhat[r * D + j] = h;
      out[r * D + j] = h * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [rows, D, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& X = self.inputs[0];
        auto& Gn = self.inputs[1];
        auto& Bs = self.inputs[2];
        const double* G = self.grad.data();
        if (Gn->requires_grad || Bs->requires_grad) {
          auto& gg = Gn->ensure_grad();
          auto& gb = Bs->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < D; ++j) {
              gg[j] += G[r * D + j] * xhat[r * D + j];
              gb[j] += G[r * D + j];
            }
        }
        if (X->requires_grad) {
          auto& gx = X->ensure_grad();
          const auto& gain = Gn->value;
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
              double dh = G[r * D + j] * gain[j];
              m1 += dh;
              m2 += dh * xhat[r * D + j];
            }
            m1 /= static_cast<double>(D);
            m2 /= static_cast<double>(D);
            for (std::size_t j = 0; j < D; ++j) {
              double dh = G[r * D + j] * gain[j];
              gx[r * D + j] += inv_std[r] * (dh - m1 - xhat[r * D + j] * m2);
            }
          }
        }
      });
}

// Same-padded 1-D convolution along time (cross-correlation).
//   x [T, c_in] or [B, T, c_in]; weight [kernel, c_in, c_out]; bias [c_out].
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (ws.size() != 3 || ws[0] % 2 == 0) throw DimensionError("conv1d: weight must be [odd kernel, c_in, c_out], got " + shape_str(ws));
  if ((xs.size() != 2 && xs.size() != 3) || xs.back() != ws[1])
    throw DimensionError("conv1d: input " + shape_str(xs) + " does not match weight " + shape_str(ws));
  if (bias.size() != ws[2]) throw DimensionError("conv1d: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(ws));
  const std::size_t K = ws[0], Ci = ws[1], Co = ws[2];
  const std::size_t T = xs[xs.size() - 2];
  const std::size_t B = xs.size() == 3 ? xs[0] : 1;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);
  Shape os = xs;
  os.back() = Co;
  auto xv = x.values(), wv = weight.values(), bv = bias.values();
  std::vector<double> out(B * T * Co);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      double* yo = out.data() + (b * T + t) * Co;
      std::copy(bv.begin(), bv.end(), yo);
      for (std::size_t kk = 0; kk < K; ++kk) {
        std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(kk) - pad;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const double* xi = xv.data() + (b * T + static_cast<std::size_t>(src)) * Ci;
        const double* wk = wv.data() + kk * Ci * Co;
        for (std::size_t c = 0; c < Ci; ++c) {
          const double xc = xi[c];
          const double* wc = wk + c * Co;
          for (std::size_t o = 0; o < Co; ++o) yo[o] += xc * wc[o];
        }
      }
    }
  return Tensor::make_result("conv1d", std::move(os), std::move(out), {x, weight, bias},
                             [B, T, K, Ci, Co, pad](detail::Node& self) {
                               auto& X = self.inputs[0];
                               auto& W = self.inputs[1];
                               auto& Bi = self.inputs[2];
                               const double* G = self.grad.data();
                               if (Bi->requires_grad) {
                                 auto& gb = Bi->ensure_grad();
                                 for (std::size_t r = 0; r < B * T; ++r)
                                   for (std::size_t o = 0; o < Co; ++o) gb[o] += G[r * Co + o];
                               }
                               const bool gx_on = X->requires_grad, gw_on = W->requires_grad;
                               if (!gx_on && !gw_on) return;
                               double* gx = gx_on ? X->ensure_grad().data() : nullptr;
                               double* gw = gw_on ? W->ensure_grad().data() : nullptr;
                               for (std::size_t b = 0; b < B; ++b)
                                 for (std::size_t t = 0; t < T; ++t) {
                                   const double* go = G + (b * T + t) * Co;
                                   for (std::size_t kk = 0; kk < K; ++kk) {
                                     std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(kk) - pad;
                                     if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
                                     std::size_t xoff = (b * T + static_cast<std::size_t>(src)) * Ci;
                                     for (std::size_t c = 0; c < Ci; ++c) {
                                       const double* wc = W->value.data() + (kk * Ci + c) * Co;
                                       if (gx) {
                                         double acc = 0.0;
                                         for (std::size_t o = 0; o < Co; ++o) acc += go[o] * wc[o];
                                         gx[xoff + c] += acc;
                                       }
                                       if (gw) {
                                         const double xc = X->value[xoff + c];
                                         double* gwc = gw + (kk * Ci + c) * Co;
                                         for (std::size_t o = 0; o < Co; ++o) gwc[o] += xc * go[o];
                                       }
                                     }
                                   }
                                 }
                             });
}

}  // namespace mmfuse
