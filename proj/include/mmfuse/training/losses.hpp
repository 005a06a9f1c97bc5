#pragma once

#include "mmfuse/core/ops.hpp"

namespace mmfuse {

// -mean(y ln p + (1 - y) ln(1 - p)), p clamped to [1e-7, 1 - 1e-7].
inline Tensor bce_loss(const Tensor& p, const Tensor& y) {
  if (p.size() != y.size()) throw DimensionError("bce_loss: " + shape_str(p.shape()) + " vs " + shape_str(y.shape()));
  Tensor pf = clamp(reshape(p, {p.size()}), 1e-7, 1.0 - 1e-7);
  Tensor yf = reshape(y, {y.size()});
  Tensor one_minus_y = add_scalar(scale(yf, -1.0), 1.0);
  Tensor ll = add(mul(yf, log(pf)), mul(one_minus_y, log(add_scalar(scale(pf, -1.0), 1.0))));
  return scale(mean(ll), -1.0);
}

inline Tensor mse_loss(const Tensor& pred, const Tensor& y) {
  if (pred.size() != y.size()) throw DimensionError("mse_loss: " + shape_str(pred.shape()) + " vs " + shape_str(y.shape()));
  return mean(square(sub(reshape(pred, {pred.size()}), reshape(y, {y.size()}))));
}

// 1 - CCC(pred, y) over all entries, population moments. Constant pred and
// target give CCC 1 when equal and 0 otherwise (the gradient is then zero).
inline Tensor ccc_loss(const Tensor& pred, const Tensor& y) {
  if (pred.size() != y.size()) throw DimensionError("ccc_loss: " + shape_str(pred.shape()) + " vs " + shape_str(y.shape()));
  if (pred.size() < 2) throw DimensionError("ccc_loss: need at least two points");
  Tensor p = reshape(pred, {pred.size()});
  Tensor t = reshape(y, {y.size()});
  Tensor mp = mean(p), mt = mean(t);
  Tensor dp = sub(p, mp), dt = sub(t, mt);
  Tensor vp = mean(square(dp)), vt = mean(square(dt));
  Tensor cov = mean(mul(dp, dt));
  const double denom_v = vp.item() + vt.item() + (mp.item() - mt.item()) * (mp.item() - mt.item());
  if (denom_v == 0.0) return scale(sum(p), 0.0);
  if (vp.item() == 0.0 && vt.item() == 0.0) return add_scalar(scale(sum(p), 0.0), 1.0);
  Tensor denom = add(add(vp, vt), square(sub(mp, mt)));
  return add_scalar(scale(div(cov, denom), -2.0), 1.0);
}

}  // namespace mmfuse
