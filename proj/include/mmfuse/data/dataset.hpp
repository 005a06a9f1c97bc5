#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmfuse/core/tensor.hpp"
#include "mmfuse/data/feature_table.hpp"

namespace mmfuse::data {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  Tensor tensor() const { return Tensor({rows, cols}, data); }
  bool operator==(const Matrix&) const = default;
};

// One sample on a shared time grid: M feature matrices [T, d_m] plus labels.
// Rows at index >= `valid` are zero padding.
struct AlignedSample {
  std::string id;
  std::vector<std::int64_t> timestamps;
  std::vector<Matrix> modalities;
  std::vector<double> label;  // per-sample targets (humor: 1, reaction: 7)
  Matrix series_label;        // per-timestep targets [T, k] (stress)
  std::size_t valid = 0;
  bool padded = false;

  std::size_t length() const { return timestamps.size(); }
  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (const auto& m : modalities) out.push_back(m.tensor());
    return out;
  }
};

using Dataset = std::vector<AlignedSample>;

namespace detail {

// Covered time range [first, last + spacing), spacing = mean row spacing
// (or `hop` for a one-row table).
inline std::pair<std::int64_t, std::int64_t> covered_range(const FeatureTable& t, std::int64_t hop) {
  const auto first = t.timestamps.front(), last = t.timestamps.back();
  const auto n = static_cast<std::int64_t>(t.rows());
  const std::int64_t spacing = n > 1 ? (last - first) / (n - 1) : hop;
  return {first, last + std::max<std::int64_t>(spacing, 1)};
}

}  // namespace detail

// Resamples every table onto the grid start + k*hop, k < T, where the grid
// spans the tables' common covered range and T = floor(overlap / hop). Each
// grid point takes the table's last row at or before it (hold, no
// interpolation).
inline AlignedSample align_modalities(const std::vector<FeatureTable>& tables, std::int64_t hop_ms) {
  if (tables.empty()) throw DataError("align_modalities: no tables");
  if (hop_ms <= 0) throw DataError("align_modalities: hop must be positive");
  std::int64_t start = INT64_MIN, end = INT64_MAX;
  for (const auto& t : tables) {
    if (t.rows() == 0) throw DataError("align_modalities: empty table for modality '" + t.modality + "'");
    auto [a, b] = detail::covered_range(t, hop_ms);
    start = std::max(start, a);
    end = std::min(end, b);
  }
  if (end <= start || (end - start) / hop_ms == 0)
    throw DataError("align_modalities: modalities have no overlapping time range (empty overlap)");
  const auto T = static_cast<std::size_t>((end - start) / hop_ms);
  AlignedSample s;
  s.valid = T;
  for (std::size_t k = 0; k < T; ++k) s.timestamps.push_back(start + static_cast<std::int64_t>(k) * hop_ms);
  for (const auto& t : tables) {
    Matrix m(T, t.arity());
    std::size_t row = 0;
    for (std::size_t k = 0; k < T; ++k) {
      while (row + 1 < t.rows() && t.timestamps[row + 1] <= s.timestamps[k]) ++row;
      std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(row * t.arity()), t.arity(),
                  m.data.begin() + static_cast<std::ptrdiff_t>(k * t.arity()));
    }
    s.modalities.push_back(std::move(m));
  }
  return s;
}

// Converts an aligned modality back to a table (segment 0) for re-alignment or export.
inline FeatureTable to_table(const AlignedSample& s, std::size_t modality, std::string name = "") {
  FeatureTable t;
  const auto& m = s.modalities.at(modality);
  t.modality = std::move(name);
  t.columns = default_feature_columns(m.cols);
  for (std::size_t r = 0; r < s.valid; ++r)
    t.append_row(s.timestamps[r], 0,
                 std::vector<double>(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols),
                                     m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols)));
  return t;
}

// Fixed-length windows starting at 0, hop, 2*hop, ... up to and including the
// first window that reaches the end. A short final window is zero-padded and
// flagged. Per-sample labels are copied; per-timestep labels are sliced.
inline std::vector<AlignedSample> window(const AlignedSample& sample, std::size_t win_len, std::size_t hop) {
  if (win_len == 0 || hop == 0) throw DataError("window: length and hop must be positive");
  std::vector<AlignedSample> out;
  const std::size_t T = sample.valid;
  const std::int64_t step = sample.timestamps.size() > 1 ? sample.timestamps[1] - sample.timestamps[0] : 1;
  for (std::size_t start = 0, k = 0; start < std::max<std::size_t>(T, 1); start += hop, ++k) {
    AlignedSample w;
    w.id = sample.id + "#" + std::to_string(k);
    w.label = sample.label;
    w.valid = std::min(win_len, T - start);
    w.padded = w.valid < win_len;
    for (std::size_t i = 0; i < win_len; ++i)
      w.timestamps.push_back(start + i < sample.timestamps.size()
                                 ? sample.timestamps[start + i]
                                 : sample.timestamps.back() + static_cast<std::int64_t>(start + i + 1 - sample.timestamps.size()) * step);
    auto cut = [&](const Matrix& m) {
      Matrix o(win_len, m.cols);
      for (std::size_t i = 0; i < w.valid; ++i)
        std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>((start + i) * m.cols), m.cols,
                    o.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
      return o;
    };
    for (const auto& m : sample.modalities) w.modalities.push_back(cut(m));
    if (sample.series_label.rows) w.series_label = cut(sample.series_label);
    out.push_back(std::move(w));
    if (start + win_len >= T) break;
  }
  return out;
}

// Per-modality, per-feature z-score statistics. Features whose std is below
// 1e-8 are stored as mean 0 / std 1, i.e. passed through unchanged.
struct NormStats {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stdev;
};

inline NormStats compute_norm_stats(const Dataset& ds) {
  if (ds.empty()) throw DataError("normalize: empty dataset");
  NormStats st;
  const auto M = ds[0].modalities.size();
  for (std::size_t m = 0; m < M; ++m) {
    const auto d = ds[0].modalities[m].cols;
    std::vector<double> mu(d, 0.0), sd(d, 0.0);
    double n = 0.0;
    for (const auto& s : ds)
      for (std::size_t r = 0; r < s.valid; ++r) {
        for (std::size_t c = 0; c < d; ++c) mu[c] += s.modalities[m](r, c);
        n += 1.0;
      }
    for (auto& v : mu) v /= n;
    for (const auto& s : ds)
      for (std::size_t r = 0; r < s.valid; ++r)
        for (std::size_t c = 0; c < d; ++c) {
          const double e = s.modalities[m](r, c) - mu[c];
          sd[c] += e * e;
        }
    for (std::size_t c = 0; c < d; ++c) {
      sd[c] = std::sqrt(sd[c] / n);
      if (sd[c] < 1e-8) {
        mu[c] = 0.0;
        sd[c] = 1.0;
      }
    }
    st.mean.push_back(std::move(mu));
    st.stdev.push_back(std::move(sd));
  }
  return st;
}

namespace detail {
template <class F>
void for_each_valid(Dataset& ds, const NormStats& st, F f) {
  for (auto& s : ds) {
    if (s.modalities.size() != st.mean.size())
      throw DimensionError("normalize: sample '" + s.id + "' has " + std::to_string(s.modalities.size()) +
                           " modalities, stats have " + std::to_string(st.mean.size()));
    for (std::size_t m = 0; m < s.modalities.size(); ++m) {
      auto& mat = s.modalities[m];
      if (mat.cols != st.mean[m].size())
        throw DimensionError("normalize: modality " + std::to_string(m) + " width " + std::to_string(mat.cols) +
                             " vs stats width " + std::to_string(st.mean[m].size()));
      for (std::size_t r = 0; r < s.valid; ++r)
        for (std::size_t c = 0; c < mat.cols; ++c) mat(r, c) = f(mat(r, c), st.mean[m][c], st.stdev[m][c]);
    }
  }
}
}  // namespace detail

// z-scores valid rows with the given stats, or with stats computed from this
// dataset when none are given (the training-set case). Padding stays zero.
inline std::pair<Dataset, NormStats> normalize(Dataset ds, std::optional<NormStats> stats = std::nullopt) {
  NormStats st = stats ? std::move(*stats) : compute_norm_stats(ds);
  detail::for_each_valid(ds, st, [](double v, double mu, double sd) { return (v - mu) / sd; });
  return {std::move(ds), std::move(st)};
}

inline Dataset denormalize(Dataset ds, const NormStats& st) {
  detail::for_each_valid(ds, st, [](double v, double mu, double sd) { return v * sd + mu; });
  return ds;
}

}  // namespace mmfuse::data
