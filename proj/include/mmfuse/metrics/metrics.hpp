#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmfuse/core/error.hpp"

namespace mmfuse::metrics {

// Area under the ROC curve as the Mann-Whitney statistic:
//   (#{pos > neg} + 0.5 #{pos == neg}) / (#pos * #neg)
// computed from tie-averaged ranks in O(n log n).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  std::size_t n = scores.size(), pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("auc: labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("auc: both classes must be present");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of doubled ranks of positives keeps everything integral.
  std::size_t i = 0;
  unsigned long long rank2_pos = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const unsigned long long doubled = static_cast<unsigned long long>(i + 1 + j + 1);  // 2 * average 1-based rank
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank2_pos += doubled;
    i = j + 1;
  }
  const double u2 = static_cast<double>(rank2_pos) - static_cast<double>(pos) * static_cast<double>(pos + 1);
  return u2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

inline double mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

// Lin's concordance correlation with population (1/n) moments.
// Both series constant: 1 if equal, 0 otherwise.
inline double ccc(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw std::invalid_argument("ccc: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("ccc: need at least two points");
  const double n = static_cast<double>(pred.size());
  const double mp = mean(pred), mt = mean(target);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i] - mp, dt = target[i] - mt;
    sxy += dp * dt;
    sxx += dp * dp;
    syy += dt * dt;
  }
  // 2 cov / (var_p + var_t + (mp - mt)^2), scaled through by n.
  const double denom = sxx + syy + n * (mp - mt) * (mp - mt);
  if (denom == 0.0) return 1.0;
  if (sxx == 0.0 && syy == 0.0) return 0.0;
  return 2.0 * sxy / denom;
}

// Stress combined score: arithmetic mean of the arousal and valence CCCs.
inline double combined_stress(double ccc_arousal, double ccc_valence) { return 0.5 * (ccc_arousal + ccc_valence); }

// Named metric values for one evaluation pass, serialized as one CSV row.
struct MetricReport {
  std::string task;
  std::size_t samples = 0;
  std::vector<std::pair<std::string, double>> values;

  void set(const std::string& name, double v) {
    for (auto& kv : values)
      if (kv.first == name) {
        kv.second = v;
        return;
      }
    values.emplace_back(name, v);
  }

  double get(const std::string& name) const {
    for (const auto& kv : values)
      if (kv.first == name) return kv.second;
    throw std::out_of_range("MetricReport: no metric '" + name + "'");
  }

  std::string csv_header() const {
    std::string h = "task,samples";
    for (const auto& kv : values) h += "," + kv.first;
    return h;
  }

  std::string csv_row() const {
    std::ostringstream os;
    os << task << ',' << samples << std::setprecision(17);
    for (const auto& kv : values) os << ',' << kv.second;
    return os.str();
  }

  std::string to_csv() const { return csv_header() + "\n" + csv_row() + "\n"; }
};

}  // namespace mmfuse::metrics
