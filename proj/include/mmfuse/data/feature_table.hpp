#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mmfuse/core/error.hpp"

namespace mmfuse::data {

// Per-timestep features of one modality.
// CSV layout: header `timestamp,segment_id,f_0,...,f_{d-1}`, integer
// millisecond timestamps, strictly increasing within a segment.
struct FeatureTable {
  std::string modality;
  std::vector<std::string> columns;  // feature column names only
  std::vector<std::int64_t> timestamps;
  std::vector<std::int64_t> segment_ids;
  std::vector<double> values;  // rows x arity, row-major

  std::size_t arity() const { return columns.size(); }
  std::size_t rows() const { return timestamps.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * arity() + col]; }

  void append_row(std::int64_t ts, std::int64_t segment, const std::vector<double>& features) {
    timestamps.push_back(ts);
    segment_ids.push_back(segment);
    values.insert(values.end(), features.begin(), features.end());
  }

  // One table per distinct segment id, in order of first appearance.
  std::vector<FeatureTable> split_segments() const {
    std::vector<FeatureTable> out;
    std::map<std::int64_t, std::size_t> index;
    for (std::size_t r = 0; r < rows(); ++r) {
      auto [it, fresh] = index.emplace(segment_ids[r], out.size());
      if (fresh) out.push_back(FeatureTable{modality, columns, {}, {}, {}});
      auto& t = out[it->second];
      t.timestamps.push_back(timestamps[r]);
      t.segment_ids.push_back(segment_ids[r]);
      t.values.insert(t.values.end(), values.begin() + static_cast<std::ptrdiff_t>(r * arity()),
                      values.begin() + static_cast<std::ptrdiff_t>((r + 1) * arity()));
    }
    return out;
  }
};

// Known feature-set widths, keyed by lower-case name.
inline std::optional<std::size_t> known_feature_arity(std::string_view name) {
  static const std::map<std::string, std::size_t, std::less<>> table = {
      {"egemaps", 88}, {"deepspectrum", 1024}, {"ds", 1024}, {"is09", 384},  {"is13", 6373},
      {"mfcc", 120},   {"cnn14", 2048},        {"bert", 768}, {"phrase", 256},
  };
  std::string key(name);
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ": row " + std::to_string(line);
}

inline double parse_real(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  s = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw DataError(where(path, line) + ": cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::int64_t parse_int(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  s = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw DataError(where(path, line) + ": cannot parse integer '" + std::string(s) + "'");
  return v;
}

inline std::ifstream open(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return is;
}

}  // namespace detail

// Parses a feature CSV. When `feature_set` names a known set, the number of
// feature columns must equal that set's width. Row numbers in errors are
// 1-based file lines (the header is row 1).
inline FeatureTable load_feature_csv(const std::filesystem::path& path, const std::string& modality = "",
                                     const std::string& feature_set = "") {
  auto is = detail::open(path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": missing header row");
  auto header = detail::split_csv(line);
  if (header.size() < 3 || detail::trim(header[0]) != "timestamp" || detail::trim(header[1]) != "segment_id")
    throw DataError(path.string() + ": header must start with timestamp,segment_id and name at least one feature");
  FeatureTable t;
  t.modality = modality.empty() ? path.stem().string() : modality;
  for (std::size_t i = 2; i < header.size(); ++i) t.columns.emplace_back(detail::trim(header[i]));
  if (!feature_set.empty()) {
    if (auto want = known_feature_arity(feature_set); want && *want != t.arity())
      throw DataError(path.string() + ": feature set '" + feature_set + "' has " + std::to_string(*want) +
                      " features, file has " + std::to_string(t.arity()) + " (arity mismatch)");
  }
  std::size_t lineno = 1;
  std::vector<double> row(t.arity());
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw DataError(detail::where(path, lineno) + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()) + " (ragged row)");
    const auto ts = detail::parse_int(cells[0], path, lineno);
    const auto seg = detail::parse_int(cells[1], path, lineno);
    if (!t.timestamps.empty() && t.segment_ids.back() == seg && ts <= t.timestamps.back())
      throw DataError(detail::where(path, lineno) + ": timestamp " + std::to_string(ts) + " does not increase past " +
                      std::to_string(t.timestamps.back()) + " (non-monotone timestamps)");
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = detail::parse_real(cells[i + 2], path, lineno);
    t.append_row(ts, seg, row);
  }
  if (t.rows() == 0) throw DataError(path.string() + ": no data rows");
  return t;
}

// Per-timestep label CSV: `timestamp,<target>,...` (e.g. timestamp,arousal,valence).
// Returned as a single-segment table whose columns are the targets.
inline FeatureTable load_series_labels(const std::filesystem::path& path) {
  auto is = detail::open(path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": missing header row");
  auto header = detail::split_csv(line);
  if (header.size() < 2 || detail::trim(header[0]) != "timestamp")
    throw DataError(path.string() + ": label header must start with timestamp");
  FeatureTable t;
  t.modality = "labels";
  for (std::size_t i = 1; i < header.size(); ++i) t.columns.emplace_back(detail::trim(header[i]));
  std::size_t lineno = 1;
  std::vector<double> row(t.arity());
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw DataError(detail::where(path, lineno) + ": expected " + std::to_string(header.size()) + " fields (ragged row)");
    const auto ts = detail::parse_int(cells[0], path, lineno);
    if (!t.timestamps.empty() && ts <= t.timestamps.back())
      throw DataError(detail::where(path, lineno) + ": non-monotone timestamps");
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = detail::parse_real(cells[i + 1], path, lineno);
    t.append_row(ts, 0, row);
  }
  if (t.rows() == 0) throw DataError(path.string() + ": no label rows");
  return t;
}

struct SampleLabels {
  std::vector<std::string> targets;
  std::map<std::string, std::vector<double>> by_sample;
};

// Per-sample label CSV: `sample_id,<target>,...`.
inline SampleLabels load_sample_labels(const std::filesystem::path& path) {
  auto is = detail::open(path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": missing header row");
  auto header = detail::split_csv(line);
  if (header.size() < 2 || detail::trim(header[0]) != "sample_id")
    throw DataError(path.string() + ": label header must start with sample_id");
  SampleLabels out;
  for (std::size_t i = 1; i < header.size(); ++i) out.targets.emplace_back(detail::trim(header[i]));
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != header.size())
      throw DataError(detail::where(path, lineno) + ": expected " + std::to_string(header.size()) + " fields (ragged row)");
    std::vector<double> v;
    for (std::size_t i = 1; i < cells.size(); ++i) v.push_back(detail::parse_real(cells[i], path, lineno));
    std::string id(detail::trim(cells[0]));
    if (!out.by_sample.emplace(id, std::move(v)).second)
      throw DataError(detail::where(path, lineno) + ": duplicate sample_id '" + id + "'");
  }
  return out;
}

inline void write_feature_csv(const std::filesystem::path& path, const FeatureTable& t) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "timestamp,segment_id";
  for (const auto& c : t.columns) os << ',' << c;
  os << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    os << t.timestamps[r] << ',' << t.segment_ids[r];
    for (std::size_t c = 0; c < t.arity(); ++c) os << ',' << t.at(r, c);
    os << '\n';
  }
}

inline std::vector<std::string> default_feature_columns(std::size_t d) {
  std::vector<std::string> c;
  for (std::size_t i = 0; i < d; ++i) c.push_back("f_" + std::to_string(i));
  return c;
}

}  // namespace mmfuse::data
