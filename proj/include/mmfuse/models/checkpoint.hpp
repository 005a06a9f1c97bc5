#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/parameter.hpp"

// Checkpoint file layout (all integers unsigned 64-bit little-endian, all
// reals IEEE-754 binary64 little-endian):
//
//   magic    8 bytes  "MMFCKPT1"
//   seed     u64
//   epoch    u64
//   config   u64 length + UTF-8 bytes (the resolved experiment config)
//   count    u64 number of tensors
//   tensor*  u64 name length + name bytes, u64 rank, rank x u64 dims,
//            prod(dims) x f64 values
//
// Values are stored as raw bit patterns, so a load reproduces them exactly.

namespace mmfuse {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::string config;
  std::vector<NamedTensor> tensors;

  static Checkpoint capture(const ParameterList& params, std::uint64_t seed, std::uint64_t epoch, std::string config = {}) {
    Checkpoint c;
    c.seed = seed;
    c.epoch = epoch;
    c.config = std::move(config);
    for (const auto& p : params)
      c.tensors.push_back({p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
    return c;
  }

  // Copies stored values into same-named parameters; every parameter must be present with a matching shape.
  void restore(ParameterList& params) const {
    std::map<std::string, const NamedTensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t;
    for (auto& p : params) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw std::runtime_error("checkpoint: missing tensor '" + p.name + "'");
      if (it->second->shape != p.tensor.shape())
        throw std::runtime_error("checkpoint: shape mismatch for '" + p.name + "': " + shape_str(it->second->shape) +
                                 " vs " + shape_str(p.tensor.shape()));
      auto dst = p.tensor.mutable_values();
      std::copy(it->second->values.begin(), it->second->values.end(), dst.begin());
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path.string());
    os.write(kMagic, 8);
    put(os, seed);
    put(os, epoch);
    put_string(os, config);
    put(os, tensors.size());
    for (const auto& t : tensors) {
      put_string(os, t.name);
      put(os, t.shape.size());
      for (auto d : t.shape) put(os, d);
      for (double v : t.values) put(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kMagic, 8)) throw std::runtime_error("checkpoint: bad magic in " + path.string());
    Checkpoint c;
    c.seed = get(is);
    c.epoch = get(is);
    c.config = get_string(is);
    const auto count = get(is);
    for (std::uint64_t i = 0; i < count; ++i) {
      NamedTensor t;
      t.name = get_string(is);
      const auto rank = get(is);
      if (rank > 16) throw std::runtime_error("checkpoint: implausible rank for '" + t.name + "'");
      for (std::uint64_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<std::size_t>(get(is)));
      t.values.resize(numel(t.shape));
      for (auto& v : t.values) v = std::bit_cast<double>(get(is));
      c.tensors.push_back(std::move(t));
    }
    return c;
  }

private:
  static constexpr char kMagic[8] = {'M', 'M', 'F', 'C', 'K', 'P', 'T', '1'};

  static void put(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static std::uint64_t get(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  static void put_string(std::ostream& os, const std::string& s) {
    put(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static std::string get_string(std::istream& is) {
    const auto n = get(is);
    if (n > (1ULL << 30)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(static_cast<std::size_t>(n), '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return s;
  }
};

}  // namespace mmfuse
