#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/tensor.hpp"

namespace mmfuse {

// Fixed sinusoidal table: PE(t, 2i) = sin(t / 10000^(2i/d)), PE(t, 2i+1) = cos(same angle).
inline Tensor positional_encode(std::size_t length, std::size_t d_model) {
  std::vector<double> v(length * d_model);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t j = 0; j < d_model; ++j) {
      const double expo = static_cast<double>(j - j % 2) / static_cast<double>(d_model);
      const double angle = static_cast<double>(t) / std::pow(10000.0, expo);
      v[t * d_model + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor({length, d_model}, std::move(v));
}

class PositionalEncoding {
public:
  PositionalEncoding() = default;
  PositionalEncoding(std::size_t max_len, std::size_t d_model)
      : max_len_(max_len), d_model_(d_model), table_(positional_encode(max_len, d_model)) {}

  std::size_t max_len() const { return max_len_; }

  // First `length` rows of the table, [length, d_model].
  Tensor encode(std::size_t length) const {
    if (length == 0 || length > max_len_)
      throw std::out_of_range("positional encoding: length " + std::to_string(length) + " exceeds max_len " +
                              std::to_string(max_len_));
    auto v = table_.values();
    return Tensor({length, d_model_}, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(length * d_model_)));
  }

private:
  std::size_t max_len_ = 0;
  std::size_t d_model_ = 0;
  Tensor table_;
};

}  // namespace mmfuse
