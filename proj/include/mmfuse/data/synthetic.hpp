#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/rng.hpp"
#include "mmfuse/data/dataset.hpp"

namespace mmfuse::data {

enum class SyntheticTask {
  binary,     // one 0/1 label per sample
  intensity,  // seven targets in (0, 1) per sample
  series,     // per-timestep arousal and valence in (-1, 1)
};

struct SyntheticSpec {
  std::vector<std::size_t> dims;  // feature width per modality
  std::vector<double> noise;      // observation noise std per modality
  std::size_t t_min = 32;
  std::size_t t_max = 32;
  std::size_t samples = 64;
  std::size_t latent_dim = 4;
  SyntheticTask task = SyntheticTask::binary;
  std::uint64_t seed = 0;
  double smoothness = 0.9;        // AR(1) coefficient of the latent path
  double offset_scale = 1.0;      // per-sample latent offset std (class offset for binary)
  double label_smoothing = 0.2;   // EMA rate for series labels
  std::int64_t hop_ms = 40;

  void validate() const {
    if (dims.empty() || dims.size() != noise.size())
      throw std::invalid_argument("SyntheticSpec: need one noise level per modality");
    for (double n : noise)
      if (!(n >= 0.0)) throw std::invalid_argument("SyntheticSpec: noise must be >= 0");
    if (t_min == 0 || t_max < t_min) throw std::invalid_argument("SyntheticSpec: bad length range");
    if (samples == 0 || latent_dim == 0) throw std::invalid_argument("SyntheticSpec: samples and latent_dim must be positive");
    if (!(smoothness >= 0.0 && smoothness < 1.0)) throw std::invalid_argument("SyntheticSpec: smoothness must be in [0, 1)");
    if (task == SyntheticTask::binary && !(offset_scale > 0.0))
      throw std::invalid_argument("SyntheticSpec: binary task needs offset_scale > 0");
  }
};

// Latent-driven multimodal dataset.
//
// A latent path z_t (stationary AR(1) plus a per-sample offset) drives every
// modality through a fixed random linear map, x_{m,t} = A_m z_t + noise_m * e.
// Labels depend only on the latent path:
//   binary:    [mean_t z_t[0] > 0]; z[0] is centred on +/- offset_scale
//   intensity: sigmoid(v_k . mean_t z_t), k = 0..6, fixed v_k
//   series:    tanh(EMA_t(w . z_t)) for arousal and valence, fixed w
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t L = spec.latent_dim, M = spec.dims.size();
  const double inv_sqrt_l = 1.0 / std::sqrt(static_cast<double>(L));

  std::vector<std::vector<double>> maps(M);  // [L, d_m]
  for (std::size_t m = 0; m < M; ++m) {
    maps[m].resize(L * spec.dims[m]);
    for (auto& a : maps[m]) a = rng.normal() * inv_sqrt_l;
  }
  std::vector<std::vector<double>> heads;  // label projections over the latent
  const std::size_t n_heads = spec.task == SyntheticTask::intensity ? 7 : spec.task == SyntheticTask::series ? 2 : 0;
  for (std::size_t k = 0; k < n_heads; ++k) {
    std::vector<double> v(L);
    for (auto& x : v) x = rng.normal() * inv_sqrt_l * 1.5;
    heads.push_back(std::move(v));
  }

  const double innov = std::sqrt(1.0 - spec.smoothness * spec.smoothness);
  Dataset ds;
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t T = spec.t_min + static_cast<std::size_t>(rng.below(spec.t_max - spec.t_min + 1));
    std::vector<double> offset(L);
    if (spec.task == SyntheticTask::binary) {
      offset[0] = (rng.bernoulli(0.5) ? 1.0 : -1.0) * spec.offset_scale;
    } else {
      for (auto& o : offset) o = rng.normal() * spec.offset_scale;
    }
    std::vector<double> z(T * L);
    std::vector<double> state(L);
    for (auto& s : state) s = rng.normal();
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t l = 0; l < L; ++l) {
        if (t > 0) state[l] = spec.smoothness * state[l] + innov * rng.normal();
        z[t * L + l] = state[l] + offset[l];
      }
    }
    if (spec.task == SyntheticTask::binary) {
      // The class lives in the offset: centre the path of z[0] so its mean is exactly +/- offset_scale.
      double drift = 0.0;
      for (std::size_t t = 0; t < T; ++t) drift += (z[t * L] - offset[0]) / static_cast<double>(T);
      for (std::size_t t = 0; t < T; ++t) z[t * L] -= drift;
    }

    AlignedSample s;
    s.id = "synth" + std::to_string(i);
    s.valid = T;
    for (std::size_t t = 0; t < T; ++t) s.timestamps.push_back(static_cast<std::int64_t>(t) * spec.hop_ms);
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t d = spec.dims[m];
      Matrix x(T, d);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t c = 0; c < d; ++c) {
          double v = 0.0;
          for (std::size_t l = 0; l < L; ++l) v += z[t * L + l] * maps[m][l * d + c];
          x(t, c) = v + spec.noise[m] * rng.normal();
        }
      s.modalities.push_back(std::move(x));
    }

    std::vector<double> zbar(L, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t l = 0; l < L; ++l) zbar[l] += z[t * L + l] / static_cast<double>(T);
    auto dot = [&](const std::vector<double>& v, const double* zz) {
      double a = 0.0;
      for (std::size_t l = 0; l < L; ++l) a += v[l] * zz[l];
      return a;
    };
    switch (spec.task) {
      case SyntheticTask::binary:
        s.label = {zbar[0] > 0.0 ? 1.0 : 0.0};
        break;
      case SyntheticTask::intensity:
        for (const auto& h : heads) s.label.push_back(1.0 / (1.0 + std::exp(-dot(h, zbar.data()))));
        break;
      case SyntheticTask::series: {
        s.series_label = Matrix(T, 2);
        for (std::size_t k = 0; k < 2; ++k) {
          double ema = dot(heads[k], &z[0]);
          for (std::size_t t = 0; t < T; ++t) {
            ema += spec.label_smoothing * (dot(heads[k], &z[t * L]) - ema);
            s.series_label(t, k) = std::tanh(ema);
          }
        }
        break;
      }
    }
    ds.push_back(std::move(s));
  }
  return ds;
}

// First `n` samples and the rest.
inline std::pair<Dataset, Dataset> split(Dataset ds, std::size_t n) {
  if (n > ds.size()) throw DataError("split: not enough samples");
  Dataset rest(std::make_move_iterator(ds.begin() + static_cast<std::ptrdiff_t>(n)), std::make_move_iterator(ds.end()));
  ds.resize(n);
  return {std::move(ds), std::move(rest)};
}

}  // namespace mmfuse::data
