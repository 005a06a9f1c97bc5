#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mmfuse/data/dataset.hpp"
#include "mmfuse/metrics/metrics.hpp"
#include "mmfuse/models/sagru.hpp"
#include "mmfuse/models/temma.hpp"
#include "mmfuse/training/losses.hpp"
#include "mmfuse/training/trainer.hpp"

namespace mmfuse {

enum class TaskKind { humor, reaction, stress_arousal, stress_valence };

inline std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::humor: return "humor";
    case TaskKind::reaction: return "reaction";
    case TaskKind::stress_arousal: return "stress-arousal";
    case TaskKind::stress_valence: return "stress-valence";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& s) {
  if (s == "humor") return TaskKind::humor;
  if (s == "reaction") return TaskKind::reaction;
  if (s == "stress-arousal") return TaskKind::stress_arousal;
  if (s == "stress-valence") return TaskKind::stress_valence;
  throw ConfigError("unknown task '" + s + "' (expected humor, reaction, stress-arousal or stress-valence)");
}

enum class RegressionLoss { mse, ccc };

inline RegressionLoss parse_regression_loss(const std::string& s) {
  if (s == "mse") return RegressionLoss::mse;
  if (s == "ccc") return RegressionLoss::ccc;
  throw ConfigError("unknown loss '" + s + "' (expected mse or ccc)");
}

inline std::string to_string(RegressionLoss l) { return l == RegressionLoss::mse ? "mse" : "ccc"; }

inline Tensor regression_loss(RegressionLoss kind, const Tensor& pred, const Tensor& y) {
  return kind == RegressionLoss::mse ? mse_loss(pred, y) : ccc_loss(pred, y);
}

namespace detail {

// Modality m of every sample in the batch as [B, T, d]; all samples must share T.
inline Tensor stack_modality(Batch batch, std::size_t m) {
  const auto& first = batch[0]->modalities.at(m);
  std::vector<double> v;
  v.reserve(batch.size() * first.data.size());
  for (const auto* s : batch) {
    const auto& mat = s->modalities.at(m);
    if (mat.rows != first.rows || mat.cols != first.cols)
      throw DimensionError("batch: samples differ in length or width; window the data first");
    v.insert(v.end(), mat.data.begin(), mat.data.end());
  }
  return Tensor({batch.size(), first.rows, first.cols}, std::move(v));
}

// Flat indices of non-padded positions in a [B, T] prediction grid.
inline std::vector<std::size_t> valid_positions(Batch batch) {
  std::vector<std::size_t> idx;
  const std::size_t T = batch[0]->length();
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < batch[b]->valid; ++t) idx.push_back(b * T + t);
  return idx;
}

inline std::vector<double> valid_targets(Batch batch, std::size_t col) {
  std::vector<double> y;
  for (const auto* s : batch)
    for (std::size_t t = 0; t < s->valid; ++t) y.push_back(s->series_label(t, col));
  return y;
}

inline std::vector<const data::AlignedSample*> all_of(const data::Dataset& ds) {
  std::vector<const data::AlignedSample*> out;
  for (const auto& s : ds) out.push_back(&s);
  return out;
}

}  // namespace detail

// TEMMA with a sigmoid head, BCE loss, AUC on dev.
struct HumorTask {
  const Temma* model;

  ParameterList parameters() const { return model->parameters(); }

  Tensor batch_loss(Batch batch, bool training, Rng& rng) const {
    std::vector<Tensor> probs;
    std::vector<double> y;
    for (const auto* s : batch) {
      probs.push_back(model->forward(s->tensors(), training, rng));
      y.push_back(s->label.at(0));
    }
    return bce_loss(concat(probs, 0), Tensor({y.size()}, y));
  }

  std::vector<double> scores(const data::Dataset& ds) const {
    std::vector<double> out;
    for (const auto& s : ds) out.push_back(model->predict(s.tensors())[0]);
    return out;
  }

  double evaluate(const data::Dataset& ds) const {
    std::vector<int> labels;
    for (const auto& s : ds) labels.push_back(s.label.at(0) > 0.5 ? 1 : 0);
    return metrics::auc(scores(ds), labels);
  }
};

// TEMMA with a linear 7-wide head, MSE loss by default, mean Pearson over targets on dev.
struct ReactionTask {
  const Temma* model;
  RegressionLoss loss = RegressionLoss::mse;

  ParameterList parameters() const { return model->parameters(); }

  Tensor batch_loss(Batch batch, bool training, Rng& rng) const {
    std::vector<Tensor> preds;
    std::vector<double> y;
    for (const auto* s : batch) {
      preds.push_back(model->forward(s->tensors(), training, rng));
      y.insert(y.end(), s->label.begin(), s->label.end());
    }
    return regression_loss(loss, concat(preds, 0), Tensor({y.size()}, y));
  }

  std::vector<double> per_target_pearson(const data::Dataset& ds) const {
    const std::size_t K = model->config().output_dim;
    std::vector<std::vector<double>> pred(K), truth(K);
    for (const auto& s : ds) {
      auto p = model->predict(s.tensors());
      for (std::size_t k = 0; k < K; ++k) {
        pred[k].push_back(p[k]);
        truth[k].push_back(s.label.at(k));
      }
    }
    std::vector<double> r;
    for (std::size_t k = 0; k < K; ++k) r.push_back(metrics::pearson(pred[k], truth[k]));
    return r;
  }

  double evaluate(const data::Dataset& ds) const {
    auto r = per_target_pearson(ds);
    return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  }
};

// One SA-GRU branch on one modality, 1 - CCC loss by default, CCC on dev over all valid timesteps.
struct SaGruTask {
  const SaGruModel* model;
  std::size_t modality = 0;
  std::size_t target = 0;  // column of series_label
  RegressionLoss loss = RegressionLoss::ccc;

  ParameterList parameters() const { return model->parameters(); }

  Tensor predict_batch(Batch batch) const { return model->forward(detail::stack_modality(batch, modality)); }

  Tensor batch_loss(Batch batch, bool, Rng&) const {
    Tensor pred = gather(predict_batch(batch), detail::valid_positions(batch));
    auto y = detail::valid_targets(batch, target);
    return regression_loss(loss, pred, Tensor({y.size()}, y));
  }

  std::vector<double> predictions(const data::Dataset& ds) const {
    std::vector<double> out;
    auto all = detail::all_of(ds);
    for (std::size_t i = 0; i < all.size(); i += 64) {
      Batch b(all.data() + i, std::min<std::size_t>(64, all.size() - i));
      Tensor p = gather(predict_batch(b), detail::valid_positions(b));
      out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return out;
  }

  double evaluate(const data::Dataset& ds) const {
    return metrics::ccc(predictions(ds), detail::valid_targets(detail::all_of(ds), target));
  }
};

// Fusion stage over precomputed branch predictions: each sample's modalities
// are the branch outputs as [T, 1] columns.
struct FusionTask {
  const LateFusion* model;
  std::size_t target = 0;
  RegressionLoss loss = RegressionLoss::ccc;

  ParameterList parameters() const { return model->parameters(); }

  Tensor predict_batch(Batch batch) const {
    std::vector<Tensor> preds;
    for (std::size_t m = 0; m < batch[0]->modalities.size(); ++m) {
      Tensor x = detail::stack_modality(batch, m);
      preds.push_back(reshape(x, {x.dim(0), x.dim(1)}));
    }
    return model->forward(preds);
  }

  Tensor batch_loss(Batch batch, bool, Rng&) const {
    Tensor pred = gather(predict_batch(batch), detail::valid_positions(batch));
    auto y = detail::valid_targets(batch, target);
    return regression_loss(loss, pred, Tensor({y.size()}, y));
  }

  std::vector<double> predictions(const data::Dataset& ds) const {
    std::vector<double> out;
    auto all = detail::all_of(ds);
    for (std::size_t i = 0; i < all.size(); i += 64) {
      Batch b(all.data() + i, std::min<std::size_t>(64, all.size() - i));
      Tensor p = gather(predict_batch(b), detail::valid_positions(b));
      out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return out;
  }

  double evaluate(const data::Dataset& ds) const {
    return metrics::ccc(predictions(ds), detail::valid_targets(detail::all_of(ds), target));
  }
};

// Replaces each sample's features by the frozen branches' per-timestep
// predictions ([T, 1] per branch); labels and padding carry over.
inline data::Dataset branch_predictions(const std::vector<SaGruModel>& branches, const data::Dataset& ds) {
  data::Dataset out;
  for (const auto& s : ds) {
    data::AlignedSample o;
    o.id = s.id;
    o.timestamps = s.timestamps;
    o.label = s.label;
    o.series_label = s.series_label;
    o.valid = s.valid;
    o.padded = s.padded;
    for (std::size_t m = 0; m < branches.size(); ++m) {
      Tensor p = branches[m].forward(s.modalities.at(m).tensor());
      data::Matrix col(s.length(), 1);
      for (std::size_t t = 0; t < s.length(); ++t) col(t, 0) = t < s.valid ? p[t] : 0.0;
      o.modalities.push_back(std::move(col));
    }
    out.push_back(std::move(o));
  }
  return out;
}

struct StressRunResult {
  std::vector<TrainResult> branches;
  TrainResult fusion;
  std::vector<double> branch_train_ccc;
  std::vector<double> branch_dev_ccc;
  double fusion_train_ccc = 0.0;
  double fusion_dev_ccc = 0.0;
};

// Two-stage stress training: each branch is trained on its own modality,
// then frozen; the fusion head trains on the branches' predictions.
inline StressRunResult train_stress(StressModel& model, const data::Dataset& train_set, const data::Dataset& dev_set,
                                    std::size_t target, const TrainOptions& branch_opts, const TrainOptions& fusion_opts,
                                    std::ostream* log = nullptr, RegressionLoss loss = RegressionLoss::ccc) {
  StressRunResult r;
  auto& branches = model.branches();
  for (std::size_t m = 0; m < branches.size(); ++m) {
    TrainOptions o = branch_opts;
    o.seed = branch_opts.seed + 1000003ULL * (m + 1);
    SaGruTask task{&branches[m], m, target, loss};
    if (log) *log << "-- branch " << m << '\n';
    r.branches.push_back(train(task, train_set, dev_set, o, log));
    r.branch_train_ccc.push_back(task.evaluate(train_set));
    r.branch_dev_ccc.push_back(task.evaluate(dev_set));
  }
  auto fused_train = branch_predictions(branches, train_set);
  auto fused_dev = branch_predictions(branches, dev_set);
  FusionTask fusion{&model.fusion(), target, loss};
  if (log) *log << "-- fusion\n";
  r.fusion = train(fusion, fused_train, fused_dev, fusion_opts, log);
  r.fusion_train_ccc = fusion.evaluate(fused_train);
  r.fusion_dev_ccc = fusion.evaluate(fused_dev);
  return r;
}

}  // namespace mmfuse
