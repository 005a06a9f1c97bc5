#pragma once

#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mmfuse/core/error.hpp"
#include "mmfuse/core/rng.hpp"
#include "mmfuse/data/dataset.hpp"
#include "mmfuse/models/checkpoint.hpp"
#include "mmfuse/training/optimizer.hpp"
#include "mmfuse/training/schedule.hpp"

namespace mmfuse {

enum class LrMonitor { train_loss, dev_loss };

struct TrainOptions {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  ScheduleOptions schedule;
  LrMonitor lr_monitor = LrMonitor::train_loss;
  std::uint64_t seed = 0;
};

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  Checkpoint best;
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  bool stopped_early = false;
};

// history.csv: epoch,train_loss,dev_metric,lr with round-trip precision.
inline std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream os;
  os << "epoch,train_loss,dev_metric,lr\n" << std::setprecision(17);
  for (const auto& r : rows) os << r.epoch << ',' << r.train_loss << ',' << r.dev_metric << ',' << r.lr << '\n';
  return os.str();
}

using Batch = std::span<const data::AlignedSample* const>;

// What train() needs from a model/task pairing.
template <class T>
concept TrainableTask = requires(const T& task, Batch batch, bool training, Rng& rng, const data::Dataset& ds) {
  { task.parameters() } -> std::same_as<ParameterList>;
  { task.batch_loss(batch, training, rng) } -> std::same_as<Tensor>;
  { task.evaluate(ds) } -> std::same_as<double>;
};

namespace detail {

template <TrainableTask Task>
double dataset_loss(const Task& task, const data::Dataset& ds, std::size_t batch_size) {
  Rng unused(0);
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); i += batch_size) {
    std::vector<const data::AlignedSample*> b;
    for (std::size_t j = i; j < std::min(ds.size(), i + batch_size); ++j) b.push_back(&ds[j]);
    total += task.batch_loss(b, false, unused).item() * static_cast<double>(b.size());
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace detail

// Mini-batch training with seeded shuffling, per-epoch dev evaluation, lr
// halving and early stopping. The parameters holding the best dev metric are
// kept as a checkpoint and restored into the model before returning.
//
// An undefined dev metric (e.g. correlation of a constant prediction) is
// recorded as 0 for that epoch.
template <TrainableTask Task>
TrainResult train(const Task& task, const data::Dataset& train_set, const data::Dataset& dev_set, const TrainOptions& opt,
                  std::ostream* log = nullptr) {
  if (train_set.empty()) throw TrainingError("train: empty training split");
  if (dev_set.empty()) throw TrainingError("train: empty dev split");
  if (opt.batch_size == 0 || opt.max_epochs == 0 || !(opt.lr > 0.0))
    throw TrainingError("train: batch size, epochs and lr must be positive");
  ParameterList params = task.parameters();
  Adam adam(opt.optimizer, params, AdamOptions{.weight_decay = opt.weight_decay});
  Rng rng(opt.seed);
  TrainState state(opt.lr);
  TrainResult result;
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t i = 0; i < order.size(); i += opt.batch_size) {
      std::vector<const data::AlignedSample*> batch;
      for (std::size_t j = i; j < std::min(order.size(), i + opt.batch_size); ++j) batch.push_back(&train_set[order[j]]);
      Tensor loss = task.batch_loss(batch, true, rng);
      adam.zero_grad();
      backward(loss);
      adam.step(state.lr);
      total += loss.item() * static_cast<double>(batch.size());
    }
    const double train_loss = total / static_cast<double>(train_set.size());
    double metric = 0.0;
    try {
      metric = task.evaluate(dev_set);
    } catch (const UndefinedMetricError&) {
      metric = 0.0;
    }
    const double monitored =
        opt.lr_monitor == LrMonitor::train_loss ? train_loss : detail::dataset_loss(task, dev_set, opt.batch_size);
    result.history.push_back({epoch, train_loss, metric, state.lr});
    if (log) *log << "epoch " << epoch << " loss " << train_loss << " dev " << metric << " lr " << state.lr << '\n';

    auto decision = schedule_step(state, opt.schedule, monitored, metric);
    if (decision.improved) {
      result.best = Checkpoint::capture(params, opt.seed, epoch);
      result.best_epoch = epoch;
      result.best_metric = metric;
    }
    if (decision.stop) {
      result.stopped_early = epoch < opt.max_epochs;
      break;
    }
  }
  if (result.best_epoch == 0) {
    result.best = Checkpoint::capture(params, opt.seed, result.history.size());
    result.best_epoch = result.history.size();
    result.best_metric = result.history.back().dev_metric;
  }
  result.best.restore(params);
  return result;
}

}  // namespace mmfuse
