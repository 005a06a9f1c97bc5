#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace mmfuse {

struct ScheduleOptions {
  std::size_t lr_patience = 5;     // epochs without a new best monitored loss before halving
  std::size_t stop_patience = 15;  // epochs without a new best dev metric before stopping
  double lr_factor = 0.5;
};

struct TrainState {
  std::size_t epoch = 0;
  double lr = 0.0;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t lr_wait = 0;
  std::size_t stop_wait = 0;
  std::vector<double> loss_history;

  explicit TrainState(double initial_lr = 0.0) : lr(initial_lr) {}
};

struct ScheduleDecision {
  double lr = 0.0;
  bool stop = false;
  bool halved = false;
  bool improved = false;  // dev metric reached a new best this epoch
};

// End-of-epoch bookkeeping. "Improvement" means strictly beating the running
// best (lower loss, higher metric), not the previous epoch. The lr wait
// counter resets on improvement and after each halving.
inline ScheduleDecision schedule_step(TrainState& s, const ScheduleOptions& opt, double monitored_loss, double dev_metric) {
  ScheduleDecision d;
  ++s.epoch;
  s.loss_history.push_back(monitored_loss);
  if (monitored_loss < s.best_loss) {
    s.best_loss = monitored_loss;
    s.lr_wait = 0;
  } else if (++s.lr_wait >= opt.lr_patience) {
    s.lr *= opt.lr_factor;
    s.lr_wait = 0;
    d.halved = true;
  }
  if (dev_metric > s.best_metric) {
    s.best_metric = dev_metric;
    s.stop_wait = 0;
    d.improved = true;
  } else {
    ++s.stop_wait;
  }
  d.stop = s.stop_wait >= opt.stop_patience;
  d.lr = s.lr;
  return d;
}

}  // namespace mmfuse
