#include <gtest/gtest.h>

#include <cmath>

#include "mmfuse/data/synthetic.hpp"
#include "mmfuse/layers/basic.hpp"
#include "mmfuse/training/losses.hpp"
#include "mmfuse/training/optimizer.hpp"
#include "mmfuse/training/schedule.hpp"
#include "mmfuse/training/tasks.hpp"
#include "mmfuse/training/trainer.hpp"

using namespace mmfuse;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}
Tensor param(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v), true);
}

// Dev metric scripted per epoch; the loss is a real quadratic so the optimizer has work to do.
struct ScriptedTask {
  Tensor w;
  std::vector<double> metrics;
  mutable std::size_t calls = 0;

  ParameterList parameters() const { return {{"w", w, true}}; }
  Tensor batch_loss(Batch, bool, Rng&) const { return sum(square(w)); }
  double evaluate(const data::Dataset&) const {
    const double m = metrics[std::min(calls, metrics.size() - 1)];
    ++calls;
    return m;
  }
};

data::Dataset dummy(std::size_t n) {
  data::Dataset ds(n);
  for (std::size_t i = 0; i < n; ++i) ds[i].id = std::to_string(i);
  return ds;
}

struct HumorFixture {
  data::Dataset train, dev;
  TemmaConfig cfg;

  HumorFixture() {
    data::SyntheticSpec spec;
    spec.dims = {4, 6};
    spec.noise = {0.3, 0.3};
    spec.t_min = spec.t_max = 8;
    spec.samples = 24;
    spec.seed = 11;
    std::tie(train, dev) = data::split(data::generate_synthetic(spec), 16);
    cfg = TemmaConfig::humor({4, 6});
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.conv_layers = 1;
    cfg.encoder_blocks = 1;
    cfg.ff_dim = 8;
    cfg.head_hidden = 8;
  }

  TrainOptions options() const {
    TrainOptions o;
    o.lr = 5e-3;
    o.batch_size = 4;
    o.max_epochs = 6;
    o.seed = 3;
    return o;
  }
};

}  // namespace

TEST(Losses, BinaryCrossEntropy) {
  EXPECT_NEAR(bce_loss(vec({1.0}), vec({1.0})).item(), 0.0, 1e-6);
  EXPECT_NEAR(bce_loss(vec({0.5, 0.5}), vec({1.0, 0.0})).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(vec({0.1}), vec({1.0})).item(), 2.302585, 1e-5);
  EXPECT_TRUE(std::isfinite(bce_loss(vec({0.0, 1.0}), vec({1.0, 0.0})).item()));
  EXPECT_THROW(bce_loss(vec({0.5}), vec({1.0, 0.0})), DimensionError);
}

TEST(Losses, MeanSquaredError) {
  EXPECT_EQ(mse_loss(vec({1, 2, 3}), vec({1, 2, 3})).item(), 0.0);
  EXPECT_EQ(mse_loss(vec({0, 0}), vec({1, -1})).item(), 1.0);
}

TEST(Losses, OneMinusCcc) {
  EXPECT_NEAR(ccc_loss(vec({1, 2, 3}), vec({1, 2, 3})).item(), 0.0, 1e-15);
  EXPECT_NEAR(ccc_loss(vec({2, 3, 4}), vec({1, 2, 3})).item(), 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(ccc_loss(vec({2, 3, 4}), vec({1, 2, 3})).item(), 1.0 - metrics::ccc(std::vector<double>{2, 3, 4}, std::vector<double>{1, 2, 3}), 1e-15);
}

TEST(Adam, FirstStepMovesByLr) {
  Tensor w = param({1.0, -2.0, 0.5});
  Adam opt(OptimizerKind::adam, {{"w", w, true}});
  backward(sum(mul(w, vec({3.0, -0.2, 1e-3}))));
  opt.step(0.01);
  // The bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(w[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(w[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor w = param({1.0, -2.0});
  Adam opt(OptimizerKind::adam, {{"w", w, true}});
  backward(sum(scale(w, 0.0)));
  opt.step(0.1);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], -2.0);
}

TEST(Adam, AdamWDecaysWeightsNotBiases) {
  Tensor w = param({2.0}), b = param({2.0});
  Adam opt(OptimizerKind::adamw, {{"w", w, true}, {"b", b, false}}, AdamOptions{.weight_decay = 0.01});
  backward(add(sum(scale(w, 0.0)), sum(scale(b, 0.0))));
  opt.step(0.1);
  EXPECT_DOUBLE_EQ(w[0], 2.0 * (1.0 - 0.1 * 0.01));
  EXPECT_EQ(b[0], 2.0);

  Tensor w2 = param({2.0});
  Adam plain(OptimizerKind::adam, {{"w", w2, true}});
  backward(sum(scale(w2, 0.0)));
  plain.step(0.1);
  EXPECT_EQ(w2[0], 2.0);
}

TEST(Adam, MissingGradientIsAnError) {
  Tensor w = param({1.0}), unused = param({1.0});
  Adam opt(OptimizerKind::adam, {{"w", w, true}, {"unused", unused, true}});
  backward(sum(w));
  try {
    opt.step(0.1);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("unused"), std::string::npos);
  }
}

TEST(Adam, TinyStepDoesNotIncreaseLoss) {
  Rng rng(8);
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t in = 1 + rng.below(6), out = 1 + rng.below(4), n = 2 + rng.below(10);
    Linear lin(in, out, rng);
    std::vector<double> xv(n * in), yv(n * out);
    for (auto& v : xv) v = rng.normal();
    for (auto& v : yv) v = rng.normal();
    Tensor x({n, in}, xv), y({n, out}, yv);
    ParameterList params;
    lin.append_parameters(params, "lin");
    Adam opt(inst % 2 ? OptimizerKind::adamw : OptimizerKind::adam, params);
    Tensor before = mse_loss(lin.forward(x), y);
    backward(before);
    opt.step(1e-6);
    const double after = mse_loss(lin.forward(x), y).item();
    EXPECT_LE(after, before.item() + 1e-10) << "instance " << inst;
  }
}

TEST(Schedule, ImprovingLossKeepsLr) {
  TrainState s(1e-3);
  ScheduleOptions o;
  for (int e = 0; e < 30; ++e) {
    auto d = schedule_step(s, o, 10.0 - e, static_cast<double>(e));
    EXPECT_FALSE(d.halved);
    EXPECT_FALSE(d.stop);
    EXPECT_EQ(d.lr, 1e-3);
  }
}

TEST(Schedule, HalvesAfterPatienceFlatEpochs) {
  TrainState s(1e-3);
  ScheduleOptions o;
  auto d = schedule_step(s, o, 1.0, 0.0);  // sets the running best
  for (int flat = 1; flat <= 5; ++flat) {
    d = schedule_step(s, o, 1.0, static_cast<double>(flat));
    EXPECT_EQ(d.halved, flat == 5) << flat;
  }
  EXPECT_EQ(s.lr, 5e-4);
  // The wait restarts after halving.
  for (int flat = 1; flat <= 4; ++flat) EXPECT_FALSE(schedule_step(s, o, 1.0, 10.0 + flat).halved);
  EXPECT_TRUE(schedule_step(s, o, 1.0, 20.0).halved);
  EXPECT_EQ(s.lr, 2.5e-4);
}

TEST(Schedule, ImprovementIsAgainstRunningBest) {
  TrainState s(1.0);
  ScheduleOptions o;
  schedule_step(s, o, 1.0, 0.0);
  // Oscillating below the previous epoch but never below the best still counts as flat.
  std::vector<double> losses{2.0, 1.5, 3.0, 1.2, 1.1};
  ScheduleDecision d;
  for (double l : losses) d = schedule_step(s, o, l, 1.0);
  EXPECT_TRUE(d.halved);
}

TEST(Schedule, StopsAfterFlatMetric) {
  TrainState s(1e-3);
  ScheduleOptions o;
  schedule_step(s, o, 1.0, 0.5);
  for (int flat = 1; flat <= 15; ++flat) {
    auto d = schedule_step(s, o, 1.0 / (flat + 1), 0.5);
    EXPECT_EQ(d.stop, flat == 15) << flat;
  }
}

TEST(Schedule, LrSequenceOnlyHalves) {
  Rng rng(4);
  TrainState s(1e-2);
  ScheduleOptions o;
  double prev = s.lr;
  for (int e = 0; e < 200; ++e) {
    auto d = schedule_step(s, o, rng.uniform(), rng.uniform());
    EXPECT_TRUE(d.lr == prev || d.lr == prev * 0.5);
    prev = d.lr;
  }
}

TEST(Trainer, StopsWhenMetricNeverImproves) {
  Tensor w = param({1.0, 2.0});
  ScriptedTask task{w, {0.3}};
  TrainOptions o;
  o.max_epochs = 100;
  auto r = train(task, dummy(4), dummy(2), o);
  EXPECT_EQ(r.history.size(), 16u);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Trainer, RestoresBestEpochParameters) {
  Tensor w = param({1.0, 2.0});
  ScriptedTask task{w, {0.1, 0.9, 0.2, 0.2}};
  TrainOptions o;
  o.lr = 0.1;
  o.max_epochs = 4;
  o.batch_size = 1;
  auto r = train(task, dummy(2), dummy(1), o);
  EXPECT_EQ(r.best_epoch, 2u);
  EXPECT_EQ(r.best_metric, 0.9);
  EXPECT_EQ(w[0], r.best.tensors[0].values[0]);

  // Same as stopping after epoch 2.
  Tensor w2 = param({1.0, 2.0});
  ScriptedTask short_task{w2, {0.1, 0.9}};
  o.max_epochs = 2;
  train(short_task, dummy(2), dummy(1), o);
  EXPECT_EQ(w[0], w2[0]);
  EXPECT_EQ(w[1], w2[1]);
  EXPECT_LT(w[0], 1.0);
}

TEST(Trainer, RejectsEmptySplits) {
  Tensor w = param({1.0});
  ScriptedTask task{w, {0.0}};
  EXPECT_THROW(train(task, dummy(0), dummy(1), TrainOptions{}), TrainingError);
  EXPECT_THROW(train(task, dummy(1), dummy(0), TrainOptions{}), TrainingError);
}

TEST(Trainer, SameSeedSameHistory) {
  HumorFixture f;
  std::vector<std::vector<HistoryRow>> runs;
  for (int i = 0; i < 2; ++i) {
    Rng init(5);
    Temma model(f.cfg, init);
    runs.push_back(train(HumorTask{&model}, f.train, f.dev, f.options()).history);
  }
  ASSERT_EQ(runs[0].size(), runs[1].size());
  EXPECT_EQ(history_csv(runs[0]), history_csv(runs[1]));
  for (std::size_t e = 0; e < runs[0].size(); ++e) EXPECT_EQ(runs[0][e].train_loss, runs[1][e].train_loss);
}

TEST(Trainer, CheckpointReproducesDevMetric) {
  HumorFixture f;
  Rng init(5);
  Temma model(f.cfg, init);
  HumorTask task{&model};
  auto r = train(task, f.train, f.dev, f.options());
  const double metric = task.evaluate(f.dev);
  EXPECT_EQ(metric, r.best_metric);

  Rng other(99);
  Temma fresh(f.cfg, other);
  auto params = fresh.parameters();
  r.best.restore(params);
  EXPECT_EQ(HumorTask{&fresh}.evaluate(f.dev), metric);
}
