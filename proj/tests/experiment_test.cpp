#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmfuse/training/experiment.hpp"

using namespace mmfuse;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Workdir {
public:
  explicit Workdir(const std::string& name) : root_(fs::temp_directory_path() / ("mmfuse_exp_" + name)) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workdir() { fs::remove_all(root_); }
  const fs::path& root() const { return root_; }
  fs::path write(const std::string& name, const json& j) const {
    auto p = root_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

private:
  fs::path root_;
};

struct CliResult {
  int code;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(MMFUSE_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

json tiny_humor() {
  return json::parse(R"({
    "task": "humor", "seed": 3, "lr": 0.003, "batch_size": 4, "max_epochs": 4,
    "model": {"d_model": 8, "conv_layers": 1, "encoder_blocks": 1, "heads": 2, "ff_dim": 8, "head_hidden": 8},
    "data": {"source": "synthetic", "train_samples": 16,
             "synthetic": {"dims": [4, 6], "noise": [0.3, 0.3], "t_min": 8, "t_max": 8, "samples": 24, "seed": 1}}
  })");
}

json tiny_stress() {
  return json::parse(R"({
    "task": "stress-valence", "seed": 3, "batch_size": 4, "max_epochs": 3,
    "model": {"heads": 2, "gru_layers": 1, "hidden": 4},
    "fusion": {"max_epochs": 2, "batch_size": 4},
    "data": {"source": "synthetic", "train_samples": 8, "window_length": 8,
             "synthetic": {"dims": [4, 2, 6], "noise": [0.1, 0.1, 0.1], "t_min": 12, "t_max": 12, "samples": 12}}
  })");
}

}  // namespace

TEST(Config, TaskDefaults) {
  auto humor = parse_config(json{{"task", "humor"}, {"data", {{"train_samples", 10}, {"synthetic", {{"dims", {4}}, {"noise", {0.1}}}}}}});
  EXPECT_EQ(humor.lr, 1e-3);
  EXPECT_EQ(humor.optimizer, OptimizerKind::adam);
  EXPECT_EQ(humor.lr_patience, 5u);
  EXPECT_EQ(humor.stop_patience, 15u);
  EXPECT_EQ(humor.temma.d_model, 64u);
  EXPECT_EQ(humor.temma.encoder_blocks, 4u);

  auto reaction = parse_config(json{{"task", "reaction"}, {"data", {{"train_samples", 10}, {"synthetic", {{"dims", {4}}, {"noise", {0.1}}}}}}});
  EXPECT_EQ(reaction.lr, 1e-4);
  EXPECT_EQ(reaction.temma.output_dim, 7u);

  auto stress = parse_config(tiny_stress());
  EXPECT_EQ(stress.optimizer, OptimizerKind::adamw);
  EXPECT_EQ(stress.lr, 2e-3);
  EXPECT_EQ(stress.lr_patience, 15u);
  EXPECT_EQ(stress.fusion.lr, 2e-3);
  EXPECT_EQ(stress.loss, RegressionLoss::ccc);
  EXPECT_EQ(stress.data.window_hop, 8u);
}

TEST(Config, OverridesAndRoundTrip) {
  ConfigOverrides ov;
  ov.seed = 99;
  ov.out_dir = "/tmp/x";
  ov.task = "reaction";
  auto c = parse_config(tiny_humor(), ov);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.out_dir, "/tmp/x");
  EXPECT_EQ(c.task, TaskKind::reaction);
  EXPECT_EQ(c.data.synthetic.task, data::SyntheticTask::intensity);
  // The resolved form parses back to itself.
  EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c));
}

TEST(Config, Rejections) {
  auto j = tiny_humor();
  j["learning_rate"] = 0.1;
  EXPECT_THROW(parse_config(j), ConfigError);
  j = tiny_humor();
  j["optimizer"] = "sgd";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = tiny_humor();
  j["lr"] = "fast";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = tiny_humor();
  j["task"] = "sarcasm";
  EXPECT_THROW(parse_config(j), ConfigError);
  j = tiny_humor();
  j["data"]["train_samples"] = 24;
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Cli, WritesAllArtifacts) {
  Workdir w("artifacts");
  auto cfg = w.write("exp.json", tiny_humor());
  auto r = cli("run -q --config " + cfg.string() + " --out " + (w.root() / "out").string(), w.root());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"history.csv", "metrics.csv", "checkpoint.bin", "config.json"})
    EXPECT_TRUE(fs::exists(w.root() / "out" / f)) << f;
  EXPECT_EQ(slurp(w.root() / "out" / "history.csv").substr(0, 30), "epoch,train_loss,dev_metric,lr");
  EXPECT_EQ(slurp(w.root() / "out" / "metrics.csv").substr(0, 36), "task,samples,auc_train,auc_dev\nhumor");

  // config.json is the resolved config: parsing it reproduces the run's config.
  auto resolved = json::parse(slurp(w.root() / "out" / "config.json"));
  ConfigOverrides ov;
  ov.out_dir = (w.root() / "out").string();
  EXPECT_EQ(resolved, to_json(parse_config(tiny_humor(), ov)));
}

TEST(Cli, RerunIsByteIdentical) {
  Workdir w("rerun");
  auto cfg = w.write("exp.json", tiny_humor());
  ASSERT_EQ(cli("run -q --config " + cfg.string() + " --out " + (w.root() / "a").string(), w.root()).code, 0);
  ASSERT_EQ(cli("run -q --config " + cfg.string() + " --out " + (w.root() / "b").string(), w.root()).code, 0);
  for (const char* f : {"history.csv", "metrics.csv"}) EXPECT_EQ(slurp(w.root() / "a" / f), slurp(w.root() / "b" / f)) << f;
  // The checkpoints differ only in the embedded out_dir.
  auto ca = Checkpoint::load(w.root() / "a" / "checkpoint.bin"), cb = Checkpoint::load(w.root() / "b" / "checkpoint.bin");
  ASSERT_EQ(ca.tensors.size(), cb.tensors.size());
  for (std::size_t i = 0; i < ca.tensors.size(); ++i) EXPECT_EQ(ca.tensors[i].values, cb.tensors[i].values);
  EXPECT_EQ(ca.epoch, cb.epoch);
  ASSERT_EQ(cli("run -q --config " + cfg.string() + " --seed 4 --out " + (w.root() / "c").string(), w.root()).code, 0);
  EXPECT_NE(slurp(w.root() / "a" / "history.csv"), slurp(w.root() / "c" / "history.csv"));
}

TEST(Cli, CheckpointReproducesDevMetric) {
  Workdir w("ckpt");
  auto cfg_path = w.write("exp.json", tiny_humor());
  const auto out = w.root() / "out";
  ASSERT_EQ(cli("run -q --config " + cfg_path.string() + " --out " + out.string(), w.root()).code, 0);

  auto cfg = load_config(out / "config.json");
  auto data = prepare_data(cfg);
  auto ckpt = Checkpoint::load(out / "checkpoint.bin");
  EXPECT_EQ(json::parse(ckpt.config), json::parse(slurp(out / "config.json")));
  TemmaConfig mc = cfg.temma;
  mc.modality_dims = {4, 6};
  Rng other(1234);
  Temma model(mc, other);
  auto params = model.parameters();
  ckpt.restore(params);
  const double auc = HumorTask{&model}.evaluate(data.dev);

  std::istringstream metrics(slurp(out / "metrics.csv"));
  std::string header, row;
  std::getline(metrics, header);
  std::getline(metrics, row);
  const double recorded = std::stod(row.substr(row.rfind(',') + 1));
  EXPECT_EQ(auc, recorded);
}

TEST(Cli, StressWritesBranchHistories) {
  Workdir w("stress");
  auto cfg = w.write("exp.json", tiny_stress());
  auto r = cli("run -q --config " + cfg.string() + " --out " + (w.root() / "out").string(), w.root());
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"history.csv", "history_m0.csv", "history_m1.csv", "history_m2.csv", "metrics.csv", "checkpoint.bin"})
    EXPECT_TRUE(fs::exists(w.root() / "out" / f)) << f;
  EXPECT_NE(slurp(w.root() / "out" / "metrics.csv").find("ccc_dev_m2"), std::string::npos);
}

TEST(Cli, MissingLabelFileFailsInDataStage) {
  Workdir w("nolabels");
  auto synth = cli("synth --task humor --samples 12 --length 6 --dims 4 6 --noise 0.1 0.1 --out " + (w.root() / "data").string(), w.root());
  ASSERT_EQ(synth.code, 0) << synth.err;
  auto j = tiny_humor();
  j["data"] = json::parse(R"({"source": "csv", "labels": "data/labels.csv",
      "modalities": [{"name": "a", "path": "data/m0.csv"}, {"name": "v", "path": "data/m1.csv"}]})");
  auto cfg = w.write("exp.json", j);
  ASSERT_EQ(cli("run -q --config " + cfg.string(), w.root()).code, 0);
  EXPECT_TRUE(fs::exists(w.root() / "out" / "metrics.csv"));

  fs::remove(w.root() / "data" / "labels.csv");
  auto r = cli("run -q --config " + cfg.string(), w.root());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("data stage"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("labels.csv"), std::string::npos) << r.err;
}

TEST(Cli, ConfigAndArityErrors) {
  Workdir w("errors");
  auto j = tiny_humor();
  j["model"]["heads"] = 3;  // does not divide d_model 8
  auto r = cli("run -q --config " + w.write("heads.json", j).string(), w.root());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("model stage"), std::string::npos) << r.err;

  r = cli("run -q --config " + w.write("typo.json", json{{"task", "humor"}, {"epochs", 3}}).string(), w.root());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config stage"), std::string::npos) << r.err;

  ASSERT_EQ(cli("synth --task humor --samples 8 --length 6 --dims 87 4 --noise 0.1 0.1 --out " + (w.root() / "data").string(), w.root()).code, 0);
  j["model"]["heads"] = 2;
  j["data"] = json::parse(R"({"source": "csv", "labels": "data/labels.csv",
      "modalities": [{"name": "audio", "path": "data/m0.csv", "feature_set": "egemaps"}, {"name": "v", "path": "data/m1.csv"}]})");
  r = cli("run -q --config " + w.write("arity.json", j).string(), w.root());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("arity"), std::string::npos) << r.err;
}
