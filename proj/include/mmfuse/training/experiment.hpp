#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/core/error.hpp"
#include "mmfuse/data/dataset.hpp"
#include "mmfuse/data/feature_table.hpp"
#include "mmfuse/data/synthetic.hpp"
#include "mmfuse/models/checkpoint.hpp"
#include "mmfuse/models/sagru.hpp"
#include "mmfuse/models/temma.hpp"
#include "mmfuse/training/tasks.hpp"
#include "mmfuse/training/trainer.hpp"

namespace mmfuse {

using json = nlohmann::ordered_json;

struct ModalitySource {
  std::string name;
  std::string path;
  std::string feature_set;  // known set name (egemaps, vggface2, ...) or empty
};

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  data::SyntheticSpec synthetic;
  std::size_t train_samples = 0;
  // csv
  std::vector<ModalitySource> modalities;
  std::string labels;  // per-sample csv (humor, reaction) or directory of <segment>.csv (stress)
  std::vector<std::string> dev_ids;
  double dev_fraction = 0.25;
  std::int64_t hop_ms = 40;
  std::size_t window_length = 0;  // 0: no windowing
  std::size_t window_hop = 0;
};

// Second stage of the stress pipeline.
struct FusionStageConfig {
  OptimizerKind optimizer = OptimizerKind::adamw;
  double lr = 2e-3;
  double weight_decay = 0.01;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 20;
  std::size_t lr_patience = 15;
  std::size_t stop_patience = 15;
};

struct ExperimentConfig {
  TaskKind task = TaskKind::humor;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t lr_patience = 5;
  std::size_t stop_patience = 15;
  double lr_factor = 0.5;
  LrMonitor lr_monitor = LrMonitor::train_loss;
  RegressionLoss loss = RegressionLoss::mse;  // reaction and stress only; humor uses BCE
  TemmaConfig temma;
  SaGruConfig sagru;
  FusionStageConfig fusion;
  DataConfig data;

  bool is_stress() const { return task == TaskKind::stress_arousal || task == TaskKind::stress_valence; }
};

// Task-dependent defaults before the config file is applied.
inline ExperimentConfig default_config(TaskKind task) {
  ExperimentConfig c;
  c.task = task;
  switch (task) {
    case TaskKind::humor:
      c.lr = 1e-3;
      c.data.synthetic.task = data::SyntheticTask::binary;
      break;
    case TaskKind::reaction:
      c.lr = 1e-4;
      c.temma.output_dim = 7;
      c.temma.output_activation = OutputActivation::linear;
      c.data.synthetic.task = data::SyntheticTask::intensity;
      break;
    case TaskKind::stress_arousal:
    case TaskKind::stress_valence:
      c.optimizer = OptimizerKind::adamw;
      c.lr = 2e-3;
      c.batch_size = 256;
      c.lr_patience = 15;
      c.stop_patience = 100;  // fixed 100-epoch budget, best-by-dev kept
      c.loss = RegressionLoss::ccc;
      c.data.synthetic.task = data::SyntheticTask::series;
      break;
  }
  return c;
}

namespace detail {

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "adamw"; }
inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adamw") return OptimizerKind::adamw;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or adamw)");
}
inline std::string to_string(LrMonitor m) { return m == LrMonitor::train_loss ? "train_loss" : "dev_loss"; }
inline LrMonitor parse_monitor(const std::string& s) {
  if (s == "train_loss") return LrMonitor::train_loss;
  if (s == "dev_loss") return LrMonitor::dev_loss;
  throw ConfigError("unknown lr_monitor '" + s + "' (expected train_loss or dev_loss)");
}

// Reads obj[key] into `out` when present; every key of obj must be consumed.
class Reader {
public:
  Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type (got " + it->dump() + ")");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
  }

private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void read_synthetic(const json& j, data::SyntheticSpec& s) {
  Reader r(j, "data.synthetic");
  r.get("dims", s.dims);
  r.get("noise", s.noise);
  r.get("t_min", s.t_min);
  r.get("t_max", s.t_max);
  r.get("samples", s.samples);
  r.get("latent_dim", s.latent_dim);
  r.get("seed", s.seed);
  r.get("smoothness", s.smoothness);
  r.get("offset_scale", s.offset_scale);
  r.get("label_smoothing", s.label_smoothing);
  r.get("hop_ms", s.hop_ms);
  r.finish();
}

inline void read_data(const json& j, DataConfig& d) {
  Reader r(j, "data");
  r.get("source", d.source);
  if (const json* s = r.child("synthetic")) read_synthetic(*s, d.synthetic);
  r.get("train_samples", d.train_samples);
  if (const json* mods = r.child("modalities")) {
    if (!mods->is_array()) throw ConfigError("data.modalities: expected an array");
    d.modalities.clear();
    for (const auto& m : *mods) {
      ModalitySource src;
      Reader mr(m, "data.modalities[]");
      mr.get("name", src.name);
      mr.get("path", src.path);
      mr.get("feature_set", src.feature_set);
      mr.finish();
      d.modalities.push_back(src);
    }
  }
  r.get("labels", d.labels);
  r.get("dev_ids", d.dev_ids);
  r.get("dev_fraction", d.dev_fraction);
  r.get("hop_ms", d.hop_ms);
  r.get("window_length", d.window_length);
  r.get("window_hop", d.window_hop);
  r.finish();
}

inline void read_model(const json& j, ExperimentConfig& c) {
  Reader r(j, "model");
  if (c.is_stress()) {
    r.get("heads", c.sagru.heads);
    r.get("gru_layers", c.sagru.gru_layers);
    r.get("hidden", c.sagru.hidden);
    r.get("bidirectional", c.sagru.bidirectional);
    r.get("fusion_units", c.sagru.fusion_units);
  } else {
    r.get("d_model", c.temma.d_model);
    r.get("conv_layers", c.temma.conv_layers);
    r.get("kernel", c.temma.kernel);
    r.get("encoder_blocks", c.temma.encoder_blocks);
    r.get("heads", c.temma.heads);
    r.get("ff_dim", c.temma.ff_dim);
    r.get("head_hidden", c.temma.head_hidden);
    r.get("dropout", c.temma.dropout);
    r.get("max_len", c.temma.max_len);
  }
  r.finish();
}

inline void read_fusion(const json& j, FusionStageConfig& f) {
  Reader r(j, "fusion");
  std::string opt = to_string(f.optimizer);
  r.get("optimizer", opt);
  f.optimizer = parse_optimizer(opt);
  r.get("lr", f.lr);
  r.get("weight_decay", f.weight_decay);
  r.get("batch_size", f.batch_size);
  r.get("max_epochs", f.max_epochs);
  r.get("lr_patience", f.lr_patience);
  r.get("stop_patience", f.stop_patience);
  r.finish();
}

}  // namespace detail

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> task;
};

// Builds the resolved config: task defaults, then the file, then overrides.
// Relative data paths and out_dir are taken relative to `base_dir`; an
// out_dir override is used as given.
inline ExperimentConfig parse_config(const json& j, const ConfigOverrides& ov = {}, const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  std::string task_name = ov.task ? *ov.task : j.value("task", std::string());
  if (task_name.empty()) throw ConfigError("config: 'task' is required");
  ExperimentConfig c = default_config(parse_task(task_name));

  detail::Reader r(j, "config");
  std::string ignored;
  r.get("task", ignored);
  r.get("seed", c.seed);
  r.get("out_dir", c.out_dir);
  std::string opt = detail::to_string(c.optimizer), monitor = detail::to_string(c.lr_monitor), loss = to_string(c.loss);
  r.get("optimizer", opt);
  r.get("lr", c.lr);
  r.get("weight_decay", c.weight_decay);
  r.get("batch_size", c.batch_size);
  r.get("max_epochs", c.max_epochs);
  r.get("lr_patience", c.lr_patience);
  r.get("stop_patience", c.stop_patience);
  r.get("lr_factor", c.lr_factor);
  r.get("lr_monitor", monitor);
  r.get("loss", loss);
  c.optimizer = detail::parse_optimizer(opt);
  c.lr_monitor = detail::parse_monitor(monitor);
  c.loss = parse_regression_loss(loss);
  if (const json* m = r.child("model")) detail::read_model(*m, c);
  if (const json* f = r.child("fusion")) detail::read_fusion(*f, c.fusion);
  if (const json* d = r.child("data")) detail::read_data(*d, c.data);
  r.finish();

  if (ov.seed) c.seed = *ov.seed;
  auto rebase = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base_dir.empty()) p = (base_dir / p).lexically_normal().string();
  };
  if (ov.out_dir) {
    c.out_dir = *ov.out_dir;
  } else {
    rebase(c.out_dir);
  }
  rebase(c.data.labels);
  for (auto& m : c.data.modalities) rebase(m.path);

  if (!(c.lr > 0.0) || c.batch_size == 0 || c.max_epochs == 0) throw ConfigError("config: lr, batch_size and max_epochs must be positive");
  if (c.lr_patience == 0 || c.stop_patience == 0) throw ConfigError("config: patience values must be positive");
  if (!(c.lr_factor > 0.0 && c.lr_factor < 1.0)) throw ConfigError("config: lr_factor must be in (0, 1)");
  if (c.is_stress() && (!(c.fusion.lr > 0.0) || c.fusion.batch_size == 0 || c.fusion.max_epochs == 0))
    throw ConfigError("config: fusion lr, batch_size and max_epochs must be positive");
  if (c.data.source != "synthetic" && c.data.source != "csv")
    throw ConfigError("config: data.source must be 'synthetic' or 'csv'");
  if (c.data.source == "synthetic") {
    if (c.data.train_samples == 0 || c.data.train_samples >= c.data.synthetic.samples)
      throw ConfigError("config: data.train_samples must be in [1, data.synthetic.samples)");
    try {
      c.data.synthetic.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else {
    if (c.data.modalities.empty()) throw ConfigError("config: data.modalities is empty");
    if (c.data.labels.empty()) throw ConfigError("config: data.labels is required");
    if (c.data.dev_ids.empty() && !(c.data.dev_fraction > 0.0 && c.data.dev_fraction < 1.0))
      throw ConfigError("config: data.dev_fraction must be in (0, 1)");
  }
  if (c.data.window_length > 0 && c.data.window_hop == 0) c.data.window_hop = c.data.window_length;
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["optimizer"] = detail::to_string(c.optimizer);
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["lr_patience"] = c.lr_patience;
  j["stop_patience"] = c.stop_patience;
  j["lr_factor"] = c.lr_factor;
  j["lr_monitor"] = detail::to_string(c.lr_monitor);
  j["loss"] = to_string(c.loss);
  if (c.is_stress()) {
    j["model"] = {{"heads", c.sagru.heads},
                  {"gru_layers", c.sagru.gru_layers},
                  {"hidden", c.sagru.hidden},
                  {"bidirectional", c.sagru.bidirectional},
                  {"fusion_units", c.sagru.fusion_units}};
    j["fusion"] = {{"optimizer", detail::to_string(c.fusion.optimizer)},
                   {"lr", c.fusion.lr},
                   {"weight_decay", c.fusion.weight_decay},
                   {"batch_size", c.fusion.batch_size},
                   {"max_epochs", c.fusion.max_epochs},
                   {"lr_patience", c.fusion.lr_patience},
                   {"stop_patience", c.fusion.stop_patience}};
  } else {
    j["model"] = {{"d_model", c.temma.d_model},     {"conv_layers", c.temma.conv_layers},
                  {"kernel", c.temma.kernel},       {"encoder_blocks", c.temma.encoder_blocks},
                  {"heads", c.temma.heads},         {"ff_dim", c.temma.ff_dim},
                  {"head_hidden", c.temma.head_hidden}, {"dropout", c.temma.dropout},
                  {"max_len", c.temma.max_len}};
  }
  const auto& d = c.data;
  json dj;
  dj["source"] = d.source;
  if (d.source == "synthetic") {
    const auto& s = d.synthetic;
    dj["synthetic"] = {{"dims", s.dims},
                       {"noise", s.noise},
                       {"t_min", s.t_min},
                       {"t_max", s.t_max},
                       {"samples", s.samples},
                       {"latent_dim", s.latent_dim},
                       {"seed", s.seed},
                       {"smoothness", s.smoothness},
                       {"offset_scale", s.offset_scale},
                       {"label_smoothing", s.label_smoothing},
                       {"hop_ms", s.hop_ms}};
    dj["train_samples"] = d.train_samples;
  } else {
    json mods = json::array();
    for (const auto& m : d.modalities) mods.push_back({{"name", m.name}, {"path", m.path}, {"feature_set", m.feature_set}});
    dj["modalities"] = mods;
    dj["labels"] = d.labels;
    dj["dev_ids"] = d.dev_ids;
    dj["dev_fraction"] = d.dev_fraction;
    dj["hop_ms"] = d.hop_ms;
  }
  dj["window_length"] = d.window_length;
  dj["window_hop"] = d.window_hop;
  j["data"] = dj;
  return j;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& ov = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, ov, path.parent_path());
}

struct PreparedData {
  data::Dataset train, dev;
  std::vector<std::string> modality_names;
};

namespace detail {

inline std::size_t target_column(TaskKind t) { return t == TaskKind::stress_valence ? 1 : 0; }

inline std::size_t label_width(TaskKind t) { return t == TaskKind::humor ? 1 : t == TaskKind::reaction ? 7 : 2; }

inline data::Dataset load_csv_samples(const ExperimentConfig& c) {
  const auto& d = c.data;
  std::vector<std::map<std::int64_t, data::FeatureTable>> per_modality;
  std::vector<std::int64_t> order;
  for (std::size_t m = 0; m < d.modalities.size(); ++m) {
    const auto& src = d.modalities[m];
    auto table = data::load_feature_csv(src.path, src.name, src.feature_set);
    std::map<std::int64_t, data::FeatureTable> segs;
    for (auto& t : table.split_segments()) {
      if (m == 0) order.push_back(t.segment_ids.front());
      segs.emplace(t.segment_ids.front(), std::move(t));
    }
    per_modality.push_back(std::move(segs));
  }

  std::optional<data::SampleLabels> sample_labels;
  if (!c.is_stress()) {
    sample_labels = data::load_sample_labels(d.labels);
    if (sample_labels->targets.size() != label_width(c.task))
      throw DataError(d.labels + ": " + to_string(c.task) + " needs " + std::to_string(label_width(c.task)) +
                      " label columns, file has " + std::to_string(sample_labels->targets.size()));
  } else if (!std::filesystem::is_directory(d.labels)) {
    throw DataError(d.labels + ": stress labels must be a directory of <segment_id>.csv files");
  }

  data::Dataset out;
  for (auto seg : order) {
    const std::string id = std::to_string(seg);
    std::vector<data::FeatureTable> tables;
    for (std::size_t m = 0; m < per_modality.size(); ++m) {
      auto it = per_modality[m].find(seg);
      if (it == per_modality[m].end())
        throw DataError("segment " + id + " missing from modality '" + d.modalities[m].name + "'");
      tables.push_back(it->second);
    }
    if (c.is_stress()) {
      auto lab = data::load_series_labels(std::filesystem::path(d.labels) / (id + ".csv"));
      if (lab.arity() != 2) throw DataError(d.labels + "/" + id + ".csv: expected timestamp,arousal,valence");
      tables.push_back(std::move(lab));
    }
    auto s = data::align_modalities(tables, d.hop_ms);
    s.id = id;
    if (c.is_stress()) {
      s.series_label = std::move(s.modalities.back());
      s.modalities.pop_back();
    } else {
      auto it = sample_labels->by_sample.find(id);
      if (it == sample_labels->by_sample.end()) throw DataError(d.labels + ": no label for sample_id '" + id + "'");
      s.label = it->second;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

// load -> align -> split -> window -> normalize.
inline PreparedData prepare_data(const ExperimentConfig& c) {
  const auto& d = c.data;
  PreparedData p;
  if (d.source == "synthetic") {
    std::tie(p.train, p.dev) = data::split(data::generate_synthetic(d.synthetic), d.train_samples);
    for (std::size_t m = 0; m < d.synthetic.dims.size(); ++m) p.modality_names.push_back("m" + std::to_string(m));
  } else {
    auto all = detail::load_csv_samples(c);
    for (const auto& m : d.modalities) p.modality_names.push_back(m.name);
    std::set<std::string> dev_ids(d.dev_ids.begin(), d.dev_ids.end());
    if (dev_ids.empty()) {
      const auto n_dev = static_cast<std::size_t>(std::ceil(d.dev_fraction * static_cast<double>(all.size())));
      for (std::size_t i = all.size() - std::min(n_dev, all.size()); i < all.size(); ++i) dev_ids.insert(all[i].id);
    }
    for (auto& s : all) (dev_ids.count(s.id) ? p.dev : p.train).push_back(std::move(s));
  }
  if (p.train.empty() || p.dev.empty()) throw DataError("train/dev split left an empty side");

  if (d.window_length > 0) {
    auto windowed = [&](const data::Dataset& ds) {
      data::Dataset w;
      for (const auto& s : ds)
        for (auto& x : data::window(s, d.window_length, d.window_hop)) w.push_back(std::move(x));
      return w;
    };
    p.train = windowed(p.train);
    p.dev = windowed(p.dev);
  } else if (c.is_stress()) {
    for (const auto* ds : {&p.train, &p.dev})
      for (const auto& s : *ds)
        if (s.length() != p.train.front().length())
          throw DataError("stress batches need equal-length samples; set data.window_length");
  }
  auto [train_n, stats] = data::normalize(std::move(p.train));
  p.train = std::move(train_n);
  p.dev = data::normalize(std::move(p.dev), stats).first;
  return p;
}

inline TrainOptions train_options(const ExperimentConfig& c) {
  TrainOptions o;
  o.optimizer = c.optimizer;
  o.lr = c.lr;
  o.weight_decay = c.weight_decay;
  o.batch_size = c.batch_size;
  o.max_epochs = c.max_epochs;
  o.schedule = ScheduleOptions{c.lr_patience, c.stop_patience, c.lr_factor};
  o.lr_monitor = c.lr_monitor;
  o.seed = c.seed;
  return o;
}

inline TrainOptions fusion_options(const ExperimentConfig& c) {
  TrainOptions o = train_options(c);
  o.optimizer = c.fusion.optimizer;
  o.lr = c.fusion.lr;
  o.weight_decay = c.fusion.weight_decay;
  o.batch_size = c.fusion.batch_size;
  o.max_epochs = c.fusion.max_epochs;
  o.schedule.lr_patience = c.fusion.lr_patience;
  o.schedule.stop_patience = c.fusion.stop_patience;
  o.seed = c.seed + 7919;
  return o;
}

struct ExperimentOutputs {
  metrics::MetricReport report;
  std::vector<HistoryRow> history;                         // main (or fusion) stage
  std::vector<std::vector<HistoryRow>> branch_histories;  // stress only
  Checkpoint checkpoint;
};

// Builds the model, trains it and evaluates the restored best checkpoint.
inline ExperimentOutputs train_and_evaluate(const ExperimentConfig& c, const PreparedData& p, std::ostream* log = nullptr) {
  ExperimentOutputs out;
  out.report.task = to_string(c.task);
  out.report.samples = p.dev.size();
  std::vector<std::size_t> dims;
  for (const auto& m : p.train.front().modalities) dims.push_back(m.cols);
  Rng init(c.seed);
  const std::string config_text = to_json(c).dump();

  if (c.is_stress()) {
    SaGruConfig mc = c.sagru;
    mc.modality_dims = dims;
    mc.validate();
    StressModel model(mc, init);
    const std::size_t target = detail::target_column(c.task);
    auto r = train_stress(model, p.train, p.dev, target, train_options(c), fusion_options(c), log, c.loss);
    for (std::size_t m = 0; m < r.branches.size(); ++m) {
      out.report.set("ccc_train_" + p.modality_names[m], r.branch_train_ccc[m]);
      out.report.set("ccc_dev_" + p.modality_names[m], r.branch_dev_ccc[m]);
      out.branch_histories.push_back(r.branches[m].history);
    }
    out.report.set("ccc_train", r.fusion_train_ccc);
    out.report.set("ccc_dev", r.fusion_dev_ccc);
    out.history = r.fusion.history;
    out.checkpoint = Checkpoint::capture(model.parameters(), c.seed, r.fusion.best_epoch, config_text);
    return out;
  }

  TemmaConfig mc = c.temma;
  mc.modality_dims = dims;
  mc.validate();
  Temma model(mc, init);
  TrainResult r;
  if (c.task == TaskKind::humor) {
    HumorTask task{&model};
    r = train(task, p.train, p.dev, train_options(c), log);
    out.report.set("auc_train", task.evaluate(p.train));
    out.report.set("auc_dev", task.evaluate(p.dev));
  } else {
    ReactionTask task{&model, c.loss};
    r = train(task, p.train, p.dev, train_options(c), log);
    auto per = task.per_target_pearson(p.dev);
    for (std::size_t k = 0; k < per.size(); ++k) out.report.set("pearson_dev_" + std::to_string(k), per[k]);
    out.report.set("pearson_dev", task.evaluate(p.dev));
  }
  out.history = r.history;
  out.checkpoint = Checkpoint::capture(model.parameters(), c.seed, r.best_epoch, config_text);
  return out;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace detail

// Exit codes: 0 ok, 1 config error, 2 data error, 3 training failure.
enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_data = 2, exit_training = 3 };

// Full pipeline for one config file. Artifacts in out_dir: history.csv,
// metrics.csv, checkpoint.bin, config.json (resolved), plus
// history_<modality>.csv per stress branch.
inline int run_experiment(const std::filesystem::path& config_path, const ConfigOverrides& ov = {},
                          std::ostream* log = nullptr, std::ostream& err = std::cerr) {
  std::string stage = "config";
  int code = exit_config;
  try {
    ExperimentConfig cfg = load_config(config_path, ov);

    stage = "data";
    code = exit_data;
    PreparedData data = prepare_data(cfg);

    stage = "model";
    code = exit_config;
    std::vector<std::size_t> dims;
    for (const auto& m : data.train.front().modalities) dims.push_back(m.cols);
    if (cfg.is_stress()) {
      SaGruConfig mc = cfg.sagru;
      mc.modality_dims = dims;
      mc.validate();
    } else {
      TemmaConfig mc = cfg.temma;
      mc.modality_dims = dims;
      mc.validate();
    }

    stage = "train";
    code = exit_training;
    auto out = train_and_evaluate(cfg, data, log);

    stage = "output";
    const std::filesystem::path dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
    detail::write_text(dir / "history.csv", history_csv(out.history));
    for (std::size_t m = 0; m < out.branch_histories.size(); ++m)
      detail::write_text(dir / ("history_" + data.modality_names[m] + ".csv"), history_csv(out.branch_histories[m]));
    detail::write_text(dir / "metrics.csv", out.report.to_csv());
    out.checkpoint.save(dir / "checkpoint.bin");
    if (log) *log << out.report.to_csv();
    return exit_ok;
  } catch (const std::exception& e) {
    err << "mmfuse: " << stage << " stage failed: " << e.what() << '\n';
    return code;
  }
}

// Writes a synthetic dataset in the CSV layout the csv source reads: one
// feature file per modality (segment id = sample index) and labels.csv or a
// labels/ directory for series targets.
inline void write_synthetic_csv(const data::Dataset& ds, TaskKind task, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (ds.empty()) throw DataError("write_synthetic_csv: empty dataset");
  const std::size_t M = ds.front().modalities.size();
  for (std::size_t m = 0; m < M; ++m) {
    data::FeatureTable t;
    t.columns = data::default_feature_columns(ds.front().modalities[m].cols);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& s = ds[i];
      const auto& x = s.modalities[m];
      for (std::size_t r = 0; r < s.valid; ++r)
        t.append_row(s.timestamps[r], static_cast<std::int64_t>(i),
                     std::vector<double>(x.data.begin() + static_cast<std::ptrdiff_t>(r * x.cols),
                                         x.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * x.cols)));
    }
    data::write_feature_csv(dir / ("m" + std::to_string(m) + ".csv"), t);
  }
  if (task == TaskKind::stress_arousal || task == TaskKind::stress_valence) {
    std::filesystem::create_directories(dir / "labels");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      std::ofstream os(dir / "labels" / (std::to_string(i) + ".csv"));
      os << "timestamp,arousal,valence\n" << std::setprecision(17);
      for (std::size_t r = 0; r < ds[i].valid; ++r)
        os << ds[i].timestamps[r] << ',' << ds[i].series_label(r, 0) << ',' << ds[i].series_label(r, 1) << '\n';
    }
  } else {
    std::ofstream os(dir / "labels.csv");
    os << "sample_id";
    for (std::size_t k = 0; k < ds.front().label.size(); ++k) os << ",y" << k;
    os << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      os << i;
      for (double v : ds[i].label) os << ',' << v;
      os << '\n';
    }
  }
}

}  // namespace mmfuse
