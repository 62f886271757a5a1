#pragma once

// Training and evaluation loop: one bag per optimizer step, seeded per-epoch
// shuffling, validation after every epoch, and test evaluation of the epoch
// with the best validation accuracy (earliest on ties).

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igt/bag_io.hpp"
#include "igt/checkpoint.hpp"
#include "igt/config.hpp"
#include "igt/metrics.hpp"
#include "igt/model.hpp"
#include "igt/optim.hpp"

namespace igt {

using LogFn = std::function<void(const std::string&)>;

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0;
  double train_loss = 0;  // mean over bags
  double val_accuracy = 0;
  std::optional<double> val_auroc;

  bool operator==(const EpochRecord&) const = default;
};

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::string config;  // serialized TrainConfig
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  std::size_t optimizer_steps = 0;
  EvalReport test;
  double wall_clock_seconds = 0;

  /// Equality of everything except wall-clock time.
  bool same_results(const RunRecord& o) const {
    return config_hash == o.config_hash && config == o.config && epochs == o.epochs &&
           selected_epoch == o.selected_epoch && optimizer_steps == o.optimizer_steps && test == o.test;
  }
};

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
  j["config_hash"] = hash;
  j["config"] = r.config;
  auto eps = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs) {
    nlohmann::ordered_json je;
    je["epoch"] = e.epoch;
    je["lr"] = e.lr;
    je["train_loss"] = e.train_loss;
    je["val_accuracy"] = e.val_accuracy;
    je["val_auroc"] = e.val_auroc ? nlohmann::ordered_json(*e.val_auroc) : nlohmann::ordered_json(nullptr);
    eps.push_back(je);
  }
  j["epochs"] = eps;
  j["selected_epoch"] = r.selected_epoch;
  j["optimizer_steps"] = r.optimizer_steps;
  j["test"] = to_json(r.test);
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  r.config = j.at("config").get<std::string>();
  for (const auto& je : j.at("epochs")) {
    EpochRecord e;
    e.epoch = je.at("epoch").get<std::size_t>();
    e.lr = je.at("lr").get<double>();
    e.train_loss = je.at("train_loss").get<double>();
    e.val_accuracy = je.at("val_accuracy").get<double>();
    if (!je.at("val_auroc").is_null()) e.val_auroc = je.at("val_auroc").get<double>();
    r.epochs.push_back(e);
  }
  r.selected_epoch = j.at("selected_epoch").get<std::size_t>();
  r.optimizer_steps = j.at("optimizer_steps").get<std::size_t>();
  r.test = eval_report_from_json(j.at("test"));
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return r;
}

inline ModelShape model_shape(const TrainConfig& cfg, std::size_t d_in, std::size_t n_classes) {
  if (cfg.d_in != 0 && cfg.d_in != d_in)
    throw ConfigError("config d_in=" + std::to_string(cfg.d_in) + " but dataset has d_in=" + std::to_string(d_in));
  ModelShape s;
  s.d_in = d_in;
  s.d = cfg.d;
  s.n_blocks = cfg.n_blocks;
  s.n_heads = cfg.n_heads;
  s.d_att = cfg.d_att;
  s.n_classes = n_classes;
  s.genconv_beta = cfg.genconv_beta;
  s.genconv_epsilon = cfg.genconv_epsilon;
  return s;
}

inline ForwardOptions forward_options(const TrainConfig& cfg) {
  ForwardOptions o;
  o.mode = cfg.mode;
  o.attention.kernel = cfg.attention_kernel;
  o.attention.block = cfg.attention_block;
  return o;
}

inline GraphConfig graph_config(const TrainConfig& cfg) { return GraphConfig{cfg.k, true, cfg.knn_space}; }

template <typename T>
std::vector<WsiGraph<T>> build_graphs(const std::vector<BagRecord>& bags, const GraphConfig& gc) {
  std::vector<WsiGraph<T>> out;
  out.reserve(bags.size());
  for (const auto& b : bags) out.push_back(to_graph<T>(b, gc));
  return out;
}

/// Class probabilities of every bag (inference only; `model` must not require grad).
template <typename T>
std::vector<std::vector<double>> predict_probabilities(const IgtModel<T>& model, const std::vector<WsiGraph<T>>& graphs,
                                                       const ForwardOptions& opt) {
  std::vector<std::vector<double>> probs;
  probs.reserve(graphs.size());
  for (const auto& g : graphs) {
    const auto out = model_forward(model, g.features, g.adjacency, opt);
    const auto p = softmax_values<T>(out.logits.data());
    probs.emplace_back(p.begin(), p.end());
  }
  return probs;
}

template <typename T>
EvalReport evaluate_model(const IgtModel<T>& model, const std::vector<WsiGraph<T>>& graphs, const ForwardOptions& opt) {
  std::vector<std::size_t> labels;
  for (const auto& g : graphs) labels.push_back(g.label);
  return make_report(predict_probabilities(model, graphs, opt), labels, model.shape.n_classes);
}

template <typename T>
struct TrainResult {
  RunRecord record;
  IgtModel<T> best;  // parameters of the selected epoch
};

template <typename T>
TrainResult<T> train(const TrainConfig& cfg, const BagDataset& data, const LogFn& log = {}) {
  cfg.validate();
  if (data.train.empty() || data.val.empty() || data.test.empty())
    throw ConfigError("train, val and test splits must all be nonempty");
  const auto start = std::chrono::steady_clock::now();
  const GraphConfig gc = graph_config(cfg);
  const auto train_graphs = build_graphs<T>(data.train, gc);
  const auto val_graphs = build_graphs<T>(data.val, gc);
  const auto test_graphs = build_graphs<T>(data.test, gc);

  IgtModel<T> model = IgtModel<T>::init(model_shape(cfg, data.d_in, data.n_classes()), derive_seed(cfg.seed, 1));
  auto [params, names] = model.trainable(cfg.mode);
  for (auto& p : params) p.set_requires_grad(true);
  RAdam<T> opt(RAdamConfig{cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay});
  const LrSchedule sched{cfg.lr_initial, cfg.lr_decayed, static_cast<int>(cfg.decay_epoch)};
  const ForwardOptions fwd = forward_options(cfg);
  Rng order_rng(derive_seed(cfg.seed, 2));

  RunRecord rec;
  rec.config = serialize_config(cfg);
  rec.config_hash = config_hash(cfg);
  std::optional<IgtModel<T>> best;
  double best_val = -1;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(static_cast<int>(epoch), sched);
    const auto order = order_rng.permutation(train_graphs.size());
    double loss_sum = 0;
    for (auto idx : order) {
      const auto& g = train_graphs[idx];
      for (auto& p : params) p.zero_grad();
      auto out = model_forward(model, g.features, g.adjacency, fwd);
      auto loss = cross_entropy(out.logits, g.label);
      const double lv = static_cast<double>(loss.data()[0]);
      if (!std::isfinite(lv))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", bag " + g.name);
      backward(loss);
      try {
        opt.step(params, lr, names);
      } catch (const TrainingError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", bag " + g.name);
      }
      ++rec.optimizer_steps;
      loss_sum += lv;
    }
    IgtModel<T> snapshot = model.clone();
    const EvalReport val = evaluate_model(snapshot, val_graphs, fwd);
    rec.epochs.push_back({epoch, lr, loss_sum / static_cast<double>(train_graphs.size()), val.accuracy, val.auroc});
    if (val.accuracy > best_val) {
      best_val = val.accuracy;
      rec.selected_epoch = epoch;
      best = std::move(snapshot);
    }
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %3zu  lr %.1e  loss %.4f  val_acc %.4f  val_auroc %s", epoch, lr,
                    rec.epochs.back().train_loss, val.accuracy,
                    val.auroc ? std::to_string(*val.auroc).c_str() : "n/a");
      log(buf);
    }
  }
  rec.test = evaluate_model(*best, test_graphs, fwd);
  rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(rec), std::move(*best)};
}

/// Evaluates a checkpoint on one split of `data` under `cfg`'s architecture.
template <typename T>
EvalReport evaluate_checkpoint(const Checkpoint& ck, const TrainConfig& cfg, const BagDataset& data,
                               std::string_view split) {
  IgtModel<T> model = IgtModel<T>::init(model_shape(cfg, data.d_in, data.n_classes()), 0);
  load_into(model, ck);
  const auto graphs = build_graphs<T>(data.split(split), graph_config(cfg));
  if (graphs.empty()) throw ConfigError("split '" + std::string(split) + "' is empty");
  return evaluate_model(model, graphs, forward_options(cfg));
}

struct AblationRow {
  BlockMode mode = BlockMode::Full;
  std::vector<RunRecord> runs;
  double mean_accuracy = 0;
  std::optional<double> mean_auroc;
};

struct AblationTable {
  std::string dataset;
  std::vector<AblationRow> rows;  // full, no-attn, no-gcn
};

/// Trains every branch configuration with seeds base+0 .. base+repeats-1.
template <typename T>
AblationTable ablate(const TrainConfig& cfg, const BagDataset& data, const LogFn& log = {}) {
  cfg.validate();
  AblationTable table;
  table.dataset = data.task;
  for (BlockMode mode : {BlockMode::Full, BlockMode::NoAttn, BlockMode::NoGcn}) {
    AblationRow row;
    row.mode = mode;
    double acc = 0, auc = 0;
    bool auc_ok = true;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      TrainConfig c = cfg;
      c.mode = mode;
      c.seed = cfg.seed + r;
      if (log) log("ablate: mode " + std::string(to_string(mode)) + ", seed " + std::to_string(c.seed));
      auto res = train<T>(c, data, log);
      acc += res.record.test.accuracy;
      if (res.record.test.auroc)
        auc += *res.record.test.auroc;
      else
        auc_ok = false;
      row.runs.push_back(std::move(res.record));
    }
    row.mean_accuracy = acc / static_cast<double>(cfg.repeats);
    if (auc_ok) row.mean_auroc = auc / static_cast<double>(cfg.repeats);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline nlohmann::ordered_json to_json(const AblationTable& t) {
  nlohmann::ordered_json j;
  j["dataset"] = t.dataset;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json jr;
    jr["backbone"] = to_string(r.mode);
    jr["accuracy"] = r.mean_accuracy;
    jr["auroc"] = r.mean_auroc ? nlohmann::ordered_json(*r.mean_auroc) : nlohmann::ordered_json(nullptr);
    auto runs = nlohmann::ordered_json::array();
    for (const auto& run : r.runs) runs.push_back(to_json(run));
    jr["runs"] = runs;
    rows.push_back(jr);
  }
  j["rows"] = rows;
  return j;
}

/// Plain-text table, one row per backbone with mean ACC/AUROC in percent.
inline std::string format_table(const AblationTable& t) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s  %-8s  %8s  %8s\n", "dataset", "backbone", "ACC(%)", "AUC(%)");
  out += buf;
  for (const auto& r : t.rows) {
    char auc[16] = "n/a";
    if (r.mean_auroc) std::snprintf(auc, sizeof auc, "%.1f", 100.0 * *r.mean_auroc);
    std::snprintf(buf, sizeof buf, "%-10s  %-8s  %8.1f  %8s\n", t.dataset.c_str(), std::string(to_string(r.mode)).c_str(),
                  100.0 * r.mean_accuracy, auc);
    out += buf;
  }
  return out;
}

}  // namespace igt
