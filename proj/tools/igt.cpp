// igt: dataset generation, training, evaluation, ablation, gradient checks and
// attention-kernel benchmarks.
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime or validation failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "igt/igt.hpp"

namespace fs = std::filesystem;
using namespace igt;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
}

void log_line(const std::string& s) { std::cerr << s << "\n"; }

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  std::string task = "spatial-motif";
  std::size_t bags = 500;
  std::size_t dim = 64;
  std::size_t n_min = 64, n_max = 256;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  SynthSpec s;
  s.task = parse_synth_task(a.task);
  s.n_bags = a.bags;
  s.d_in = a.dim;
  s.n_min = a.n_min;
  s.n_max = a.n_max;
  s.noise = a.noise;
  s.seed = a.seed;
  const BagDataset ds = generate_dataset(s);
  const auto manifest = write_dataset(a.out, ds);
  std::size_t pos = 0;
  for (const auto* split : {&ds.train, &ds.val, &ds.test})
    for (const auto& b : *split) pos += b.label;
  std::printf("%s: %zu bags (class 0: %zu, class 1: %zu), d_in %zu, splits %zu/%zu/%zu -> %s\n", a.task.c_str(),
              ds.n_bags(), ds.n_bags() - pos, pos, a.dim, ds.train.size(), ds.val.size(), ds.test.size(),
              manifest.string().c_str());
  return 0;
}

// ------------------------------------------------------- train/eval/ablate

struct RunArgs {
  std::string config;
  std::string data;
  std::string out;
  std::vector<std::string> sets;  // key=value
  std::map<std::string, std::string> flags;  // explicit per-key flags
};

TrainConfig resolve_config(const RunArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_config(a.config);
  for (const auto& [k, v] : a.flags) set_config_value(cfg, k, v);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (const char* env = std::getenv("IGT_PRECISION"); env && *env) cfg.precision = parse_precision(env);
  cfg.validate();
  return cfg;
}

void add_override_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--set", a.sets, "Override a config key (key=value); repeatable");
  for (const char* key : {"mode", "epochs", "seed", "d", "n_blocks", "k", "precision", "attention_kernel",
                          "attention_block", "decay_epoch", "repeats", "knn_space"}) {
    std::string flag = std::string("--") + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    cmd->add_option_function<std::string>(
        flag, [&a, key](const std::string& v) { a.flags[key] = v; }, std::string("Override config key ") + key);
  }
}

template <typename T>
int run_train_t(const TrainConfig& cfg, const BagDataset& ds, const fs::path& out) {
  auto res = train<T>(cfg, ds, log_line);
  fs::create_directories(out);
  save_checkpoint((out / "checkpoint.igt").string(), res.best);
  write_text(out / "config.cfg", serialize_config(cfg));
  write_text(out / "run.json", to_json(res.record).dump(2) + "\n");
  const auto& t = res.record.test;
  std::printf("selected epoch %zu, test accuracy %.4f, test auroc %s, %.1fs\n", res.record.selected_epoch, t.accuracy,
              t.auroc ? std::to_string(*t.auroc).c_str() : "undefined", res.record.wall_clock_seconds);
  return 0;
}

int run_train(const RunArgs& a) {
  const TrainConfig cfg = resolve_config(a);
  const BagDataset ds = load_dataset(a.data);
  return cfg.precision == Precision::F32 ? run_train_t<float>(cfg, ds, a.out) : run_train_t<double>(cfg, ds, a.out);
}

int run_eval(const RunArgs& a, const std::string& checkpoint, const std::string& split) {
  const TrainConfig cfg = resolve_config(a);
  const BagDataset ds = load_dataset(a.data);
  const Checkpoint ck = read_checkpoint(checkpoint);
  const EvalReport r = cfg.precision == Precision::F32 ? evaluate_checkpoint<float>(ck, cfg, ds, split)
                                                       : evaluate_checkpoint<double>(ck, cfg, ds, split);
  const std::string json = to_json(r).dump(2) + "\n";
  if (!a.out.empty()) {
    fs::create_directories(fs::path(a.out).parent_path().empty() ? "." : fs::path(a.out).parent_path());
    write_text(a.out, json);
  }
  std::cout << json;
  return 0;
}

int run_ablate(const RunArgs& a) {
  const TrainConfig cfg = resolve_config(a);
  const BagDataset ds = load_dataset(a.data);
  const AblationTable t = cfg.precision == Precision::F32 ? ablate<float>(cfg, ds, log_line)
                                                          : ablate<double>(cfg, ds, log_line);
  const std::string table = format_table(t);
  fs::create_directories(a.out);
  write_text(fs::path(a.out) / "ablation.json", to_json(t).dump(2) + "\n");
  write_text(fs::path(a.out) / "ablation.txt", table);
  std::cout << table;
  return 0;
}

// --------------------------------------------------------------- gradcheck

int run_gradcheck(std::uint64_t seed, const std::vector<std::size_t>& sizes) {
  GradcheckSuiteOptions o;
  o.seed = seed;
  if (!sizes.empty()) o.sizes = sizes;
  const auto results = gradcheck_suite(o);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-26s max_rel_error %.3e  %s  (%zu entries, worst %s)\n", r.component.c_str(), r.max_rel_error,
                r.passed ? "pass" : "FAIL", r.n_checked, r.worst.c_str());
    ok = ok && r.passed;
  }
  if (!ok) {
    for (const auto& r : results)
      if (!r.passed)
        std::fprintf(stderr, "gradcheck failed: %s max relative error %.3e at %s (analytic %.6e, numeric %.6e)\n",
                     r.component.c_str(), r.max_rel_error, r.worst.c_str(), r.worst_analytic, r.worst_numeric);
    return 2;
  }
  std::printf("all %zu checks passed (threshold %.0e)\n", results.size(), o.check.threshold);
  return 0;
}

// -------------------------------------------------------------- bench-attn

struct BenchRow {
  std::size_t n = 0, block = 0;
  double naive_ms = 0, tiled_ms = 0;
  std::size_t naive_buffer = 0, tiled_aux = 0;
  double max_dev = 0;
};

template <typename T>
int run_bench_t(const std::vector<std::size_t>& ns, std::size_t d, const std::vector<std::size_t>& blocks,
                std::size_t heads, std::uint64_t seed, double tol) {
  Rng rng(seed);
  AttentionParams<T> p;
  p.n_heads = heads;
  const double bound = std::sqrt(3.0 / static_cast<double>(d));
  for (Tensor<T>* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    *w = Tensor<T>(d, d);
    for (auto& v : w->data()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };
  std::vector<BenchRow> rows;
  bool ok = true;
  std::printf("%7s %7s %11s %11s %14s %14s %11s\n", "N", "block", "naive_ms", "tiled_ms", "naive_NxN", "tiled_aux",
              "max_dev");
  for (std::size_t n : ns) {
    Tensor<T> h(n, d);
    for (auto& v : h.data()) v = static_cast<T>(rng.normal());
    AttentionStats ns_stats;
    const auto t0 = clock::now();
    const Tensor<T> ref = attention_naive(h, p, &ns_stats);
    const auto t1 = clock::now();
    for (std::size_t b : blocks) {
      const std::size_t blk = b == 0 ? n : b;  // 0 means block = N
      AttentionStats ts;
      const auto t2 = clock::now();
      const Tensor<T> out = attention_tiled(h, p, blk, &ts);
      const auto t3 = clock::now();
      double dev = 0;
      for (std::size_t i = 0; i < out.data().size(); ++i)
        dev = std::max(dev, std::abs(static_cast<double>(out.data()[i]) - static_cast<double>(ref.data()[i])));
      BenchRow r{n, blk, ms(t0, t1), ms(t2, t3), ns_stats.weight_buffer_elements, ts.peak_aux_elements, dev};
      std::printf("%7zu %7zu %11.2f %11.2f %14zu %14zu %11.3e\n", r.n, r.block, r.naive_ms, r.tiled_ms,
                  r.naive_buffer, r.tiled_aux, r.max_dev);
      if (!(dev <= tol)) {
        std::fprintf(stderr, "equivalence breach at N=%zu block=%zu: max deviation %.3e > %.0e\n", n, blk, dev, tol);
        ok = false;
      }
      if (r.naive_buffer != n * n) {
        std::fprintf(stderr, "naive weight buffer at N=%zu is %zu, expected N^2\n", n, r.naive_buffer);
        ok = false;
      }
      rows.push_back(r);
    }
  }
  // Same explicit block size at two different N must report the same footprint
  // (once both N are at least the block size).
  for (const auto& a : rows)
    for (const auto& b : rows)
      if (a.block == b.block && a.n >= a.block && b.n >= b.block && a.tiled_aux != b.tiled_aux) {
        std::fprintf(stderr, "tiled auxiliary footprint depends on N at block %zu (%zu vs %zu)\n", a.block,
                     a.tiled_aux, b.tiled_aux);
        ok = false;
      }
  return ok ? 0 : 2;
}

std::vector<std::size_t> parse_list(const std::string& s, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    if (item == "N" || item == "n") {
      out.push_back(0);
      continue;
    }
    try {
      out.push_back(detail::parse_count(item));
    } catch (const ConfigError&) {
      throw ConfigError(std::string(what) + ": expected comma-separated integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrative Graph-Transformer for multiple-instance bag classification"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic bag dataset");
  gen_cmd->add_option("--task", gen.task, "spatial-motif, long-range or hybrid")->capture_default_str();
  gen_cmd->add_option("--bags", gen.bags, "Number of bags")->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "Instance feature dimension")->capture_default_str();
  gen_cmd->add_option("--n-min", gen.n_min, "Minimum instances per bag")->capture_default_str();
  gen_cmd->add_option("--n-max", gen.n_max, "Maximum instances per bag")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Noise level")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  RunArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one model and evaluate it on the test split");
  train_cmd->add_option("--config", tr.config, "Config file (key = value)");
  train_cmd->add_option("--data", tr.data, "Dataset manifest or directory")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  add_override_flags(train_cmd, tr);

  RunArgs ev;
  std::string ev_ckpt, ev_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval_cmd->add_option("--config", ev.config, "Config file the checkpoint was trained with");
  eval_cmd->add_option("--data", ev.data, "Dataset manifest or directory")->required();
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--split", ev_split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Write the report JSON here");
  add_override_flags(eval_cmd, ev);

  RunArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train full, no-attn and no-gcn models over repeated seeds");
  ablate_cmd->add_option("--config", ab.config, "Config file (key = value)");
  ablate_cmd->add_option("--data", ab.data, "Dataset manifest or directory")->required();
  ablate_cmd->add_option("--out", ab.out, "Output directory")->required();
  add_override_flags(ablate_cmd, ab);

  std::uint64_t gc_seed = GradcheckSuiteOptions{}.seed;
  std::string gc_sizes;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer (64-bit)");
  gc_cmd->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--sizes", gc_sizes, "Comma-separated bag sizes (default 1,2,6)");

  std::string b_ns = "256,1024,4096", b_blocks = "16,128,N", b_precision = "f32";
  std::size_t b_d = 256, b_heads = 8;
  std::uint64_t b_seed = 0;
  auto* bench_cmd = app.add_subcommand("bench-attn", "Compare naive and tiled attention: time, memory, deviation");
  bench_cmd->add_option("--n-list", b_ns, "Comma-separated N values")->capture_default_str();
  bench_cmd->add_option("--d", b_d, "Model width")->capture_default_str();
  bench_cmd->add_option("--block-list", b_blocks, "Comma-separated block sizes; N means block = N")
      ->capture_default_str();
  bench_cmd->add_option("--heads", b_heads, "Attention heads")->capture_default_str();
  bench_cmd->add_option("--precision", b_precision, "f32 or f64")->capture_default_str();
  bench_cmd->add_option("--seed", b_seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev, ev_ckpt, ev_split);
    if (*ablate_cmd) return run_ablate(ab);
    if (*gc_cmd) return run_gradcheck(gc_seed, gc_sizes.empty() ? std::vector<std::size_t>{} : parse_list(gc_sizes, "--sizes"));
    if (*bench_cmd) {
      Precision prec = parse_precision(b_precision);
      if (const char* env = std::getenv("IGT_PRECISION"); env && *env) prec = parse_precision(env);
      if (b_heads == 0 || b_d % b_heads != 0) throw ConfigError("--d must be divisible by --heads");
      const auto ns = parse_list(b_ns, "--n-list");
      const auto blocks = parse_list(b_blocks, "--block-list");
      return prec == Precision::F32 ? run_bench_t<float>(ns, b_d, blocks, b_heads, b_seed, 1e-5)
                                    : run_bench_t<double>(ns, b_d, blocks, b_heads, b_seed, 1e-12);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
