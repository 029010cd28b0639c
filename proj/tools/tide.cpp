// tide — next-basket recommendation pipelines: data prep and statistics,
// dual-expert model training, evaluation, parameter sweeps, and synthetic
// corpus generation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tide/checkpoint.hpp"
#include "tide/corpus.hpp"
#include "tide/corpus_stats.hpp"
#include "tide/eval.hpp"
#include "tide/model.hpp"
#include "tide/pattern_graph.hpp"
#include "tide/synth.hpp"
#include "tide/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tide::input_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string hex_digest(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(tide::fnv1a64(bytes)));
  return buf;
}

tide::BasketCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tide::input_error("cannot open corpus file " + path);
  try {
    return tide::ingest(in);
  } catch (const tide::input_error& e) {
    throw tide::input_error(path + ": " + e.what());
  }
}

// Every command writes one manifest: command, config echo, input digests,
// seed, tool version, duration, output paths. duration_ms is the only
// field that varies between identical runs.
class ManifestBuilder {
 public:
  explicit ManifestBuilder(std::string command)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["version"] = kVersion;
    j_["inputs"] = ordered_json::object();
    j_["outputs"] = ordered_json::array();
  }

  void input(const std::string& path, const std::string& digest) {
    j_["inputs"][path] = digest;
  }
  void config(ordered_json cfg) { j_["config"] = std::move(cfg); }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void output(const std::string& path) { j_["outputs"].push_back(path); }
  void extra(const std::string& key, ordered_json value) {
    j_[key] = std::move(value);
  }

  void write(const fs::path& out_dir, const std::string& name) {
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start_);
    j_["duration_ms"] = elapsed.count();
    write_file((out_dir / name).string(), j_.dump(2) + "\n");
  }

 private:
  ordered_json j_;
  std::chrono::steady_clock::time_point start_;
};

std::string curve_csv(const tide::BinnedCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,count\n";
  for (size_t i = 0; i < curve.x.size(); ++i) {
    out << curve.x[i] << ',' << curve.y[i] << ',' << curve.count[i] << '\n';
  }
  return out.str();
}

struct TrainFlags {
  std::string corpus_path;
  std::string out_dir;
  tide::TrainConfig cfg;
  std::string metric_name = "count";
  std::vector<std::string> ablate;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--input,--corpus", f.corpus_path, "filtered corpus CSV")
      ->required();
  cmd->add_option("--out", f.out_dir, "output directory")->required();
  cmd->add_option("--d", f.cfg.d, "embedding size (even)");
  cmd->add_option("--batch-size", f.cfg.batch_size, "users per batch");
  cmd->add_option("--lr", f.cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--l2", f.cfg.l2_gamma, "L2 penalty weight");
  cmd->add_option("--mu", f.cfg.mu, "contrastive loss weight");
  cmd->add_option("--tau", f.cfg.tau, "contrastive temperature");
  cmd->add_option("--epochs", f.cfg.epochs, "training epochs");
  cmd->add_option("--seed", f.cfg.seed, "RNG seed");
  cmd->add_option("--min-support", f.cfg.min_support,
                  "pattern mining support threshold");
  cmd->add_option("--metric", f.metric_name, "pattern mining metric")
      ->check(CLI::IsMember({"count", "npmi", "jaccard", "lift"}));
  cmd->add_option("--max-patterns", f.cfg.max_patterns,
                  "pattern count cap");
  cmd->add_option("--ablate", f.ablate, "ablation flags")
      ->check(CLI::IsMember({"no_time", "no_graph", "no_cl", "pos_variant"}));
}

void apply_ablations(TrainFlags& f) {
  f.cfg.mining_metric = tide::mining_metric_from_name(f.metric_name);
  for (const auto& a : f.ablate) {
    if (a == "no_time") f.cfg.ablation.no_time = true;
    if (a == "no_graph") f.cfg.ablation.no_graph = true;
    if (a == "no_cl") f.cfg.ablation.no_cl = true;
    if (a == "pos_variant") f.cfg.ablation.pos_variant = true;
  }
  if (f.cfg.ablation.no_cl) f.cfg.mu = 0.0;
}

ordered_json train_config_json(const tide::TrainConfig& cfg) {
  ordered_json j;
  j["d"] = cfg.d;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["l2_gamma"] = cfg.l2_gamma;
  j["mu"] = cfg.mu;
  j["tau"] = cfg.tau;
  j["epsilon_base"] = cfg.epsilon_base;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["min_support"] = cfg.min_support;
  j["mining_metric"] = tide::mining_metric_name(cfg.mining_metric);
  j["max_patterns"] = cfg.max_patterns;
  j["freq_buckets"] = cfg.freq_buckets;
  j["pos_table_rows"] = cfg.pos_table_rows;
  j["ablation"] = cfg.ablation.names();
  return j;
}

tide::TrainConfig train_config_from_json(const ordered_json& j) {
  tide::TrainConfig cfg;
  cfg.d = j.value("d", cfg.d);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.l2_gamma = j.value("l2_gamma", cfg.l2_gamma);
  cfg.mu = j.value("mu", cfg.mu);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.epsilon_base = j.value("epsilon_base", cfg.epsilon_base);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.min_support = j.value("min_support", cfg.min_support);
  cfg.mining_metric =
      tide::mining_metric_from_name(j.value("mining_metric", "count"));
  cfg.max_patterns = j.value("max_patterns", cfg.max_patterns);
  cfg.freq_buckets = j.value("freq_buckets", cfg.freq_buckets);
  cfg.pos_table_rows = j.value("pos_table_rows", cfg.pos_table_rows);
  for (const auto& a : j.value("ablation", std::vector<std::string>{})) {
    if (a == "no_time") cfg.ablation.no_time = true;
    if (a == "no_graph") cfg.ablation.no_graph = true;
    if (a == "no_cl") cfg.ablation.no_cl = true;
    if (a == "pos_variant") cfg.ablation.pos_variant = true;
  }
  return cfg;
}

int eval_threads() {
  const char* env = std::getenv("TIDE_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// ---------------------------------------------------------------------------

int cmd_prep(const std::string& input, const std::string& out_dir, int k_core,
             bool force) {
  ManifestBuilder manifest("prep");
  const std::string raw = read_file(input);
  const std::string digest = hex_digest(raw);
  manifest.input(input, digest);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const fs::path manifest_path = out / "prep_manifest.json";
  if (!force && fs::exists(manifest_path) && fs::exists(out / "corpus.csv")) {
    std::ifstream mf(manifest_path);
    ordered_json prev;
    mf >> prev;
    if (prev.value("inputs", ordered_json::object()).value(input, "") ==
            digest &&
        prev.value("config", ordered_json::object()).value("k_core", -1) ==
            k_core) {
      std::cout << "prep: outputs up to date (use --force to redo)\n";
      return 0;
    }
  }

  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);
  const auto filtered = tide::k_core_filter(corpus, k_core);
  const auto split = tide::split_leave_one_out(filtered);

  write_file((out / "corpus.csv").string(), tide::to_csv(filtered));
  manifest.output((out / "corpus.csv").string());

  ordered_json split_json;
  split_json["users"] = split.train.n_users();
  split_json["items"] = split.train.n_items();
  ordered_json per_user = ordered_json::array();
  for (int u = 0; u < split.train.n_users(); ++u) {
    ordered_json e;
    e["user"] = split.train.user_tokens[static_cast<size_t>(u)];
    e["train_baskets"] =
        split.train.sequences[static_cast<size_t>(u)].size();
    ordered_json valid_items = ordered_json::array();
    for (int i : split.valid_target[static_cast<size_t>(u)].items) {
      valid_items.push_back(split.train.item_tokens[static_cast<size_t>(i)]);
    }
    ordered_json test_items = ordered_json::array();
    for (int i : split.test_target[static_cast<size_t>(u)].items) {
      test_items.push_back(split.train.item_tokens[static_cast<size_t>(i)]);
    }
    e["valid_items"] = valid_items;
    e["test_items"] = test_items;
    per_user.push_back(e);
  }
  split_json["per_user"] = per_user;
  write_file((out / "split.json").string(), split_json.dump(2) + "\n");
  manifest.output((out / "split.json").string());

  ordered_json cfg;
  cfg["k_core"] = k_core;
  manifest.config(cfg);
  const auto stats = tide::corpus_stats(filtered);
  ordered_json stats_json;
  stats_json["interactions"] = stats.interactions;
  stats_json["users"] = stats.users;
  stats_json["baskets"] = stats.baskets;
  stats_json["items"] = stats.items;
  manifest.extra("stats", stats_json);
  manifest.write(out, "prep_manifest.json");
  return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& out_dir,
              int bins) {
  ManifestBuilder manifest("stats");
  const std::string raw = read_file(corpus_path);
  manifest.input(corpus_path, hex_digest(raw));
  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  const auto stats = tide::corpus_stats(corpus);
  ordered_json stats_json;
  stats_json["interactions"] = stats.interactions;
  stats_json["users"] = stats.users;
  stats_json["baskets"] = stats.baskets;
  stats_json["items"] = stats.items;
  stats_json["avg_baskets_per_user"] = stats.avg_baskets_per_user;
  stats_json["avg_items_per_basket"] = stats.avg_items_per_basket;
  stats_json["avg_items_per_user"] = stats.avg_items_per_user;
  write_file((out / "stats.json").string(), stats_json.dump(2) + "\n");
  manifest.output((out / "stats.json").string());

  write_file((out / "repeat_ratio_bins.csv").string(),
             curve_csv(tide::repeat_ratio_bins(corpus, bins)));
  manifest.output((out / "repeat_ratio_bins.csv").string());

  const auto intervals = tide::collect_repurchase_intervals(corpus);
  if (!intervals.empty()) {
    const double h = tide::silverman_bandwidth(intervals);
    const double lo = 0.0;
    const double hi =
        *std::max_element(intervals.begin(), intervals.end()) + 10.0 * h;
    tide::BinnedCurve kde_curve;
    const int points = 512;
    std::vector<double> grid;
    for (int i = 0; i <= points; ++i) {
      grid.push_back(lo + (hi - lo) * i / points);
    }
    const auto density = tide::repurchase_interval_density(corpus, grid);
    kde_curve.x = grid;
    kde_curve.y = density;
    kde_curve.count.assign(grid.size(),
                           static_cast<std::int64_t>(intervals.size()));
    write_file((out / "repurchase_interval_density.csv").string(),
               curve_csv(kde_curve));
    manifest.output((out / "repurchase_interval_density.csv").string());
  }

  std::vector<int> edges;
  int max_len = 2;
  for (const auto& seq : corpus.sequences) {
    max_len = std::max(max_len, static_cast<int>(seq.size()));
  }
  for (int e = 1; e <= max_len + 10; e += 10) edges.push_back(e);
  write_file((out / "history_length_vs_repeat.csv").string(),
             curve_csv(tide::history_length_vs_repeat(corpus, edges)));
  manifest.output((out / "history_length_vs_repeat.csv").string());

  write_file((out / "item_repetition_cdf.csv").string(),
             curve_csv(tide::item_repetition_cdf(corpus)));
  manifest.output((out / "item_repetition_cdf.csv").string());

  ordered_json cfg;
  cfg["bins"] = bins;
  manifest.config(cfg);
  manifest.write(out, "stats_manifest.json");
  return 0;
}

int cmd_train(TrainFlags& f) {
  apply_ablations(f);
  ManifestBuilder manifest("train");
  const std::string raw = read_file(f.corpus_path);
  manifest.input(f.corpus_path, hex_digest(raw));
  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);
  const auto split = tide::split_leave_one_out(corpus);

  tide::PatternGraph graph;
  const tide::PatternGraph* graph_ptr = nullptr;
  if (!f.cfg.ablation.no_graph) {
    graph = tide::mine_patterns(split.train, f.cfg.min_support,
                                f.cfg.mining_metric, f.cfg.max_patterns);
    graph_ptr = &graph;
  }

  tide::TideModel model = tide::build_model(split, graph_ptr, f.cfg);
  const auto result = tide::train(model, split, f.cfg);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);
  const ordered_json cfg_json = train_config_json(f.cfg);
  const std::uint64_t cfg_hash = tide::fnv1a64(cfg_json.dump());
  tide::save_checkpoint(model.store(), (out / "checkpoint").string(),
                        cfg_hash, cfg_json);
  manifest.output((out / "checkpoint.json").string());
  manifest.output((out / "checkpoint.bin").string());

  if (graph_ptr) {
    std::ostringstream graph_csv;
    tide::export_graph_csv(graph, split.train, graph_csv);
    write_file((out / "pattern_graph.csv").string(), graph_csv.str());
    manifest.output((out / "pattern_graph.csv").string());
  }

  manifest.config(cfg_json);
  manifest.seed(f.cfg.seed);
  ordered_json epochs = ordered_json::array();
  for (const auto& log : result.log) {
    epochs.push_back({{"epoch", log.epoch},
                      {"train_loss", log.train_loss},
                      {"valid_recall10", log.valid_recall10},
                      {"valid_ndcg10", log.valid_ndcg10}});
  }
  manifest.extra("epochs", epochs);
  manifest.extra("best_epoch", result.best_epoch);
  manifest.extra("best_valid_recall10", result.best_valid_recall10);
  ordered_json graph_info;
  graph_info["patterns"] = graph_ptr ? graph.n_patterns() : 0;
  graph_info["min_support"] = f.cfg.min_support;
  graph_info["metric"] = tide::mining_metric_name(f.cfg.mining_metric);
  manifest.extra("graph", graph_info);
  manifest.write(out, "train_manifest.json");

  std::cout << "train: best epoch " << result.best_epoch
            << " valid Recall@10 " << result.best_valid_recall10 << "\n";
  return 0;
}

struct EvalFlags {
  std::string corpus_path;
  std::string out_dir;
  std::vector<std::string> checkpoints;
  std::vector<int> ks;
  bool pop = false;
  bool export_rankings = false;
  bool export_intents = false;
};

int cmd_eval(EvalFlags& f) {
  if (f.ks.empty()) f.ks = {10, 20};
  std::sort(f.ks.begin(), f.ks.end());
  if (!f.pop && f.checkpoints.empty()) {
    throw tide::input_error("eval: pass --checkpoint or --pop");
  }

  ManifestBuilder manifest("eval");
  const std::string raw = read_file(f.corpus_path);
  manifest.input(f.corpus_path, hex_digest(raw));
  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);
  const auto split = tide::split_leave_one_out(corpus);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);

  ordered_json metrics;
  ordered_json ks_json = ordered_json::array();
  for (int k : f.ks) ks_json.push_back(k);
  metrics["ks"] = ks_json;
  metrics["user_count"] = split.train.n_users();

  const auto metric_block = [&](const tide::EvalRun& run) {
    ordered_json r;
    ordered_json recall, ndcg;
    for (int k : f.ks) {
      recall[std::to_string(k)] = run.recall.at(k);
      ndcg[std::to_string(k)] = run.ndcg.at(k);
    }
    r["recall"] = recall;
    r["ndcg"] = ndcg;
    return r;
  };

  if (f.pop) {
    const auto run =
        tide::evaluate_scores(tide::pop_baseline(split.train), split, f.ks);
    ordered_json block = metric_block(run);
    block["baseline"] = "pop";
    metrics["pop"] = block;
  }

  std::vector<tide::EvalRun> runs;
  for (const auto& stem : f.checkpoints) {
    manifest.input(stem + ".json", hex_digest(read_file(stem + ".json")));
    manifest.input(stem + ".bin", hex_digest(read_file(stem + ".bin")));
    const auto ck = tide::load_checkpoint(stem);
    const tide::TrainConfig cfg = train_config_from_json(ck.config);

    tide::PatternGraph graph;
    const tide::PatternGraph* graph_ptr = nullptr;
    if (!cfg.ablation.no_graph) {
      graph = tide::mine_patterns(split.train, cfg.min_support,
                                  cfg.mining_metric, cfg.max_patterns);
      graph_ptr = &graph;
    }
    tide::TideModel model = tide::build_model(split, graph_ptr, cfg);
    for (tide::Param* p : model.store().entries()) {
      p->value = ck.store.at(p->name).value;
    }

    tide::EvalRun run = tide::evaluate_model(model, split, f.ks, eval_threads());
    run.seed = cfg.seed;

    if (f.export_intents) {
      std::ostringstream tsv;
      tsv.precision(17);
      for (int u = 0; u < split.train.n_users(); ++u) {
        tsv << split.train.user_tokens[static_cast<size_t>(u)];
        for (double v : run.intents[static_cast<size_t>(u)].first) {
          tsv << '\t' << v;
        }
        for (double v : run.intents[static_cast<size_t>(u)].second) {
          tsv << '\t' << v;
        }
        tsv << '\n';
      }
      const auto path =
          out / ("intents_seed" + std::to_string(cfg.seed) + ".tsv");
      write_file(path.string(), tsv.str());
      manifest.output(path.string());
    }
    if (f.export_rankings) {
      std::ostringstream csv;
      csv.precision(17);
      csv << "user_id,rank,item_id,score\n";
      for (int u = 0; u < split.train.n_users(); ++u) {
        const auto scores =
            model.score_user(tide::detail::eval_history(split, u));
        const auto ranked = tide::rank_items(scores.y_final);
        const int top = std::min<int>(100, static_cast<int>(ranked.size()));
        for (int r = 0; r < top; ++r) {
          const int item = ranked[static_cast<size_t>(r)];
          csv << split.train.user_tokens[static_cast<size_t>(u)] << ','
              << r + 1 << ','
              << split.train.item_tokens[static_cast<size_t>(item)] << ','
              << scores.y_final[static_cast<size_t>(item)] << '\n';
        }
      }
      const auto path =
          out / ("rankings_seed" + std::to_string(cfg.seed) + ".csv");
      write_file(path.string(), csv.str());
      manifest.output(path.string());
    }

    const auto alignment = tide::alignment_histogram(run.intents, 40);
    ordered_json run_json = metric_block(run);
    run_json["seed"] = cfg.seed;
    run_json["alignment_mean"] = alignment.mean;
    run_json["alignment_stddev"] = alignment.stddev;
    if (!metrics.contains("runs")) metrics["runs"] = ordered_json::array();
    metrics["runs"].push_back(run_json);
    runs.push_back(std::move(run));
  }

  if (!runs.empty()) {
    const auto rpt = tide::aggregate_runs(runs, f.ks);
    ordered_json mean, stddev;
    for (int k : f.ks) {
      mean["recall"][std::to_string(k)] = rpt.recall_mean.at(k);
      mean["ndcg"][std::to_string(k)] = rpt.ndcg_mean.at(k);
      stddev["recall"][std::to_string(k)] = rpt.recall_std.at(k);
      stddev["ndcg"][std::to_string(k)] = rpt.ndcg_std.at(k);
    }
    metrics["mean"] = mean;
    metrics["stddev"] = stddev;
  }

  write_file((out / "metrics.json").string(), metrics.dump(2) + "\n");
  manifest.output((out / "metrics.json").string());
  ordered_json cfg;
  cfg["ks"] = ks_json;
  cfg["pop"] = f.pop;
  cfg["checkpoints"] = f.checkpoints;
  manifest.config(cfg);
  manifest.write(out, "eval_manifest.json");

  std::cout << metrics.dump(2) << "\n";
  return 0;
}

int cmd_sweep(TrainFlags& f, const std::string& axis,
              const std::vector<double>& values) {
  apply_ablations(f);
  if (values.empty()) throw tide::input_error("sweep: no values given");
  ManifestBuilder manifest("sweep");
  const std::string raw = read_file(f.corpus_path);
  manifest.input(f.corpus_path, hex_digest(raw));
  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);
  const auto split = tide::split_leave_one_out(corpus);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);

  std::ostringstream csv;
  csv.precision(17);
  csv << "axis,value,test_recall10,test_ndcg10,test_recall20,test_ndcg20,"
         "valid_recall10,best_epoch\n";
  ordered_json rows = ordered_json::array();
  double best_value = values.front();
  double best_recall = -1.0;
  for (double value : values) {
    tide::TrainConfig cfg = f.cfg;
    if (axis == "mu") {
      cfg.mu = value;
    } else if (axis == "min_support") {
      cfg.min_support = static_cast<int>(value);
    } else {
      throw tide::input_error("sweep: axis must be mu or min_support");
    }
    tide::PatternGraph graph =
        tide::mine_patterns(split.train, cfg.min_support, cfg.mining_metric,
                            cfg.max_patterns);
    tide::TideModel model = tide::build_model(split, &graph, cfg);
    const auto tr = tide::train(model, split, cfg);
    const auto run = tide::evaluate_model(model, split, {10, 20}, eval_threads());

    csv << axis << ',' << value << ',' << run.recall.at(10) << ','
        << run.ndcg.at(10) << ',' << run.recall.at(20) << ','
        << run.ndcg.at(20) << ',' << tr.best_valid_recall10 << ','
        << tr.best_epoch << '\n';
    rows.push_back({{"value", value},
                    {"test_recall10", run.recall.at(10)},
                    {"test_ndcg10", run.ndcg.at(10)},
                    {"valid_recall10", tr.best_valid_recall10},
                    {"best_epoch", tr.best_epoch}});
    if (run.recall.at(10) > best_recall) {
      best_recall = run.recall.at(10);
      best_value = value;
    }
  }

  write_file((out / "sweep.csv").string(), csv.str());
  manifest.output((out / "sweep.csv").string());
  ordered_json cfg_json = train_config_json(f.cfg);
  cfg_json["axis"] = axis;
  cfg_json["values"] = values;
  manifest.config(cfg_json);
  manifest.extra("rows", rows);
  manifest.extra("best_value", best_value);
  manifest.extra("best_test_recall10", best_recall);
  manifest.write(out, "sweep_manifest.json");
  std::cout << "sweep: best " << axis << " = " << best_value
            << " (test Recall@10 " << best_recall << ")\n";
  return 0;
}

int cmd_grid(TrainFlags& f, std::vector<double> lr_grid,
             std::vector<double> l2_grid) {
  apply_ablations(f);
  if (lr_grid.empty()) lr_grid = tide::default_grid();
  if (l2_grid.empty()) l2_grid = tide::default_grid();
  ManifestBuilder manifest("grid");
  const std::string raw = read_file(f.corpus_path);
  manifest.input(f.corpus_path, hex_digest(raw));
  std::istringstream in(raw);
  const auto corpus = tide::ingest(in);
  const auto split = tide::split_leave_one_out(corpus);
  tide::PatternGraph graph =
      tide::mine_patterns(split.train, f.cfg.min_support, f.cfg.mining_metric,
                          f.cfg.max_patterns);

  const auto result = tide::grid_search(split, graph, f.cfg, lr_grid, l2_grid);

  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);
  std::ostringstream csv;
  csv.precision(17);
  csv << "learning_rate,l2_gamma,valid_recall10,valid_ndcg10,best_epoch\n";
  for (const auto& row : result.table) {
    csv << row.learning_rate << ',' << row.l2_gamma << ','
        << row.valid_recall10 << ',' << row.valid_ndcg10 << ','
        << row.best_epoch << '\n';
  }
  write_file((out / "grid.csv").string(), csv.str());
  manifest.output((out / "grid.csv").string());
  manifest.config(train_config_json(f.cfg));
  manifest.extra("best_learning_rate", result.best.learning_rate);
  manifest.extra("best_l2_gamma", result.best.l2_gamma);
  manifest.write(out, "grid_manifest.json");
  std::cout << "grid: best lr " << result.best.learning_rate << " l2 "
            << result.best.l2_gamma << "\n";
  return 0;
}

int cmd_grad_check(int d, int users, int items, std::uint64_t seed,
                   double step, double tol) {
  tide::SynthConfig scfg;
  scfg.n_users = users;
  scfg.n_items = items;
  scfg.baskets_per_user = 8;
  scfg.periodic_items = {{0, 3, 0}};
  scfg.habit_prob = 0.4;
  scfg.pools = {{{4, 5}, 0.8}};
  scfg.noise_items_per_basket = 1;
  scfg.seed = seed;
  const auto gen = tide::generate(scfg);
  const auto split = tide::split_leave_one_out(gen.corpus);
  const auto graph = tide::mine_patterns(split.train, 2);

  tide::TrainConfig cfg;
  cfg.d = d;
  cfg.seed = seed;
  cfg.mu = 0.1;
  cfg.tau = 0.1;
  cfg.l2_gamma = 1e-4;
  tide::TideModel model = tide::build_model(split, &graph, cfg);

  const auto run = [&](bool with_grad) {
    tide::Tape tape;
    const auto pv = model.begin_pass(tape);
    tide::VarId rec_total = -1;
    std::vector<tide::VarId> zh, ze;
    for (int u = 0; u < split.train.n_users(); ++u) {
      const auto& seq = split.train.sequences[static_cast<size_t>(u)];
      if (seq.size() < 2) continue;
      std::vector<std::vector<int>> history;
      for (size_t m = 0; m + 1 < seq.size(); ++m) history.push_back(seq[m].items);
      const auto fv = model.forward_user(tape, pv, history);
      const tide::VarId lu = tide::rec_loss(tape, fv.y_final, seq.back().items);
      rec_total = rec_total < 0 ? lu : tape.add(rec_total, lu);
      zh.push_back(fv.z_habit);
      ze.push_back(fv.z_expl);
    }
    const tide::VarId cl = tide::infonce_loss(tape, zh, ze, cfg.tau);
    const tide::VarId loss = tide::total_loss(tape, rec_total, cl, cfg.mu,
                                              cfg.l2_gamma, model.store());
    if (with_grad) {
      const double v = tape.scalar(loss);
      model.store().zero_grads();
      tape.backward(loss);
      return v;
    }
    return tape.scalar(loss);
  };

  const auto report = tide::grad_check(model.store(), run, step, tol, 200);
  for (const auto& e : report.tensors) {
    std::cout << (e.pass ? "PASS " : "FAIL ") << e.name << " max_rel_err "
              << e.max_rel_err << " (" << e.coords_checked << " coords)\n";
  }
  std::cout << (report.all_pass ? "grad-check: PASS" : "grad-check: FAIL")
            << " (worst " << report.max_rel_err << ", tol " << tol << ")\n";
  return report.all_pass ? 0 : 1;
}

struct SynthFlags {
  std::string out_dir;
  tide::SynthConfig cfg;
  std::vector<std::string> periodic;  // item:period:phase
  std::vector<std::string> pools;     // i,j,k@prob
};

int cmd_synth(SynthFlags& f) {
  for (const auto& spec : f.periodic) {
    tide::PeriodicItem p;
    if (std::sscanf(spec.c_str(), "%d:%d:%d", &p.item, &p.period, &p.phase) !=
        3) {
      throw tide::input_error("synth: bad --periodic '" + spec +
                              "' (want item:period:phase)");
    }
    f.cfg.periodic_items.push_back(p);
  }
  for (const auto& spec : f.pools) {
    const auto at = spec.find('@');
    if (at == std::string::npos) {
      throw tide::input_error("synth: bad --pool '" + spec +
                              "' (want i,j,k@prob)");
    }
    tide::PatternPool pool;
    pool.co_draw = std::stod(spec.substr(at + 1));
    std::stringstream items(spec.substr(0, at));
    std::string tok;
    while (std::getline(items, tok, ',')) {
      pool.items.push_back(std::stoi(tok));
    }
    f.cfg.pools.push_back(pool);
  }

  ManifestBuilder manifest("synth");
  const auto result = tide::generate(f.cfg);
  fs::create_directories(f.out_dir);
  const fs::path out(f.out_dir);
  write_file((out / "corpus.csv").string(), result.csv);
  manifest.output((out / "corpus.csv").string());
  write_file((out / "planted.json").string(), result.manifest.dump(2) + "\n");
  manifest.output((out / "planted.json").string());
  manifest.seed(f.cfg.seed);
  manifest.config(result.manifest);
  manifest.write(out, "synth_manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tide: time-interval dual-expert next-basket recommender"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // prep
  std::string prep_input, prep_out;
  int prep_kcore = 5;
  bool prep_force = false;
  auto* prep = app.add_subcommand("prep", "ingest, k-core filter, and split");
  prep->add_option("--input", prep_input, "raw interactions CSV")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->add_option("--k-core", prep_kcore, "k-core threshold");
  prep->add_flag("--force", prep_force, "redo even when up to date");

  // stats
  std::string stats_corpus, stats_out;
  int stats_bins = 10;
  auto* stats = app.add_subcommand("stats", "behavioral statistics and curves");
  stats->add_option("--input,--corpus", stats_corpus, "corpus CSV")->required();
  stats->add_option("--out", stats_out, "output directory")->required();
  stats->add_option("--bins", stats_bins, "repeat-ratio bins");

  // train
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train the dual-expert model");
  add_train_flags(train, train_flags);

  // eval
  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "full-catalog ranking evaluation");
  eval->add_option("--input,--corpus", eval_flags.corpus_path, "corpus CSV")
      ->required();
  eval->add_option("--out", eval_flags.out_dir, "output directory")->required();
  eval->add_option("--checkpoint", eval_flags.checkpoints,
                   "checkpoint stem (repeatable for multi-seed)");
  eval->add_option("--k", eval_flags.ks, "ranking cutoffs (default 10 20)");
  eval->add_flag("--pop", eval_flags.pop, "evaluate the popularity baseline");
  eval->add_flag("--export-rankings", eval_flags.export_rankings,
                 "write per-user top-100 rankings CSV");
  eval->add_flag("--export-intents", eval_flags.export_intents,
                 "write per-user intent vectors TSV");

  // sweep
  TrainFlags sweep_flags;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "sensitivity sweep over mu or min_support");
  add_train_flags(sweep, sweep_flags);
  sweep->add_option("--axis", sweep_axis, "mu or min_support")
      ->required()
      ->check(CLI::IsMember({"mu", "min_support"}));
  sweep->add_option("--values", sweep_values, "axis values")->required();

  // grid
  TrainFlags grid_flags;
  std::vector<double> grid_lr, grid_l2;
  auto* grid = app.add_subcommand("grid", "grid search over lr and l2");
  add_train_flags(grid, grid_flags);
  grid->add_option("--lr-grid", grid_lr, "learning-rate grid");
  grid->add_option("--l2-grid", grid_l2, "l2 grid");

  // grad-check
  int gc_d = 8, gc_users = 5, gc_items = 20;
  std::uint64_t gc_seed = 7;
  double gc_step = 1e-4, gc_tol = 1e-3;
  auto* gc = app.add_subcommand("grad-check",
                                "finite-difference check on a micro model");
  gc->add_option("--d", gc_d, "embedding size");
  gc->add_option("--users", gc_users, "user count");
  gc->add_option("--items", gc_items, "item count");
  gc->add_option("--seed", gc_seed, "seed");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--tol", gc_tol, "relative tolerance");

  // synth
  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--out", synth_flags.out_dir, "output directory")
      ->required();
  synth->add_option("--users", synth_flags.cfg.n_users, "user count");
  synth->add_option("--items", synth_flags.cfg.n_items, "item count");
  synth->add_option("--baskets", synth_flags.cfg.baskets_per_user,
                    "baskets per user");
  synth->add_option("--periodic", synth_flags.periodic,
                    "planted periodic item item:period:phase (repeatable)");
  synth->add_option("--habit-prob", synth_flags.cfg.habit_prob,
                    "re-purchase probability");
  synth->add_option("--pool", synth_flags.pools,
                    "co-occurrence pool i,j,k@prob (repeatable)");
  synth->add_option("--noise", synth_flags.cfg.noise_items_per_basket,
                    "noise items per basket");
  synth->add_option("--seed", synth_flags.cfg.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prep) return cmd_prep(prep_input, prep_out, prep_kcore, prep_force);
    if (*stats) return cmd_stats(stats_corpus, stats_out, stats_bins);
    if (*train) return cmd_train(train_flags);
    if (*eval) return cmd_eval(eval_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_axis, sweep_values);
    if (*grid) return cmd_grid(grid_flags, grid_lr, grid_l2);
    if (*gc) {
      return cmd_grad_check(gc_d, gc_users, gc_items, gc_seed, gc_step,
                            gc_tol);
    }
    if (*synth) return cmd_synth(synth_flags);
  } catch (const tide::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
