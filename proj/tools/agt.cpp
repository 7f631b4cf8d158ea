// Command-line entrypoint: data generation, coarsening, training, evaluation,
// the homophily sweep, and sampling-table inspection. Every run directory
// gets a manifest (config snapshot, seed, input hashes, phase timings) so it
// can be reproduced exactly.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agt/bandit.hpp"
#include "agt/coarsen.hpp"
#include "agt/graph.hpp"
#include "agt/graph_io.hpp"
#include "agt/heuristics.hpp"
#include "agt/manifest.hpp"
#include "agt/model.hpp"
#include "agt/newman.hpp"
#include "agt/rng.hpp"
#include "agt/trainer.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Hash whichever of the standard graph files exist under `dir`.
void hash_graph_inputs(agt::RunManifest& manifest, const fs::path& dir) {
  for (const char* name : {"edges.txt", "features.csv", "labels.csv"}) {
    const fs::path file = dir / name;
    if (fs::exists(file)) manifest.add_input(file);
  }
}

agt::DataSplit split_for(const agt::Graph& g, const agt::TrainConfig& cfg,
                         const std::string& split_file) {
  if (!split_file.empty()) return agt::load_split(split_file, g.n);
  agt::RandomEngine rng(agt::RandomEngine::mix(cfg.seed, 0x5b117));
  return agt::make_split(g.n, cfg.train_fraction, cfg.validation_fraction, rng);
}

agt::Partition partition_for(const agt::Graph& g, const agt::TrainConfig& cfg,
                             const std::string& partition_file, double* seconds) {
  if (!partition_file.empty()) {
    if (seconds) *seconds = 0.0;
    return agt::load_partition(partition_file, g.n);
  }
  const auto start = Clock::now();
  agt::Partition part = agt::coarsen(g, cfg.coarsen_rate, cfg.coarsen_method);
  if (seconds) *seconds = seconds_since(start);
  return part;
}

void write_bandit_state(const fs::path& file, const agt::BanditState& state) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  auto line = [&out](const char* key, const std::vector<double>& v) {
    out << key << " =";
    for (double x : v) out << ' ' << x;
    out << '\n';
  };
  line("weights", state.weights);
  line("probs", state.probs);
}

agt::BanditState read_bandit_state(const fs::path& file, const agt::TrainConfig& cfg) {
  agt::BanditState state = agt::BanditState::make(agt::kNumHeuristics, cfg.exploration_floor,
                                                  cfg.update_period, cfg.fine_slots);
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open bandit state file " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key, eq;
    if (!(ss >> key >> eq) || eq != "=")
      throw std::runtime_error(file.string() + ": expected 'key = values', got '" + line + "'");
    std::vector<double> values;
    double v = 0.0;
    while (ss >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != agt::kNumHeuristics)
      throw std::runtime_error(file.string() + ": '" + key + "' needs " +
                               std::to_string(agt::kNumHeuristics) + " values");
    if (key == "weights") state.weights = values;
    else if (key == "probs") state.probs = values;
    else throw std::runtime_error(file.string() + ": unknown key '" + key + "'");
  }
  return state;
}

// Frozen sampling distribution for evaluation when no trained bandit state
// is available: exact one-hot for pinned strategies, uniform for adaptive.
agt::BanditState fallback_bandit(const agt::TrainConfig& cfg) {
  agt::BanditState state = agt::BanditState::make(agt::kNumHeuristics, cfg.exploration_floor,
                                                  cfg.update_period, cfg.fine_slots);
  if (cfg.strategy != agt::SamplingStrategy::Adaptive) {
    std::fill(state.probs.begin(), state.probs.end(), 0.0);
    state.probs[static_cast<std::size_t>(cfg.strategy) - 1] = 1.0;
    state.weights = state.probs;
  }
  return state;
}

int run_generate_newman(const agt::NewmanConfig& nc, const fs::path& out, double train_fraction,
                        double validation_fraction) {
  const auto start = Clock::now();
  const agt::Graph g = agt::generate_newman(nc);
  fs::create_directories(out);
  agt::save_graph(out, g);

  agt::RandomEngine root(nc.seed);
  auto split_rng = root.spawn(0x5b117);
  const agt::DataSplit split = agt::make_split(g.n, train_fraction, validation_fraction, split_rng);
  agt::save_split(out / "split.csv", split);

  agt::RunManifest manifest;
  manifest.command = "generate-newman";
  manifest.seed = nc.seed;
  manifest.config = {{"n", std::to_string(nc.n)},
                     {"classes", std::to_string(nc.classes)},
                     {"z_in", std::to_string(nc.z_in)},
                     {"z_out", std::to_string(nc.z_out)},
                     {"attr_dim", std::to_string(nc.attr_dim)},
                     {"h_in", std::to_string(nc.h_in)},
                     {"h_out", std::to_string(nc.h_out)},
                     {"train_fraction", std::to_string(train_fraction)},
                     {"validation_fraction", std::to_string(validation_fraction)}};
  for (const char* name : {"edges.txt", "features.csv", "labels.csv", "split.csv"})
    manifest.add_input(out / name);
  manifest.timings_seconds["generation"] = seconds_since(start);
  manifest.write(out / "manifest.json");

  std::cout << "generated " << g.n << " nodes, " << g.num_edges() << " edges, homophily "
            << agt::homophily(g) << " (expected " << agt::expected_homophily(nc) << ")\n"
            << "wrote " << (out / "edges.txt").string() << ", features.csv, labels.csv, split.csv\n";
  return 0;
}

int run_coarsen(const fs::path& data, double rate, const std::string& method_name,
                const fs::path& out) {
  const agt::CoarsenMethod method = agt::parse_coarsen_method(method_name);
  const agt::Graph g = agt::load_graph(data);

  const auto start = Clock::now();
  const agt::Partition part = agt::coarsen(g, rate, method);
  const double coarsen_seconds = seconds_since(start);

  fs::create_directories(out);
  agt::save_partition(out / "partition.txt", part);

  agt::RunManifest manifest;
  manifest.command = "coarsen";
  manifest.config = {{"rate", std::to_string(rate)}, {"method", method_name}};
  hash_graph_inputs(manifest, data);
  manifest.timings_seconds["coarsening"] = coarsen_seconds;
  manifest.write(out / "manifest.json");

  std::cout << "coarsened " << g.n << " nodes into " << part.num_clusters << " clusters ("
            << method_name << ") in " << coarsen_seconds << " s\n"
            << "wrote " << (out / "partition.txt").string() << '\n';
  return 0;
}

int run_train(const fs::path& data, const fs::path& config_file, const fs::path& out,
              const std::string& split_file, const std::string& partition_file) {
  const agt::TrainConfig cfg = agt::parse_train_config(config_file);
  const agt::Graph g = agt::load_graph(data);
  const agt::DataSplit split = split_for(g, cfg, split_file);

  double coarsen_seconds = 0.0;
  const agt::Partition part = partition_for(g, cfg, partition_file, &coarsen_seconds);
  const agt::CoarseGraph coarse = agt::coarse_algebra(g, part);

  const auto start = Clock::now();
  const agt::TrainResult result = agt::train(g, coarse, split, cfg);
  const double train_seconds = seconds_since(start);

  fs::create_directories(out);
  agt::write_metrics_csv(out / "metrics.csv", result.log);
  agt::write_bandit_trace_csv(out / "bandit_trace.csv", result.log);
  agt::save_checkpoint(out / "checkpoint.bin", result.params);
  write_bandit_state(out / "bandit.txt", result.bandit);
  agt::write_train_config(out / "config.txt", cfg);
  agt::save_split(out / "split.csv", split);
  agt::save_partition(out / "partition.txt", part);

  agt::RunManifest manifest;
  manifest.command = "train";
  manifest.config = agt::config_to_map(cfg);
  manifest.seed = cfg.seed;
  hash_graph_inputs(manifest, data);
  manifest.add_input(config_file);
  if (!split_file.empty()) manifest.add_input(split_file);
  if (!partition_file.empty()) manifest.add_input(partition_file);
  manifest.timings_seconds["coarsening"] = coarsen_seconds;
  manifest.timings_seconds["sampling_tables"] = result.log.q_build_seconds;
  manifest.timings_seconds["training"] = train_seconds;
  manifest.timings_seconds["bandit_updates"] = result.log.bandit_update_seconds;
  manifest.write(out / "manifest.json");

  if (result.log.aborted_non_finite)
    std::cout << "warning: loss became non-finite; stopped early, kept best checkpoint\n";
  std::cout << "trained " << result.log.epochs.size() << " epochs";
  if (result.log.best_val_epoch >= 0)
    std::cout << ", best validation accuracy " << result.log.best_val_accuracy << " at epoch "
              << result.log.best_val_epoch;
  std::cout << "\ntest accuracy " << result.log.test_accuracy << "\nwrote " << out.string()
            << "/{metrics.csv, bandit_trace.csv, checkpoint.bin, bandit.txt, manifest.json}\n";
  return 0;
}

int run_eval(const fs::path& data, const fs::path& checkpoint, const fs::path& config_file,
             const std::string& split_file, const std::string& subset,
             const std::string& partition_file, const std::string& bandit_file) {
  const agt::TrainConfig cfg = agt::parse_train_config(config_file);
  const agt::Graph g = agt::load_graph(data);
  const agt::ModelParams params = agt::load_checkpoint(checkpoint);

  std::vector<int> nodes;
  if (subset == "all") {
    nodes.resize(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) nodes[static_cast<std::size_t>(i)] = i;
  } else {
    if (split_file.empty())
      throw std::runtime_error("--split is required for subset '" + subset + "'");
    const agt::DataSplit split = agt::load_split(split_file, g.n);
    if (subset == "train") nodes = split.train;
    else if (subset == "validation") nodes = split.validation;
    else if (subset == "test") nodes = split.test;
    else throw std::runtime_error("unknown subset '" + subset + "'");
  }

  const agt::Partition part = partition_for(g, cfg, partition_file, nullptr);
  const agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  const agt::BanditState bandit =
      bandit_file.empty() ? fallback_bandit(cfg) : read_bandit_state(bandit_file, cfg);

  const double accuracy = agt::evaluate(params, g, coarse, bandit, cfg, nodes);
  std::cout << "accuracy " << accuracy << " on " << nodes.size() << " nodes (" << subset << ")\n";
  return 0;
}

int run_motivate(const fs::path& out, int seeds, const std::string& config_file) {
  agt::MotivateConfig mc = agt::default_motivate_config();
  if (!config_file.empty()) mc.base = agt::parse_train_config(config_file);
  if (seeds > 0) mc.seeds = seeds;

  const auto start = Clock::now();
  const auto rows = agt::motivate(mc);
  fs::create_directories(out);
  agt::write_motivate_csv(out / "figure2.csv", rows);

  agt::RunManifest manifest;
  manifest.command = "motivate";
  manifest.config = agt::config_to_map(mc.base);
  manifest.config["seeds"] = std::to_string(mc.seeds);
  manifest.seed = mc.base.seed;
  if (!config_file.empty()) manifest.add_input(config_file);
  manifest.timings_seconds["sweep"] = seconds_since(start);
  manifest.write(out / "manifest.json");

  const auto means = agt::motivate_means(rows);
  std::cout << "alpha";
  for (int k = 0; k < 5; ++k)
    std::cout << '\t' << agt::strategy_name(static_cast<agt::SamplingStrategy>(k));
  std::cout << '\n';
  std::cout.precision(4);
  for (double alpha : mc.alphas) {
    std::cout << alpha;
    for (agt::SamplingStrategy s :
         {agt::SamplingStrategy::Adaptive, agt::SamplingStrategy::OneHop,
          agt::SamplingStrategy::TwoHop, agt::SamplingStrategy::Knn, agt::SamplingStrategy::Ppr})
      std::cout << '\t' << means.at({alpha, s});
    std::cout << '\n';
  }
  std::cout << "wrote " << (out / "figure2.csv").string() << '\n';
  return 0;
}

int run_inspect_q(const fs::path& data, int center, int truncate) {
  const agt::Graph g = agt::load_graph(data);
  if (center < 0 || center >= g.n)
    throw std::runtime_error("center " + std::to_string(center) + " outside [0, " +
                             std::to_string(g.n) + ")");
  const agt::NormalizedAdjacency adj = agt::normalize_adjacency(g);
  const auto rows = agt::build_q(g, adj, agt::PprParams{}, center, truncate);

  nlohmann::json out;
  out["center"] = center;
  for (const auto& row : rows) {
    nlohmann::json entry;
    entry["support"] = row.support;
    entry["probs"] = row.probs;
    entry["empty"] = row.empty();
    out[agt::heuristic_name(row.kind)] = entry;
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical graph transformer with bandit-adaptive node sampling"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  app.failure_message(CLI::FailureMessage::help);

  // generate-newman
  agt::NewmanConfig nc;
  std::string gen_out;
  double gen_train_fraction = 0.6, gen_validation_fraction = 0.2;
  auto* gen = app.add_subcommand("generate-newman", "Generate a planted-partition benchmark graph");
  gen->add_option("--n", nc.n, "Number of nodes");
  gen->add_option("--classes", nc.classes, "Number of classes");
  gen->add_option("--z-in", nc.z_in, "Expected same-class degree");
  gen->add_option("--z-out", nc.z_out, "Expected cross-class degree");
  gen->add_option("--attr-dim", nc.attr_dim, "Binary attribute dimension");
  gen->add_option("--h-in", nc.h_in, "Expected ones in the class's attribute block");
  gen->add_option("--h-out", nc.h_out, "Expected ones outside the class's block");
  gen->add_option("--seed", nc.seed, "Generation seed");
  gen->add_option("--train-fraction", gen_train_fraction, "Training split fraction");
  gen->add_option("--validation-fraction", gen_validation_fraction, "Validation split fraction");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // coarsen
  std::string co_data, co_method = "edge_match", co_out;
  double co_rate = 0.01;
  auto* co = app.add_subcommand("coarsen", "Partition a graph into super-nodes");
  co->add_option("--data", co_data, "Graph directory (edges.txt, features.csv[, labels.csv])")
      ->required();
  co->add_option("--rate", co_rate, "Target fraction of nodes kept as clusters");
  co->add_option("--method", co_method, "edge_match or neighborhood_merge");
  co->add_option("--out", co_out, "Output directory")->required();

  // train
  std::string tr_data, tr_config, tr_out, tr_split, tr_partition;
  auto* tr = app.add_subcommand("train", "Train on a labeled graph");
  tr->add_option("--data", tr_data, "Graph directory")->required();
  tr->add_option("--config", tr_config, "key=value training config")->required();
  tr->add_option("--out", tr_out, "Run output directory")->required();
  tr->add_option("--split", tr_split, "Split file (default: derive from config seed)");
  tr->add_option("--partition", tr_partition, "Partition file (default: coarsen per config)");

  // eval
  std::string ev_data, ev_checkpoint, ev_config, ev_split, ev_subset = "test", ev_partition,
              ev_bandit;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", ev_data, "Graph directory")->required();
  ev->add_option("--checkpoint", ev_checkpoint, "Model checkpoint")->required();
  ev->add_option("--config", ev_config, "key=value training config")->required();
  ev->add_option("--split", ev_split, "Split file");
  ev->add_option("--subset", ev_subset, "train, validation, test or all");
  ev->add_option("--partition", ev_partition, "Partition file (default: coarsen per config)");
  ev->add_option("--bandit", ev_bandit, "Trained bandit state (bandit.txt from a run)");

  // motivate
  std::string mo_out, mo_config;
  int mo_seeds = 0;
  auto* mo = app.add_subcommand("motivate", "Homophily sweep over sampling strategies");
  mo->add_option("--out", mo_out, "Output directory")->required();
  mo->add_option("--seeds", mo_seeds, "Graph seeds per alpha (default 3)");
  mo->add_option("--config", mo_config, "Override the base training config");

  // inspect-q
  std::string iq_data;
  int iq_center = 0, iq_truncate = agt::kDefaultTruncate;
  auto* iq = app.add_subcommand("inspect-q", "Print a center's sampling distributions as JSON");
  iq->add_option("--data", iq_data, "Graph directory")->required();
  iq->add_option("--center", iq_center, "Center node id")->required();
  iq->add_option("--truncate", iq_truncate, "Per-heuristic support cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage problems (unknown command, bad flags) exit 2; --help exits 0.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_generate_newman(nc, gen_out, gen_train_fraction,
                                                  gen_validation_fraction);
    if (co->parsed()) return run_coarsen(co_data, co_rate, co_method, co_out);
    if (tr->parsed()) return run_train(tr_data, tr_config, tr_out, tr_split, tr_partition);
    if (ev->parsed())
      return run_eval(ev_data, ev_checkpoint, ev_config, ev_split, ev_subset, ev_partition,
                      ev_bandit);
    if (mo->parsed()) return run_motivate(mo_out, mo_seeds, mo_config);
    if (iq->parsed()) return run_inspect_q(iq_data, iq_center, iq_truncate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
