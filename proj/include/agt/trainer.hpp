#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agt/bandit.hpp"
#include "agt/coarsen.hpp"
#include "agt/graph.hpp"
#include "agt/model.hpp"
#include "agt/newman.hpp"
#include "agt/optim.hpp"

namespace agt {

// Adaptive uses the bandit mixture with periodic weight updates; the other
// values pin the sampling distribution to exactly one heuristic (one-hot,
// no exploration floor, no updates) for baseline comparisons.
enum class SamplingStrategy { Adaptive, OneHop, TwoHop, Knn, Ppr };

const char* strategy_name(SamplingStrategy s);
SamplingStrategy parse_strategy(const std::string& name);  // throws on unknown

struct TrainConfig {
  // Model dimensions.
  int hidden = 128;
  int heads = 8;
  int layers = 3;
  int prox_dim = 10;
  double dropout = 0.5;

  // Sequence layout and augmentation.
  int fine_slots = 20;      // N, bandit-sampled nodes per sequence
  int super_slots = 3;      // n_s
  int global_slots = 2;     // n_g
  int augmentations = 16;   // S, sequences per center node

  // Schedule.
  int epochs = 1000;
  int update_period = 100;  // T, epochs between bandit updates / resampling
  int batch_size = 32;
  double lr_peak = 2e-4;
  int warmup_epochs = 100;
  double lr_end = 1e-9;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  // Sampling.
  SamplingStrategy strategy = SamplingStrategy::Adaptive;
  double exploration_floor = 0.1;  // p_min
  int truncate_limit = 50;         // L, per-heuristic support cap
  double ppr_teleport = 0.15;
  int ppr_iterations = 100;
  double ppr_tolerance = 1e-8;

  // Preprocessing.
  double coarsen_rate = 0.01;
  CoarsenMethod coarsen_method = CoarsenMethod::EdgeMatch;
  bool normalize_features = true;  // L1 row normalization of input features

  // Split fractions (used when no split file is supplied).
  double train_fraction = 0.6;
  double validation_fraction = 0.2;

  std::uint64_t seed = 1;

  void validate() const;
};

// Flat key=value config file, one field per line, '#' comments. Unknown
// keys and malformed values raise std::invalid_argument naming the key.
TrainConfig parse_train_config(const std::filesystem::path& file);
TrainConfig parse_train_config_text(const std::string& text);
std::map<std::string, std::string> config_to_map(const TrainConfig& cfg);
void write_train_config(const std::filesystem::path& file, const TrainConfig& cfg);

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct BanditUpdateRow {
  int epoch = 0;  // epoch count at which the update fired
  std::vector<double> weights, probs, reward;
};

struct MetricsLog {
  std::vector<EpochRow> epochs;
  std::vector<BanditUpdateRow> bandit;
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  int best_val_epoch = -1;
  bool aborted_non_finite = false;  // divergence: training stopped early
  int ppr_not_converged = 0;
  double q_build_seconds = 0.0;
  double train_seconds = 0.0;
  double bandit_update_seconds = 0.0;
};

void write_metrics_csv(const std::filesystem::path& file, const MetricsLog& log);
void write_bandit_trace_csv(const std::filesystem::path& file, const MetricsLog& log);

struct TrainResult {
  ModelParams params;   // best-validation parameters
  BanditState bandit;
  MetricsLog log;
};

// The full training loop: per-center sequence sets resampled every
// update_period epochs, mean cross-entropy over batch x augmentations,
// AdamW with warmup/decay, significance-driven bandit updates, and a final
// bagging test evaluation. Deterministic given cfg.seed.
TrainResult train(const Graph& g, const CoarseGraph& coarse, const DataSplit& split,
                  const TrainConfig& cfg);

// Bagging accuracy on `nodes`: S fresh sequences per node under the frozen
// bandit probabilities, class-probability vectors averaged, argmax vs label.
double evaluate(const ModelParams& params, const Graph& g, const CoarseGraph& coarse,
                const BanditState& bandit, const TrainConfig& cfg,
                const std::vector<int>& nodes);

// The homophily sweep: for each alpha, train the four pinned strategies and
// the adaptive sampler on shared per-seed synthetic graphs.
struct MotivateConfig {
  std::vector<double> alphas = {0.05, 0.25, 0.5, 0.75, 1.0};
  int seeds = 3;
  double degree_total = 16.0;  // z_in + z_out, split by alpha
  NewmanConfig newman;         // z_in/z_out/seed overwritten per run
  TrainConfig base;            // strategy/seed overwritten per run
};

struct MotivateRow {
  double alpha = 0.0;
  SamplingStrategy strategy = SamplingStrategy::Adaptive;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

std::vector<MotivateRow> motivate(const MotivateConfig& cfg);
void write_motivate_csv(const std::filesystem::path& file, const std::vector<MotivateRow>& rows);

// The stock sweep setup: 128-node/4-class graphs with 200-dim attributes,
// 10 sampled nodes x 16 augmentations per center, and a model sized so the
// whole 5-alpha x 3-seed x 5-strategy grid finishes in minutes on one core.
MotivateConfig default_motivate_config();

// Mean accuracy per (alpha, strategy) across seeds.
std::map<std::pair<double, SamplingStrategy>, double> motivate_means(
    const std::vector<MotivateRow>& rows);

}  // namespace agt
