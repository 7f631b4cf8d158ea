#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "agt/coarsen.hpp"
#include "agt/graph.hpp"
#include "agt/newman.hpp"
#include "agt/rng.hpp"
#include "agt/trainer.hpp"
#include "doctest.h"

using agt::RowMatrixXd;

namespace {

// A 32-node, 4-class synthetic graph that every trainer test shares.
agt::Graph tiny_newman(std::uint64_t seed) {
  agt::NewmanConfig nc;
  nc.n = 32;
  nc.classes = 4;
  nc.z_in = 6.0;
  nc.z_out = 2.0;
  nc.attr_dim = 20;
  nc.h_in = 4.0;
  nc.h_out = 2.0;
  nc.seed = seed;
  return agt::generate_newman(nc);
}

agt::TrainConfig tiny_train_config() {
  agt::TrainConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 4;
  cfg.layers = 2;
  cfg.prox_dim = 4;
  cfg.dropout = 0.0;
  cfg.fine_slots = 6;
  cfg.super_slots = 2;
  cfg.global_slots = 1;
  cfg.augmentations = 2;
  cfg.epochs = 6;
  cfg.update_period = 3;
  cfg.batch_size = 8;
  cfg.lr_peak = 2e-3;
  cfg.warmup_epochs = 2;
  cfg.truncate_limit = 20;
  cfg.coarsen_rate = 0.25;
  cfg.seed = 7;
  return cfg;
}

agt::DataSplit manual_split(int n, int train_to, int val_to) {
  agt::DataSplit split;
  for (int i = 0; i < train_to; ++i) split.train.push_back(i);
  for (int i = train_to; i < val_to; ++i) split.validation.push_back(i);
  for (int i = val_to; i < n; ++i) split.test.push_back(i);
  return split;
}

}  // namespace

TEST_CASE("strategy names round-trip and reject unknowns") {
  for (agt::SamplingStrategy s :
       {agt::SamplingStrategy::Adaptive, agt::SamplingStrategy::OneHop,
        agt::SamplingStrategy::TwoHop, agt::SamplingStrategy::Knn, agt::SamplingStrategy::Ppr})
    CHECK(agt::parse_strategy(agt::strategy_name(s)) == s);
  CHECK_THROWS_AS(agt::parse_strategy("three_hop"), std::invalid_argument);
}

TEST_CASE("train config validation catches bad fields") {
  agt::TrainConfig cfg = tiny_train_config();
  CHECK_NOTHROW(cfg.validate());

  agt::TrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.hidden = 18;  // not divisible by heads = 4
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.exploration_floor = 0.25;  // 4 arms leave no mixing mass
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.train_fraction = 0.9;
  bad.validation_fraction = 0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fewer epochs than the update period means zero bandit updates") {
  agt::Graph g = tiny_newman(3);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 2;
  cfg.update_period = 10;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  CHECK(res.log.bandit.empty());
  CHECK(res.log.epochs.size() == 2);
  // Initial mixture: uniform weights with a 0.1 floor is exactly 0.25 each.
  for (double p : res.bandit.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("bandit updates fire every update_period epochs") {
  agt::Graph g = tiny_newman(4);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 8;
  cfg.update_period = 3;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  REQUIRE(res.log.bandit.size() == 2);  // epochs 3 and 6
  CHECK(res.log.bandit[0].epoch == 3);
  CHECK(res.log.bandit[1].epoch == 6);
  for (const auto& row : res.log.bandit) {
    REQUIRE(row.probs.size() == 4);
    REQUIRE(row.weights.size() == 4);
    REQUIRE(row.reward.size() == 4);
    double sum = 0.0;
    for (double p : row.probs) {
      CHECK(p >= cfg.exploration_floor / 4.0 - 1e-12);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(res.log.epochs.size() == 8);
  CHECK(res.log.test_accuracy >= 0.0);
  CHECK(res.log.test_accuracy <= 1.0);
}

TEST_CASE("pinned strategies keep a one-hot mixture and never update") {
  agt::Graph g = tiny_newman(5);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 4;
  cfg.update_period = 2;
  cfg.strategy = agt::SamplingStrategy::TwoHop;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  CHECK(res.log.bandit.empty());
  REQUIRE(res.bandit.probs.size() == 4);
  CHECK(res.bandit.probs[0] == 0.0);
  CHECK(res.bandit.probs[1] == 1.0);  // two-hop is arm 1
  CHECK(res.bandit.probs[2] == 0.0);
  CHECK(res.bandit.probs[3] == 0.0);
}

TEST_CASE("training overfits a small graph under full supervision") {
  agt::Graph g = tiny_newman(6);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 28, 30);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.hidden = 32;
  cfg.heads = 4;
  cfg.epochs = 400;
  cfg.update_period = 80;
  cfg.warmup_epochs = 40;
  cfg.lr_peak = 1e-3;
  cfg.fine_slots = 10;
  cfg.augmentations = 4;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  CHECK_FALSE(res.log.aborted_non_finite);
  const double train_acc = agt::evaluate(res.params, g, coarse, res.bandit, cfg, split.train);
  CHECK(train_acc >= 0.95);

  // The loss must have actually come down along the way.
  CHECK(res.log.epochs.front().train_loss > res.log.epochs.back().train_loss);
  CHECK(res.log.epochs.back().train_loss < 0.5);
  CHECK(res.log.best_val_epoch >= 0);
  CHECK(res.log.best_val_accuracy >= 0.5);
}

TEST_CASE("identical seeds reproduce the run except for wall-clock columns") {
  agt::Graph g = tiny_newman(8);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::NeighborhoodMerge);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 6;
  cfg.update_period = 3;
  agt::TrainResult a = agt::train(g, coarse, split, cfg);
  agt::TrainResult b = agt::train(g, coarse, split, cfg);

  REQUIRE(a.log.epochs.size() == b.log.epochs.size());
  for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
    CHECK(a.log.epochs[e].train_loss == b.log.epochs[e].train_loss);
    CHECK(a.log.epochs[e].val_accuracy == b.log.epochs[e].val_accuracy);
  }
  REQUIRE(a.log.bandit.size() == b.log.bandit.size());
  for (std::size_t u = 0; u < a.log.bandit.size(); ++u) {
    CHECK(a.log.bandit[u].weights == b.log.bandit[u].weights);
    CHECK(a.log.bandit[u].probs == b.log.bandit[u].probs);
    CHECK(a.log.bandit[u].reward == b.log.bandit[u].reward);
  }
  CHECK(a.log.test_accuracy == b.log.test_accuracy);
  CHECK(a.bandit.weights == b.bandit.weights);

  // A different seed moves the numbers.
  cfg.seed = 999;
  agt::TrainResult c = agt::train(g, coarse, split, cfg);
  bool any_diff = c.log.epochs.size() != a.log.epochs.size();
  for (std::size_t e = 0; !any_diff && e < a.log.epochs.size(); ++e)
    any_diff = a.log.epochs[e].train_loss != c.log.epochs[e].train_loss;
  CHECK(any_diff);
}

TEST_CASE("evaluate is deterministic and validates its inputs") {
  agt::Graph g = tiny_newman(9);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 2;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  const double x = agt::evaluate(res.params, g, coarse, res.bandit, cfg, split.test);
  const double y = agt::evaluate(res.params, g, coarse, res.bandit, cfg, split.test);
  CHECK(x == y);

  // Mismatched model (different feature width) is rejected.
  agt::Graph other = tiny_newman(10);
  other.features = RowMatrixXd::Zero(other.n, 7);
  agt::Partition op = agt::coarsen(other, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph oc = agt::coarse_algebra(other, op);
  CHECK_THROWS_AS(agt::evaluate(res.params, other, oc, res.bandit, cfg, {0, 1}),
                  std::invalid_argument);
}

TEST_CASE("a divergent learning rate aborts cleanly instead of crashing") {
  agt::Graph g = tiny_newman(11);
  agt::Partition part = agt::coarsen(g, 0.25, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);
  agt::DataSplit split = manual_split(g.n, 24, 28);

  agt::TrainConfig cfg = tiny_train_config();
  cfg.epochs = 5;
  cfg.warmup_epochs = 1;
  cfg.lr_peak = 1e12;
  agt::TrainResult res = agt::train(g, coarse, split, cfg);

  CHECK(res.log.aborted_non_finite);
  // Whatever parameters survive must still drive an evaluation.
  CHECK_NOTHROW(agt::evaluate(res.params, g, coarse, res.bandit, cfg, split.test));
}

TEST_CASE("a node with no usable sampling rows still trains via the fallback") {
  // Path through nodes 0..4 plus a fully isolated node 5 whose feature row is
  // all zero: every heuristic row for center 5 is empty.
  RowMatrixXd feats = RowMatrixXd::Zero(6, 4);
  agt::RandomEngine rng(22);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) feats(i, j) = std::abs(rng.normal()) + 0.1;
  agt::Graph g = agt::make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, feats,
                                 {0, 1, 0, 1, 0, 1});

  agt::Partition part = agt::coarsen(g, 0.5, agt::CoarsenMethod::EdgeMatch);
  agt::CoarseGraph coarse = agt::coarse_algebra(g, part);

  agt::DataSplit split;
  split.train = {0, 1, 2, 3, 5};
  split.validation = {4};
  split.test = {4};

  agt::TrainConfig cfg;
  cfg.hidden = 4;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.prox_dim = 2;
  cfg.dropout = 0.0;
  cfg.fine_slots = 2;
  cfg.super_slots = 1;
  cfg.global_slots = 1;
  cfg.augmentations = 1;
  cfg.epochs = 2;
  cfg.update_period = 5;
  cfg.batch_size = 4;
  cfg.warmup_epochs = 1;
  cfg.truncate_limit = 5;
  cfg.coarsen_rate = 0.5;
  cfg.seed = 3;

  agt::TrainResult res;
  CHECK_NOTHROW(res = agt::train(g, coarse, split, cfg));
  CHECK(res.log.epochs.size() == 2);
  CHECK_FALSE(res.log.aborted_non_finite);
}

TEST_CASE("metrics and bandit traces serialize with stable headers") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "agt_metrics_test";
  fs::create_directories(dir);

  agt::MetricsLog log;
  log.epochs.push_back({0, 1.5, 0.25, 0.01});
  log.epochs.push_back({1, 1.25, 0.5, 0.011});
  agt::BanditUpdateRow row;
  row.epoch = 2;
  row.weights = {1.0, 0.5, 0.25, 0.125};
  row.probs = {0.4, 0.3, 0.2, 0.1};
  row.reward = {0.9, 0.1, 0.0, 0.2};
  log.bandit.push_back(row);

  agt::write_metrics_csv(dir / "metrics.csv", log);
  agt::write_bandit_trace_csv(dir / "bandit.csv", log);

  std::ifstream m(dir / "metrics.csv");
  std::string line;
  REQUIRE(std::getline(m, line));
  CHECK(line == "epoch,train_loss,val_accuracy,seconds");
  int data_lines = 0;
  while (std::getline(m, line))
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == 2);

  std::ifstream b(dir / "bandit.csv");
  REQUIRE(std::getline(b, line));
  CHECK(line == "epoch,w0,w1,w2,w3,p0,p1,p2,p3,r0,r1,r2,r3");
  REQUIRE(std::getline(b, line));
  std::stringstream ss(line);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(cell == "2");

  fs::remove_all(dir);
}

TEST_CASE("the homophily sweep produces one row per alpha, seed and strategy") {
  agt::MotivateConfig mc;
  mc.alphas = {0.25, 1.0};
  mc.seeds = 1;
  mc.degree_total = 6.0;
  mc.newman.n = 32;
  mc.newman.classes = 4;
  mc.newman.attr_dim = 20;
  mc.newman.h_in = 4.0;
  mc.newman.h_out = 2.0;

  mc.base = tiny_train_config();
  mc.base.epochs = 3;
  mc.base.update_period = 2;
  mc.base.augmentations = 1;
  mc.base.fine_slots = 3;
  mc.base.warmup_epochs = 1;

  std::vector<agt::MotivateRow> rows = agt::motivate(mc);
  REQUIRE(rows.size() == 10);

  int adaptive_rows = 0;
  for (const auto& r : rows) {
    CHECK((r.alpha == 0.25 || r.alpha == 1.0));
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    if (r.strategy == agt::SamplingStrategy::Adaptive) ++adaptive_rows;
  }
  CHECK(adaptive_rows == 2);

  auto means = agt::motivate_means(rows);
  CHECK(means.size() == 10);  // seeds = 1: one mean per (alpha, strategy)
  CHECK(means.count({0.25, agt::SamplingStrategy::Knn}) == 1);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "agt_motivate_test";
  fs::create_directories(dir);
  agt::write_motivate_csv(dir / "figure.csv", rows);
  std::ifstream f(dir / "figure.csv");
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "alpha,strategy,seed,accuracy");
  int data_lines = 0;
  while (std::getline(f, line))
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == 10);
  fs::remove_all(dir);
}
