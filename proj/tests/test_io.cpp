#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "agt/coarsen.hpp"
#include "agt/graph.hpp"
#include "agt/graph_io.hpp"
#include "agt/manifest.hpp"
#include "agt/rng.hpp"
#include "agt/trainer.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using agt::RowMatrixXd;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("graph save/load round-trips exactly, including awkward doubles") {
  TempDir dir("agt_io_graph");

  RowMatrixXd feats(4, 3);
  feats << 0.1, -2.5e-17, 3.0,
      1.0 / 3.0, 0.0, 9.87654321e12,
      -0.0, 5e-324, 1.0,
      2.0, -7.25, 0.333333333333333314829616256247390992939472198486328125;
  agt::Graph g = agt::make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}}, feats, {0, 1, 1, 0});

  agt::save_graph(dir.path, g);
  agt::EdgeCleanupStats stats;
  agt::Graph back = agt::load_graph(dir.path, &stats);

  CHECK(back.n == g.n);
  CHECK(back.row_ptr == g.row_ptr);
  CHECK(back.col_idx == g.col_idx);
  CHECK(back.labels == g.labels);
  REQUIRE(back.features.rows() == g.features.rows());
  REQUIRE(back.features.cols() == g.features.cols());
  CHECK((back.features.array() == g.features.array()).all());  // bitwise via max digits
  CHECK(stats.duplicates == 0);
  CHECK(stats.self_loops == 0);
}

TEST_CASE("graph loader reports file and line on malformed input") {
  TempDir dir("agt_io_badgraph");
  write_file(dir.path / "features.csv", "1.0,2.0\n3.0,4.0\n");
  write_file(dir.path / "edges.txt", "0 1\nnot an edge\n");

  try {
    agt::load_graph(dir.path);
    FAIL("expected ParseError");
  } catch (const agt::ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("edges.txt") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);  // offending line number
  }

  // Edge endpoint beyond the feature-row count.
  write_file(dir.path / "edges.txt", "0 5\n");
  CHECK_THROWS_AS(agt::load_graph(dir.path), agt::ParseError);

  // Ragged feature rows.
  write_file(dir.path / "edges.txt", "0 1\n");
  write_file(dir.path / "features.csv", "1.0,2.0\n3.0\n");
  CHECK_THROWS_AS(agt::load_graph(dir.path), agt::ParseError);

  // Label out of the valid range.
  write_file(dir.path / "features.csv", "1.0,2.0\n3.0,4.0\n");
  write_file(dir.path / "labels.csv", "0\n-3\n");
  CHECK_THROWS_AS(agt::load_graph(dir.path), agt::ParseError);

  // Missing required files.
  TempDir empty("agt_io_emptydir");
  CHECK_THROWS_AS(agt::load_graph(empty.path), agt::ParseError);
}

TEST_CASE("graph loader tolerates comments and cleans duplicate edges") {
  TempDir dir("agt_io_comments");
  write_file(dir.path / "features.csv", "1,0\n0,1\n1,1\n");
  write_file(dir.path / "edges.txt",
             "# a comment line\n"
             "0 1\n"
             "1 0\n"  // duplicate after symmetrization
             "2 2\n"  // self loop
             "\n"
             "1 2\n");
  agt::EdgeCleanupStats stats;
  agt::Graph g = agt::load_graph(dir.path, &stats);
  CHECK(g.n == 3);
  CHECK(g.num_edges() == 2);
  CHECK(stats.self_loops == 1);
  CHECK(stats.duplicates > 0);
  CHECK_FALSE(g.has_labels());
}

TEST_CASE("split files round-trip and reject inconsistent contents") {
  TempDir dir("agt_io_split");
  agt::DataSplit split;
  split.train = {0, 2, 4};
  split.validation = {1};
  split.test = {3, 5};

  const fs::path file = dir.path / "split.csv";
  agt::save_split(file, split);
  agt::DataSplit back = agt::load_split(file, 6);
  CHECK(back.train == split.train);
  CHECK(back.validation == split.validation);
  CHECK(back.test == split.test);

  // Out-of-range id.
  write_file(file, "0,1\n2\n7\n");
  CHECK_THROWS_AS(agt::load_split(file, 6), agt::ParseError);

  // A node in two parts.
  write_file(file, "0,1\n1\n2\n");
  CHECK_THROWS_AS(agt::load_split(file, 6), agt::ParseError);

  // Wrong number of lines.
  write_file(file, "0,1\n2\n");
  CHECK_THROWS_AS(agt::load_split(file, 6), agt::ParseError);

  // Empty lines are legitimate empty parts.
  write_file(file, "0,1\n\n2\n");
  agt::DataSplit sparse = agt::load_split(file, 6);
  CHECK(sparse.validation.empty());
  CHECK(sparse.train == std::vector<int>{0, 1});
}

TEST_CASE("partition files round-trip and validate coverage") {
  TempDir dir("agt_io_part");
  agt::Partition part = agt::Partition::from_assignment({0, 0, 1, 2, 1});
  const fs::path file = dir.path / "partition.txt";
  agt::save_partition(file, part);
  agt::Partition back = agt::load_partition(file, 5);
  CHECK(back.assignment == part.assignment);
  CHECK(back.sizes == part.sizes);

  // A node with no assignment line.
  write_file(file, "0 0\n1 0\n2 1\n3 2\n");
  CHECK_THROWS_AS(agt::load_partition(file, 5), std::runtime_error);

  // Sparse cluster ids are remapped to a dense range on load.
  write_file(file, "0 0\n1 0\n2 1\n3 9\n4 1\n");
  agt::Partition sparse = agt::load_partition(file, 5);
  CHECK(sparse.assignment == std::vector<int>{0, 0, 1, 2, 1});
  CHECK(sparse.sizes.size() == 3);

  // Malformed lines and negative ids are rejected.
  write_file(file, "0 zero\n");
  CHECK_THROWS_AS(agt::load_partition(file, 1), std::runtime_error);
  write_file(file, "0 -2\n");
  CHECK_THROWS_AS(agt::load_partition(file, 1), std::runtime_error);
}

TEST_CASE("train config text parser accepts the serializer's output") {
  agt::TrainConfig cfg;
  cfg.hidden = 48;
  cfg.heads = 6;
  cfg.layers = 2;
  cfg.dropout = 0.35;
  cfg.strategy = agt::SamplingStrategy::Knn;
  cfg.coarsen_method = agt::CoarsenMethod::NeighborhoodMerge;
  cfg.lr_peak = 3.5e-4;
  cfg.seed = 0xDEADBEEF;

  // map -> text -> parse must reproduce every field.
  std::string text;
  for (const auto& [key, value] : agt::config_to_map(cfg)) text += key + " = " + value + "\n";
  agt::TrainConfig back = agt::parse_train_config_text(text);
  CHECK(agt::config_to_map(back) == agt::config_to_map(cfg));
  CHECK(back.hidden == 48);
  CHECK(back.strategy == agt::SamplingStrategy::Knn);
  CHECK(back.coarsen_method == agt::CoarsenMethod::NeighborhoodMerge);
  CHECK(back.lr_peak == cfg.lr_peak);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("train config parser: comments, blanks, and precise errors") {
  const std::string good =
      "# model size\n"
      "hidden = 32\n"
      "\n"
      "heads=4\n"
      "  epochs   =  12  \n";
  agt::TrainConfig cfg = agt::parse_train_config_text(good);
  CHECK(cfg.hidden == 32);
  CHECK(cfg.heads == 4);
  CHECK(cfg.epochs == 12);
  CHECK(cfg.layers == agt::TrainConfig{}.layers);  // untouched fields keep defaults

  try {
    agt::parse_train_config_text("hidden = 32\nbogus_key = 1\n");
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus_key") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);  // line number
  }

  CHECK_THROWS_AS(agt::parse_train_config_text("hidden = screws\n"), std::invalid_argument);
  CHECK_THROWS_AS(agt::parse_train_config_text("hidden\n"), std::invalid_argument);
  CHECK_THROWS_AS(agt::parse_train_config_text("strategy = warp\n"), std::invalid_argument);
}

TEST_CASE("config files written to disk load back identically") {
  TempDir dir("agt_io_cfg");
  agt::TrainConfig cfg;
  cfg.hidden = 24;
  cfg.heads = 3;
  cfg.strategy = agt::SamplingStrategy::Ppr;
  const fs::path file = dir.path / "config.txt";
  agt::write_train_config(file, cfg);
  agt::TrainConfig back = agt::parse_train_config(file);
  CHECK(agt::config_to_map(back) == agt::config_to_map(cfg));

  CHECK_THROWS_AS(agt::parse_train_config(dir.path / "missing.txt"), std::invalid_argument);
}

TEST_CASE("sha256 matches the published test vector") {
  TempDir dir("agt_io_sha");
  write_file(dir.path / "abc.txt", "abc");
  CHECK(agt::sha256_file(dir.path / "abc.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  write_file(dir.path / "empty.txt", "");
  CHECK(agt::sha256_file(dir.path / "empty.txt") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

  CHECK_THROWS_AS(agt::sha256_file(dir.path / "nope.txt"), std::runtime_error);
}

TEST_CASE("run manifests are valid JSON with hashes and timings") {
  TempDir dir("agt_io_manifest");
  write_file(dir.path / "input.txt", "abc");

  agt::RunManifest man;
  man.command = "train";
  man.seed = 42;
  man.config["hidden"] = "32";
  man.config["heads"] = "4";
  man.add_input(dir.path / "input.txt");
  man.timings_seconds["training"] = 1.25;
  man.timings_seconds["coarsening"] = 0.5;

  const fs::path file = dir.path / "manifest.json";
  man.write(file);

  std::ifstream in(file);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("command").get<std::string>() == "train");
  CHECK(j.at("seed").get<std::uint64_t>() == 42);
  CHECK(j.at("config").at("hidden").get<std::string>() == "32");
  CHECK(j.at("timings_seconds").at("training").get<double>() == doctest::Approx(1.25));

  const auto& hashes = j.at("input_hashes");
  bool found = false;
  for (auto it = hashes.begin(); it != hashes.end(); ++it) {
    if (it.value().get<std::string>() ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
      found = true;
  }
  CHECK(found);
}
