#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "agt/graph.hpp"

namespace agt {

// Raised on any malformed input file; the message carries file and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk layout of a dataset directory:
//   edges.txt     one "u v" integer pair per line; '#' starts a comment
//   features.csv  one row of comma-separated doubles per node
//   labels.csv    one integer per line (optional file)
// The node count is the number of feature rows; edge endpoints must fit.
// Self-loops and duplicate edges are dropped (counts go to stats).
Graph load_graph(const std::filesystem::path& dir, EdgeCleanupStats* stats = nullptr);

void save_graph(const std::filesystem::path& dir, const Graph& g);

// Split file: exactly three lines (train / validation / test), each a
// comma-separated list of node ids. Lines may be empty.
DataSplit load_split(const std::filesystem::path& file, int n);
void save_split(const std::filesystem::path& file, const DataSplit& split);

}  // namespace agt
