#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "agt/rng.hpp"

namespace agt {

// Row-major dense matrix: node features are accessed row-wise everywhere.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Undirected, unweighted graph in CSR form with optional node features and
// labels. Neighbor lists are sorted ascending; no self-loops, no duplicates.
struct Graph {
  int n = 0;
  std::vector<int> row_ptr;   // size n+1
  std::vector<int> col_idx;   // size 2*|E|
  RowMatrixXd features;       // n x p (p may be 0)
  std::vector<int> labels;    // size n, or empty when unlabeled
  int num_classes = 0;

  int degree(int v) const { return row_ptr[static_cast<std::size_t>(v) + 1] - row_ptr[static_cast<std::size_t>(v)]; }

  std::span<const int> neighbors(int v) const {
    return {col_idx.data() + row_ptr[static_cast<std::size_t>(v)],
            col_idx.data() + row_ptr[static_cast<std::size_t>(v) + 1]};
  }

  bool has_edge(int u, int v) const;
  bool has_labels() const { return !labels.empty(); }
  std::size_t num_edges() const { return col_idx.size() / 2; }  // undirected count
};

// Counts of inputs discarded while building a graph (reported by loaders).
struct EdgeCleanupStats {
  std::size_t self_loops = 0;
  std::size_t duplicates = 0;
};

// Builds a Graph from an arbitrary edge list: symmetrizes, removes self-loops
// and duplicate edges, sorts neighbor lists. Throws std::invalid_argument on
// out-of-range endpoints or label values outside [0, num_classes).
Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                 RowMatrixXd features = {}, std::vector<int> labels = {},
                 EdgeCleanupStats* stats = nullptr);

// Symmetrically normalized adjacency with self-loops:
//   Atilde = Dhat^{-1/2} (A + I) Dhat^{-1/2},  Dhat = degree(A + I).
// Sparse CSR; the pattern of row v is neighbors(v) plus v itself, sorted.
struct NormalizedAdjacency {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;

  std::span<const int> row_indices(int v) const {
    return {col_idx.data() + row_ptr[static_cast<std::size_t>(v)],
            col_idx.data() + row_ptr[static_cast<std::size_t>(v) + 1]};
  }
  std::span<const double> row_values(int v) const {
    return {values.data() + row_ptr[static_cast<std::size_t>(v)],
            values.data() + row_ptr[static_cast<std::size_t>(v) + 1]};
  }
  // Entry Atilde[v][u]; 0 when u is not in the pattern of row v.
  double at(int v, int u) const;
};

NormalizedAdjacency normalize_adjacency(const Graph& g);

// Disjoint node index sets; each set is sorted ascending.
struct DataSplit {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

// Random split with the given fractions (test gets the remainder).
DataSplit make_split(int n, double train_fraction, double validation_fraction,
                     RandomEngine& rng);

// Fraction of edges whose endpoints share a label. Throws when the graph has
// no labels or no edges.
double homophily(const Graph& g);

}  // namespace agt
