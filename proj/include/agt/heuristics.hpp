#pragma once

#include <array>
#include <string>
#include <vector>

#include "agt/feature_table.hpp"
#include "agt/graph.hpp"

namespace agt {

// The four sampling heuristics. The numeric values are load-bearing: bandit
// weight indices assume this exact order everywhere.
enum class HeuristicKind { OneHop = 0, TwoHop = 1, Knn = 2, Ppr = 3 };
inline constexpr int kNumHeuristics = 4;

const char* heuristic_name(HeuristicKind k);

// One heuristic's sampling distribution for one center node. The support is
// sorted ascending, never contains the center, and probs sum to 1 — unless
// the heuristic is degenerate for this center (isolated node, all-zero
// feature row, teleport-only walk), in which case both lists are empty and
// the caller must drop this heuristic from the mixture.
struct SamplingRow {
  int center = -1;
  HeuristicKind kind = HeuristicKind::OneHop;
  std::vector<int> support;
  std::vector<double> probs;

  bool empty() const { return support.empty(); }
  // Probability of node id, 0 if absent from the support.
  double prob_of(int id) const;
};

struct PprParams {
  double teleport = 0.15;   // restart probability c
  int max_iterations = 100;
  double tolerance = 1e-8;  // max-abs-change stopping rule
};

// Default truncation: each row keeps only its L most probable nodes
// (ties broken by ascending id) and renormalizes. Bounded-support rows keep
// per-center work O(L) regardless of graph size.
inline constexpr int kDefaultTruncate = 50;

// Neighbors weighted by the normalized adjacency row (diagonal dropped).
SamplingRow one_hop_row(const NormalizedAdjacency& adj, int center,
                        int truncate = kDefaultTruncate);

// Row `center` of Atilde^2 (diagonal dropped), computed as a sparse
// row-times-matrix product; the square matrix is never materialized.
SamplingRow two_hop_row(const NormalizedAdjacency& adj, int center,
                        int truncate = kDefaultTruncate);

// Top-L nodes by cosine similarity of features (ties ascending id);
// probabilities proportional to similarities clamped at zero, uniform over
// the candidate set when everything clamps to zero.
SamplingRow knn_row(const FeatureTable& features, int center,
                    int truncate = kDefaultTruncate);
SamplingRow knn_row(const Graph& g, int center, int truncate = kDefaultTruncate);

// Personalized PageRank via power iteration
//   pi <- c e_center + (1-c) Abar pi,   Abar = A D^{-1} (column-normalized),
// run to params.tolerance or params.max_iterations, then center-dropped,
// truncated and renormalized. `converged` (optional) reports whether the
// tolerance was met.
SamplingRow ppr_row(const Graph& g, const PprParams& params, int center,
                    int truncate = kDefaultTruncate, bool* converged = nullptr);

// All four rows for one center, in HeuristicKind order.
std::array<SamplingRow, kNumHeuristics> build_q(const Graph& g,
                                                const NormalizedAdjacency& adj,
                                                const PprParams& params, int center,
                                                int truncate = kDefaultTruncate);

// Q rows for every node, built once and then read-only. Exposes how many
// PPR iterations failed to reach tolerance (informational).
struct QTable {
  std::vector<std::array<SamplingRow, kNumHeuristics>> rows;
  int ppr_not_converged = 0;

  const std::array<SamplingRow, kNumHeuristics>& at(int center) const {
    return rows[static_cast<std::size_t>(center)];
  }
};

QTable build_q_table(const Graph& g, const NormalizedAdjacency& adj,
                     const PprParams& params, int truncate = kDefaultTruncate);

}  // namespace agt
