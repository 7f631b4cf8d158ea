#include "agt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agt {

bool Graph::has_edge(int u, int v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                 RowMatrixXd features, std::vector<int> labels,
                 EdgeCleanupStats* stats) {
  if (n < 0) throw std::invalid_argument("make_graph: negative node count");
  if (features.size() > 0 && features.rows() != n)
    throw std::invalid_argument("make_graph: feature rows (" + std::to_string(features.rows()) +
                                ") != node count (" + std::to_string(n) + ")");
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("make_graph: label count != node count");

  EdgeCleanupStats local{};
  std::vector<std::pair<int, int>> sym;
  sym.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw std::invalid_argument("make_graph: edge endpoint out of range: (" +
                                  std::to_string(u) + ", " + std::to_string(v) + ")");
    if (u == v) {
      ++local.self_loops;
      continue;
    }
    sym.emplace_back(u, v);
    sym.emplace_back(v, u);
  }
  std::sort(sym.begin(), sym.end());
  const auto last = std::unique(sym.begin(), sym.end());
  // Each duplicate undirected edge contributed two duplicate directed pairs.
  local.duplicates = static_cast<std::size_t>(sym.end() - last) / 2;
  sym.erase(last, sym.end());

  Graph g;
  g.n = n;
  g.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& [u, v] : sym) ++g.row_ptr[static_cast<std::size_t>(u) + 1];
  for (int i = 0; i < n; ++i)
    g.row_ptr[static_cast<std::size_t>(i) + 1] += g.row_ptr[static_cast<std::size_t>(i)];
  g.col_idx.resize(sym.size());
  {
    std::vector<int> cursor(g.row_ptr.begin(), g.row_ptr.end() - 1);
    for (const auto& [u, v] : sym)
      g.col_idx[static_cast<std::size_t>(cursor[static_cast<std::size_t>(u)]++)] = v;
  }

  g.features = std::move(features);
  if (!labels.empty()) {
    int max_label = 0;
    for (int y : labels) {
      if (y < 0) throw std::invalid_argument("make_graph: negative label");
      max_label = std::max(max_label, y);
    }
    g.num_classes = max_label + 1;
    g.labels = std::move(labels);
  }
  if (stats) *stats = local;
  return g;
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
  NormalizedAdjacency a;
  a.n = g.n;
  a.row_ptr.assign(static_cast<std::size_t>(g.n) + 1, 0);
  // Pattern of A + I: each row gains a diagonal entry.
  for (int v = 0; v < g.n; ++v)
    a.row_ptr[static_cast<std::size_t>(v) + 1] =
        a.row_ptr[static_cast<std::size_t>(v)] + g.degree(v) + 1;
  a.col_idx.resize(static_cast<std::size_t>(a.row_ptr.back()));
  a.values.resize(a.col_idx.size());

  std::vector<double> inv_sqrt(static_cast<std::size_t>(g.n));
  for (int v = 0; v < g.n; ++v)
    inv_sqrt[static_cast<std::size_t>(v)] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));

  for (int v = 0; v < g.n; ++v) {
    std::size_t w = static_cast<std::size_t>(a.row_ptr[static_cast<std::size_t>(v)]);
    bool diagonal_placed = false;
    for (int u : g.neighbors(v)) {
      if (!diagonal_placed && u > v) {
        a.col_idx[w] = v;
        a.values[w] = inv_sqrt[static_cast<std::size_t>(v)] * inv_sqrt[static_cast<std::size_t>(v)];
        ++w;
        diagonal_placed = true;
      }
      a.col_idx[w] = u;
      a.values[w] = inv_sqrt[static_cast<std::size_t>(v)] * inv_sqrt[static_cast<std::size_t>(u)];
      ++w;
    }
    if (!diagonal_placed) {
      a.col_idx[w] = v;
      a.values[w] = inv_sqrt[static_cast<std::size_t>(v)] * inv_sqrt[static_cast<std::size_t>(v)];
      ++w;
    }
  }
  return a;
}

double NormalizedAdjacency::at(int v, int u) const {
  const auto idx = row_indices(v);
  const auto it = std::lower_bound(idx.begin(), idx.end(), u);
  if (it == idx.end() || *it != u) return 0.0;
  return row_values(v)[static_cast<std::size_t>(it - idx.begin())];
}

DataSplit make_split(int n, double train_fraction, double validation_fraction,
                     RandomEngine& rng) {
  if (train_fraction < 0.0 || validation_fraction < 0.0 ||
      train_fraction + validation_fraction > 1.0)
    throw std::invalid_argument("make_split: fractions must be nonnegative and sum to <= 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const int n_train = static_cast<int>(std::llround(train_fraction * n));
  const int n_val = static_cast<int>(std::llround(validation_fraction * n));
  DataSplit s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double homophily(const Graph& g) {
  if (!g.has_labels()) throw std::invalid_argument("homophily: graph has no labels");
  if (g.num_edges() == 0) throw std::invalid_argument("homophily: graph has no edges");
  std::size_t same = 0;
  for (int v = 0; v < g.n; ++v)
    for (int u : g.neighbors(v))
      if (u > v && g.labels[static_cast<std::size_t>(u)] == g.labels[static_cast<std::size_t>(v)])
        ++same;
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

}  // namespace agt
