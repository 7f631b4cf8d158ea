#include "agt/heuristics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace agt {
namespace {

struct Candidate {
  int id;
  double weight;
};

// Keeps the `truncate` heaviest candidates (ties by ascending id), sorts the
// survivors by id and renormalizes. `uniform_if_zero` implements the KNN
// clamp rule: when every kept weight is zero, fall back to a uniform
// distribution over the kept candidate set instead of returning an empty row.
SamplingRow finalize_row(int center, HeuristicKind kind, std::vector<Candidate> cands,
                         int truncate, bool uniform_if_zero = false) {
  SamplingRow row;
  row.center = center;
  row.kind = kind;
  if (cands.empty()) return row;

  const auto heavier = [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.id < b.id;
  };
  if (static_cast<int>(cands.size()) > truncate) {
    std::nth_element(cands.begin(), cands.begin() + truncate, cands.end(), heavier);
    cands.resize(static_cast<std::size_t>(truncate));
  }

  double total = 0.0;
  for (const auto& c : cands) total += c.weight;
  if (total <= 0.0 && !uniform_if_zero) return row;  // empty-support marker

  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
  row.support.reserve(cands.size());
  row.probs.reserve(cands.size());
  if (total <= 0.0) {
    const double u = 1.0 / static_cast<double>(cands.size());
    for (const auto& c : cands) {
      row.support.push_back(c.id);
      row.probs.push_back(u);
    }
  } else {
    // Zero-weight candidates are dropped: a support entry that can never be
    // drawn would only complicate without-replacement sampling.
    for (const auto& c : cands) {
      if (c.weight <= 0.0) continue;
      row.support.push_back(c.id);
      row.probs.push_back(c.weight / total);
    }
  }
  return row;
}

}  // namespace

const char* heuristic_name(HeuristicKind k) {
  switch (k) {
    case HeuristicKind::OneHop: return "one_hop";
    case HeuristicKind::TwoHop: return "two_hop";
    case HeuristicKind::Knn: return "knn";
    case HeuristicKind::Ppr: return "ppr";
  }
  throw std::invalid_argument("heuristic_name: bad kind");
}

double SamplingRow::prob_of(int id) const {
  const auto it = std::lower_bound(support.begin(), support.end(), id);
  if (it == support.end() || *it != id) return 0.0;
  return probs[static_cast<std::size_t>(it - support.begin())];
}

SamplingRow one_hop_row(const NormalizedAdjacency& adj, int center, int truncate) {
  const auto idx = adj.row_indices(center);
  const auto val = adj.row_values(center);
  std::vector<Candidate> cands;
  cands.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (idx[i] != center) cands.push_back({idx[i], val[i]});
  return finalize_row(center, HeuristicKind::OneHop, std::move(cands), truncate);
}

SamplingRow two_hop_row(const NormalizedAdjacency& adj, int center, int truncate) {
  // Row of Atilde^2 as a sparse row-vector times sparse matrix:
  // acc[u] = sum_j Atilde[center][j] * Atilde[j][u]. Both levels iterate in
  // ascending index order, so the accumulation order is reproducible (the
  // dense oracle in the tests mirrors it exactly).
  std::vector<double> acc(static_cast<std::size_t>(adj.n), 0.0);
  std::vector<int> touched;
  const auto idx = adj.row_indices(center);
  const auto val = adj.row_values(center);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int j = idx[i];
    const double w = val[i];
    const auto jdx = adj.row_indices(j);
    const auto jval = adj.row_values(j);
    for (std::size_t t = 0; t < jdx.size(); ++t) {
      const int u = jdx[t];
      if (acc[static_cast<std::size_t>(u)] == 0.0) touched.push_back(u);
      // Separate product/sum statements keep the compiler from fusing into
      // FMA, so the dense-square oracle in the tests can match bit-for-bit.
      const double term = w * jval[t];
      acc[static_cast<std::size_t>(u)] += term;
    }
  }
  // Candidates ascending by id so the normalization sum has one canonical
  // order regardless of which entry was touched first.
  std::sort(touched.begin(), touched.end());
  std::vector<Candidate> cands;
  cands.reserve(touched.size());
  for (int u : touched)
    if (u != center && acc[static_cast<std::size_t>(u)] > 0.0)
      cands.push_back({u, acc[static_cast<std::size_t>(u)]});
  return finalize_row(center, HeuristicKind::TwoHop, std::move(cands), truncate);
}

SamplingRow knn_row(const FeatureTable& features, int center, int truncate) {
  SamplingRow row;
  row.center = center;
  row.kind = HeuristicKind::Knn;
  if (features.row_norm[static_cast<std::size_t>(center)] == 0.0)
    return row;  // similarity undefined -> empty-support marker

  // Candidate selection happens on the raw (signed) similarities; the clamp
  // to zero applies to the probabilities afterwards.
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(features.rows) - 1);
  for (int j = 0; j < features.rows; ++j)
    if (j != center) cands.push_back({j, features.cosine(center, j)});

  const auto heavier = [](const Candidate& a, const Candidate& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.id < b.id;
  };
  if (static_cast<int>(cands.size()) > truncate) {
    std::nth_element(cands.begin(), cands.begin() + truncate, cands.end(), heavier);
    cands.resize(static_cast<std::size_t>(truncate));
  }
  for (auto& c : cands) c.weight = std::max(c.weight, 0.0);
  return finalize_row(center, HeuristicKind::Knn, std::move(cands),
                      truncate, /*uniform_if_zero=*/true);
}

SamplingRow knn_row(const Graph& g, int center, int truncate) {
  return knn_row(FeatureTable(g.features), center, truncate);
}

SamplingRow ppr_row(const Graph& g, const PprParams& params, int center,
                    int truncate, bool* converged) {
  if (params.teleport < 0.0 || params.teleport > 1.0)
    throw std::invalid_argument("ppr_row: teleport outside [0,1]");
  if (converged) *converged = true;

  const double c = params.teleport;
  const std::size_t n = static_cast<std::size_t>(g.n);
  std::vector<double> inv_deg(n, 0.0);
  for (int v = 0; v < g.n; ++v)
    if (g.degree(v) > 0) inv_deg[static_cast<std::size_t>(v)] = 1.0 / g.degree(v);

  std::vector<double> pi(n, 0.0), next(n, 0.0);
  pi[static_cast<std::size_t>(center)] = 1.0;
  if (c < 1.0) {
    bool hit_tolerance = false;
    for (int it = 0; it < params.max_iterations; ++it) {
      // next = c e_center + (1-c) Abar pi with Abar = A D^{-1}:
      // (Abar pi)_v = sum_{u in N(v)} pi_u / deg(u).
      double delta = 0.0;
      for (int v = 0; v < g.n; ++v) {
        double sum = 0.0;
        for (int u : g.neighbors(v)) sum += pi[static_cast<std::size_t>(u)] * inv_deg[static_cast<std::size_t>(u)];
        double value = (1.0 - c) * sum;
        if (v == center) value += c;
        next[static_cast<std::size_t>(v)] = value;
        delta = std::max(delta, std::abs(value - pi[static_cast<std::size_t>(v)]));
      }
      pi.swap(next);
      if (delta < params.tolerance) {
        hit_tolerance = true;
        break;
      }
    }
    if (!hit_tolerance && converged) *converged = false;
  } else {
    // Teleport-only walk: all mass stays on the center.
    pi.assign(n, 0.0);
    pi[static_cast<std::size_t>(center)] = 1.0;
  }

  std::vector<Candidate> cands;
  for (int v = 0; v < g.n; ++v)
    if (v != center && pi[static_cast<std::size_t>(v)] > 0.0)
      cands.push_back({v, pi[static_cast<std::size_t>(v)]});
  return finalize_row(center, HeuristicKind::Ppr, std::move(cands), truncate);
}

std::array<SamplingRow, kNumHeuristics> build_q(const Graph& g,
                                                const NormalizedAdjacency& adj,
                                                const PprParams& params, int center,
                                                int truncate) {
  return {one_hop_row(adj, center, truncate), two_hop_row(adj, center, truncate),
          knn_row(g, center, truncate), ppr_row(g, params, center, truncate)};
}

QTable build_q_table(const Graph& g, const NormalizedAdjacency& adj,
                     const PprParams& params, int truncate) {
  QTable q;
  q.rows.reserve(static_cast<std::size_t>(g.n));
  const FeatureTable features(g.features);
  for (int v = 0; v < g.n; ++v) {
    bool ok = true;
    q.rows.push_back({one_hop_row(adj, v, truncate), two_hop_row(adj, v, truncate),
                      knn_row(features, v, truncate),
                      ppr_row(g, params, v, truncate, &ok)});
    if (!ok) ++q.ppr_not_converged;
  }
  return q;
}

}  // namespace agt
