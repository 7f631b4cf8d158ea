#pragma once

// Independent reference implementations used only by the tests: dense
// linear algebra through Eigen's solvers, brute force, and finite
// differences. Where the contract is exact (bit-for-bit) agreement, the
// reference uses the same two-statement multiply-then-add accumulation and
// the same summation order as the library; this is noted inline.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "agt/feature_table.hpp"
#include "agt/graph.hpp"
#include "agt/model.hpp"
#include "agt/rng.hpp"

namespace oracle {

using agt::RowMatrixXd;

// ---------------------------------------------------------------------------
// Graph builders.

// Erdos-Renyi graph with iid standard-normal features and random labels.
// May contain isolated nodes; `ensure_edge` guards against empty graphs.
inline agt::Graph random_graph(int n, double edge_prob, int feat_dim, int classes,
                               agt::RandomEngine& rng, bool ensure_edge = true) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(edge_prob)) edges.emplace_back(i, j);
  if (edges.empty() && ensure_edge && n >= 2) edges.emplace_back(0, 1);
  RowMatrixXd x(n, feat_dim);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < feat_dim; ++f) x(i, f) = rng.normal();
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = rng.uniform_int(classes);
  return agt::make_graph(n, edges, x, labels);
}

// ---------------------------------------------------------------------------
// Dense references for the sparse graph algebra.

// D^-1/2 (A + I) D^-1/2 as a dense matrix.
inline RowMatrixXd dense_normalized_adjacency(const agt::Graph& g) {
  RowMatrixXd a = RowMatrixXd::Zero(g.n, g.n);
  for (int v = 0; v < g.n; ++v) {
    a(v, v) = 1.0;
    for (int u : g.neighbors(v)) a(v, u) = 1.0;
  }
  Eigen::VectorXd inv_sqrt(g.n);
  for (int v = 0; v < g.n; ++v) inv_sqrt(v) = 1.0 / std::sqrt(a.row(v).sum());
  for (int v = 0; v < g.n; ++v)
    for (int u = 0; u < g.n; ++u) a(v, u) *= inv_sqrt(v) * inv_sqrt(u);
  return a;
}

// Row `center` of M^2. Accumulation is j-outer (over row `center`'s
// nonzeros ascending) then target ascending, multiply-then-add in two
// statements — the same order and rounding as the sparse two-hop walk,
// so agreement is exact, not approximate.
inline std::vector<double> dense_square_row(const RowMatrixXd& m, int center) {
  const int n = static_cast<int>(m.rows());
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    const double w = m(center, j);
    if (w == 0.0) continue;
    for (int u = 0; u < n; ++u) {
      if (m(j, u) == 0.0) continue;
      const double term = w * m(j, u);
      acc[static_cast<std::size_t>(u)] += term;
    }
  }
  return acc;
}

// Personalized PageRank by the dense resolvent:
//   pi = c (I - (1-c) A D^-1)^-1 e_center
// Columns of A D^-1 for isolated nodes are zero (mass is lost), matching
// the power iteration's treatment of dangling nodes.
inline Eigen::VectorXd dense_ppr(const agt::Graph& g, int center, double teleport) {
  RowMatrixXd walk = RowMatrixXd::Zero(g.n, g.n);
  for (int u = 0; u < g.n; ++u) {
    const int deg = g.degree(u);
    if (deg == 0) continue;
    for (int v : g.neighbors(u)) walk(v, u) = 1.0 / static_cast<double>(deg);
  }
  RowMatrixXd system = RowMatrixXd::Identity(g.n, g.n) - (1.0 - teleport) * walk;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(g.n);
  e(center) = 1.0;
  return teleport * system.partialPivLu().solve(e);
}

// Brute-force cosine similarity between feature rows.
inline double cosine(const RowMatrixXd& x, int a, int b) {
  const double na = x.row(a).norm();
  const double nb = x.row(b).norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return x.row(a).dot(x.row(b)) / (na * nb);
}

// Dense 0/1 membership matrix P-hat (n x n_clusters) from an assignment.
inline RowMatrixXd dense_membership(const std::vector<int>& assignment, int clusters) {
  RowMatrixXd p = RowMatrixXd::Zero(static_cast<int>(assignment.size()), clusters);
  for (std::size_t i = 0; i < assignment.size(); ++i) p(static_cast<int>(i), assignment[i]) = 1.0;
  return p;
}

// P^T X with P = P-hat D^-1/2, accumulated node-ascending with
// multiply-then-add — mirrors the sparse coarse feature build exactly.
inline RowMatrixXd dense_coarse_features(const agt::Graph& g, const std::vector<int>& assignment,
                                         int clusters, const RowMatrixXd& x) {
  std::vector<double> size(static_cast<std::size_t>(clusters), 0.0);
  for (int a : assignment) size[static_cast<std::size_t>(a)] += 1.0;
  RowMatrixXd out = RowMatrixXd::Zero(clusters, static_cast<int>(x.cols()));
  for (int i = 0; i < g.n; ++i) {
    const int a = assignment[static_cast<std::size_t>(i)];
    const double pa = 1.0 / std::sqrt(size[static_cast<std::size_t>(a)]);
    for (int f = 0; f < x.cols(); ++f) {
      const double term = pa * x(i, f);
      out(a, f) += term;
    }
  }
  return out;
}

// P^T A P, iterating source nodes ascending then their neighbors ascending,
// with (pa * A_il) * pb factor grouping — mirrors the sparse build exactly.
inline RowMatrixXd dense_coarse_adjacency(const agt::Graph& g, const std::vector<int>& assignment,
                                          int clusters) {
  std::vector<double> size(static_cast<std::size_t>(clusters), 0.0);
  for (int a : assignment) size[static_cast<std::size_t>(a)] += 1.0;
  std::vector<double> inv_sqrt(static_cast<std::size_t>(clusters));
  for (int c = 0; c < clusters; ++c)
    inv_sqrt[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(size[static_cast<std::size_t>(c)]);
  RowMatrixXd out = RowMatrixXd::Zero(clusters, clusters);
  for (int i = 0; i < g.n; ++i) {
    const int a = assignment[static_cast<std::size_t>(i)];
    const double pa = inv_sqrt[static_cast<std::size_t>(a)];
    for (int l : g.neighbors(i)) {
      const int b = assignment[static_cast<std::size_t>(l)];
      const double scaled = pa * 1.0;
      const double term = scaled * inv_sqrt[static_cast<std::size_t>(b)];
      out(a, b) += term;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Straight-line transformer reference (no dropout, dense features). Written
// against the layer equations directly with scalar loops; shares no code
// with the library forward.

inline RowMatrixXd ref_layer_norm(const RowMatrixXd& x, const RowMatrixXd& gamma,
                                  const RowMatrixXd& beta) {
  RowMatrixXd out = x;
  for (int i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (int j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= static_cast<double>(x.cols());
    double var = 0.0;
    for (int j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.cols());
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int j = 0; j < x.cols(); ++j)
      out(i, j) = gamma(0, j) * ((x(i, j) - mean) * inv) + beta(0, j);
  }
  return out;
}

inline double ref_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Forward pass for one sequence. `x_rows` (m x p) holds the selected input
// feature row for every non-global token (global rows are ignored; their
// embeddings come from the parameters, in slot order); `valid[t]` marks
// padded slots; `phi_eff` must already carry the learnable global proximity
// rows.
inline RowMatrixXd ref_forward(const agt::ModelParams& params, const RowMatrixXd& x_rows,
                               const std::vector<agt::TokenKind>& kinds,
                               const std::vector<bool>& valid, const RowMatrixXd& phi_eff) {
  const auto& cfg = params.cfg;
  const int m = static_cast<int>(kinds.size());
  const int d = cfg.hidden;
  const int dk = cfg.head_dim();

  RowMatrixXd h = RowMatrixXd::Zero(m, d);
  int global_slot = 0;
  for (int t = 0; t < m; ++t) {
    if (!valid[static_cast<std::size_t>(t)]) continue;
    const agt::TokenKind kind = kinds[static_cast<std::size_t>(t)];
    if (kind == agt::TokenKind::Global)
      h.row(t) = params.global_feat.row(global_slot++) +
                 params.token_kind.row(static_cast<int>(kind));
    else
      h.row(t) = x_rows.row(t) * params.input_weight + params.input_bias +
                 params.token_kind.row(static_cast<int>(kind));
  }

  for (const auto& lay : params.layers) {
    const RowMatrixXd g1 = ref_layer_norm(h, lay.ln1_gamma, lay.ln1_beta);
    RowMatrixXd q = g1 * lay.wq;
    q.rowwise() += lay.bq.row(0);
    RowMatrixXd k = g1 * lay.wk;
    k.rowwise() += lay.bk.row(0);
    RowMatrixXd v = g1 * lay.wv;
    v.rowwise() += lay.bv.row(0);
    RowMatrixXd bias = phi_eff * lay.prox_weight;
    bias.rowwise() += lay.prox_bias.row(0);

    RowMatrixXd concat = RowMatrixXd::Zero(m, d);
    for (int hd = 0; hd < cfg.heads; ++hd) {
      RowMatrixXd scores(m, m);
      for (int qi = 0; qi < m; ++qi)
        for (int ki = 0; ki < m; ++ki) {
          double dot = 0.0;
          for (int j = 0; j < dk; ++j) dot += q(qi, hd * dk + j) * k(ki, hd * dk + j);
          scores(qi, ki) = dot / std::sqrt(static_cast<double>(dk)) + bias(ki, hd);
        }
      RowMatrixXd attn = RowMatrixXd::Zero(m, m);
      for (int qi = 0; qi < m; ++qi) {
        if (!valid[static_cast<std::size_t>(qi)]) continue;
        double peak = -std::numeric_limits<double>::infinity();
        for (int ki = 0; ki < m; ++ki)
          if (valid[static_cast<std::size_t>(ki)]) peak = std::max(peak, scores(qi, ki));
        double total = 0.0;
        for (int ki = 0; ki < m; ++ki)
          if (valid[static_cast<std::size_t>(ki)]) {
            attn(qi, ki) = std::exp(scores(qi, ki) - peak);
            total += attn(qi, ki);
          }
        for (int ki = 0; ki < m; ++ki) attn(qi, ki) /= total;
      }
      for (int qi = 0; qi < m; ++qi)
        for (int j = 0; j < dk; ++j) {
          double dot = 0.0;
          for (int ki = 0; ki < m; ++ki) dot += attn(qi, ki) * v(ki, hd * dk + j);
          concat(qi, hd * dk + j) = dot;
        }
    }
    RowMatrixXd mid = concat * lay.wo;
    mid.rowwise() += lay.bo.row(0);
    mid += h;

    const RowMatrixXd g2 = ref_layer_norm(mid, lay.ln2_gamma, lay.ln2_beta);
    RowMatrixXd u = g2 * lay.ffn_w1;
    u.rowwise() += lay.ffn_b1.row(0);
    RowMatrixXd act = u.unaryExpr([](double x) { return ref_gelu(x); });
    RowMatrixXd out = act * lay.ffn_w2;
    out.rowwise() += lay.ffn_b2.row(0);
    h = mid + out;
  }

  RowMatrixXd u = h.row(0) * params.cls_w1 + params.cls_b1;
  RowMatrixXd a = u.unaryExpr([](double x) { return ref_gelu(x); });
  return a * params.cls_w2 + params.cls_b2;
}

// ---------------------------------------------------------------------------
// Finite differences.

// Central difference d loss / d theta for every element of every tensor.
// `loss_fn` must be a pure function of the current parameter values.
template <typename LossFn>
inline double max_relative_gradient_error(agt::ModelParams& params, agt::ModelParams& grads,
                                          LossFn loss_fn, double step = 1e-5,
                                          double floor = 1e-6) {
  double worst = 0.0;
  auto refs = agt::tensor_refs(params);
  auto gref = agt::tensor_refs(grads);
  for (std::size_t t = 0; t < refs.size(); ++t) {
    RowMatrixXd& tensor = *refs[t].tensor;
    const RowMatrixXd& grad = *gref[t].tensor;
    for (int i = 0; i < tensor.rows(); ++i)
      for (int j = 0; j < tensor.cols(); ++j) {
        const double saved = tensor(i, j);
        tensor(i, j) = saved + step;
        const double up = loss_fn();
        tensor(i, j) = saved - step;
        const double down = loss_fn();
        tensor(i, j) = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(numeric), std::abs(grad(i, j)), floor});
        worst = std::max(worst, std::abs(numeric - grad(i, j)) / denom);
      }
  }
  return worst;
}

}  // namespace oracle
