#include "agt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace agt {
namespace {

constexpr double kLayerNormEpsilon = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// y = gamma .* xhat + beta per row, with xhat/istd cached for backward.
void layer_norm(const RowMatrixXd& x, const RowMatrixXd& gamma, const RowMatrixXd& beta,
                RowMatrixXd& xhat, Eigen::VectorXd& istd, RowMatrixXd& y) {
  const Eigen::Index m = x.rows(), d = x.cols();
  xhat.resize(m, d);
  y.resize(m, d);
  istd.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    istd(i) = is;
    xhat.row(i) = (x.row(i).array() - mu) * is;
    y.row(i) = xhat.row(i).array() * gamma.row(0).array() + beta.row(0).array();
  }
}

// Backward of layer_norm; returns dx and accumulates dgamma/dbeta.
RowMatrixXd layer_norm_backward(const RowMatrixXd& dy, const RowMatrixXd& xhat,
                                const Eigen::VectorXd& istd, const RowMatrixXd& gamma,
                                RowMatrixXd& dgamma, RowMatrixXd& dbeta) {
  const Eigen::Index m = dy.rows(), d = dy.cols();
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  RowMatrixXd dx(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto dxhat = (dy.row(i).array() * gamma.row(0).array()).eval();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat * xhat.row(i).array()).mean();
    dx.row(i) =
        ((dxhat - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat) * istd(i)).matrix();
  }
  return dx;
}

// out_row += features.row(node) * weight, exploiting feature sparsity.
void add_projected_sparse_row(const FeatureTable& features, int node,
                              const RowMatrixXd& weight, Eigen::Ref<Eigen::RowVectorXd> out) {
  const auto idx = features.row_indices(node);
  const auto val = features.row_values(node);
  for (std::size_t t = 0; t < idx.size(); ++t)
    out.noalias() += val[t] * weight.row(idx[t]);
}

// Xavier-uniform fill; draws happen in row-major element order.
void xavier_fill(RowMatrixXd& w, RandomEngine& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
}

void normal_fill(RowMatrixXd& w, double scale, RandomEngine& rng) {
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim <= 0) throw std::invalid_argument("model: feature_dim must be positive");
  if (classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0)
    throw std::invalid_argument("model: hidden (" + std::to_string(hidden) +
                                ") must be a positive multiple of heads (" +
                                std::to_string(heads) + ")");
  if (layers <= 0) throw std::invalid_argument("model: need at least one layer");
  if (prox_dim < 1) throw std::invalid_argument("model: prox_dim must be >= 1");
  if (fine_slots < 0 || super_slots < 0 || global_slots < 0)
    throw std::invalid_argument("model: negative slot count");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("model: dropout must lie in [0, 1)");
}

InputSequence assemble_sequence(const CoarseGraph& coarse, int center,
                                const std::vector<int>& fine_sample, int fine_slots,
                                int super_slots, int global_slots, RandomEngine& rng) {
  if (static_cast<int>(fine_sample.size()) > fine_slots)
    throw std::invalid_argument("assemble_sequence: sample exceeds fine slots");
  InputSequence seq;
  seq.center = center;
  seq.fine = fine_sample;
  seq.fine_slots = fine_slots;
  seq.super_slots = super_slots;
  seq.global_slots = global_slots;

  // Uniform super-node choice over every cluster except the center's own.
  const int own = coarse.origin.assignment[static_cast<std::size_t>(center)];
  const int candidates = coarse.n_prime - 1;
  const int take = std::min(super_slots, candidates);
  if (take > 0) {
    seq.supers = rng.sample_without_replacement(candidates, take);
    for (int& c : seq.supers)
      if (c >= own) ++c;  // skip over the excluded cluster id
  }
  return seq;
}

RowMatrixXd encode_proximity(const NormalizedAdjacency& adj, const Partition& part,
                             const InputSequence& seq, int prox_dim) {
  const int m = seq.length();
  RowMatrixXd phi = RowMatrixXd::Zero(m, prox_dim);

  // walk = e_center * Atilde^p, advanced once per power.
  std::vector<double> walk(static_cast<std::size_t>(adj.n), 0.0);
  std::vector<double> next(static_cast<std::size_t>(adj.n), 0.0);
  walk[static_cast<std::size_t>(seq.center)] = 1.0;

  for (int p = 0; p < prox_dim; ++p) {
    if (p > 0) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int v = 0; v < adj.n; ++v) {
        const double wv = walk[static_cast<std::size_t>(v)];
        if (wv == 0.0) continue;
        const auto idx = adj.row_indices(v);
        const auto val = adj.row_values(v);
        for (std::size_t t = 0; t < idx.size(); ++t)
          next[static_cast<std::size_t>(idx[t])] += wv * val[t];
      }
      walk.swap(next);
    }
    phi(0, p) = walk[static_cast<std::size_t>(seq.center)];
    for (std::size_t i = 0; i < seq.fine.size(); ++i)
      phi(seq.fine_begin() + static_cast<int>(i), p) =
          walk[static_cast<std::size_t>(seq.fine[i])];
    for (std::size_t i = 0; i < seq.supers.size(); ++i) {
      const int cluster = seq.supers[i];
      double sum = 0.0;
      for (int member : part.members(cluster)) sum += walk[static_cast<std::size_t>(member)];
      phi(seq.super_begin() + static_cast<int>(i), p) =
          sum / std::sqrt(static_cast<double>(part.sizes[static_cast<std::size_t>(cluster)]));
    }
    // Global rows stay zero: their learnable vectors substitute in forward.
  }
  return phi;
}

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  std::vector<TensorRef> refs;
  refs.push_back({"input_weight", &params.input_weight, true});
  refs.push_back({"input_bias", &params.input_bias, false});
  refs.push_back({"token_kind", &params.token_kind, false});
  refs.push_back({"global_feat", &params.global_feat, false});
  refs.push_back({"global_prox", &params.global_prox, false});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& lay = params.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    refs.push_back({p + "ln1_gamma", &lay.ln1_gamma, false});
    refs.push_back({p + "ln1_beta", &lay.ln1_beta, false});
    refs.push_back({p + "wq", &lay.wq, true});
    refs.push_back({p + "bq", &lay.bq, false});
    refs.push_back({p + "wk", &lay.wk, true});
    refs.push_back({p + "bk", &lay.bk, false});
    refs.push_back({p + "wv", &lay.wv, true});
    refs.push_back({p + "bv", &lay.bv, false});
    refs.push_back({p + "wo", &lay.wo, true});
    refs.push_back({p + "bo", &lay.bo, false});
    refs.push_back({p + "prox_weight", &lay.prox_weight, true});
    refs.push_back({p + "prox_bias", &lay.prox_bias, false});
    refs.push_back({p + "ln2_gamma", &lay.ln2_gamma, false});
    refs.push_back({p + "ln2_beta", &lay.ln2_beta, false});
    refs.push_back({p + "ffn_w1", &lay.ffn_w1, true});
    refs.push_back({p + "ffn_b1", &lay.ffn_b1, false});
    refs.push_back({p + "ffn_w2", &lay.ffn_w2, true});
    refs.push_back({p + "ffn_b2", &lay.ffn_b2, false});
  }
  refs.push_back({"cls_w1", &params.cls_w1, true});
  refs.push_back({"cls_b1", &params.cls_b1, false});
  refs.push_back({"cls_w2", &params.cls_w2, true});
  refs.push_back({"cls_b2", &params.cls_b2, false});
  return refs;
}

std::size_t ModelParams::num_parameters() const {
  std::size_t total = 0;
  for (const auto& ref : tensor_refs(const_cast<ModelParams&>(*this)))
    total += static_cast<std::size_t>(ref.tensor->size());
  return total;
}

ModelParams make_zero_like(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.hidden, f = cfg.ffn_dim();
  ModelParams p;
  p.cfg = cfg;
  p.input_weight = RowMatrixXd::Zero(cfg.feature_dim, d);
  p.input_bias = RowMatrixXd::Zero(1, d);
  p.token_kind = RowMatrixXd::Zero(kNumTokenKinds, d);
  p.global_feat = RowMatrixXd::Zero(cfg.global_slots, d);
  p.global_prox = RowMatrixXd::Zero(cfg.global_slots, cfg.prox_dim);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& lay : p.layers) {
    lay.ln1_gamma = RowMatrixXd::Zero(1, d);
    lay.ln1_beta = RowMatrixXd::Zero(1, d);
    lay.wq = RowMatrixXd::Zero(d, d);
    lay.bq = RowMatrixXd::Zero(1, d);
    lay.wk = RowMatrixXd::Zero(d, d);
    lay.bk = RowMatrixXd::Zero(1, d);
    lay.wv = RowMatrixXd::Zero(d, d);
    lay.bv = RowMatrixXd::Zero(1, d);
    lay.wo = RowMatrixXd::Zero(d, d);
    lay.bo = RowMatrixXd::Zero(1, d);
    lay.prox_weight = RowMatrixXd::Zero(cfg.prox_dim, cfg.heads);
    lay.prox_bias = RowMatrixXd::Zero(1, cfg.heads);
    lay.ln2_gamma = RowMatrixXd::Zero(1, d);
    lay.ln2_beta = RowMatrixXd::Zero(1, d);
    lay.ffn_w1 = RowMatrixXd::Zero(d, f);
    lay.ffn_b1 = RowMatrixXd::Zero(1, f);
    lay.ffn_w2 = RowMatrixXd::Zero(f, d);
    lay.ffn_b2 = RowMatrixXd::Zero(1, d);
  }
  p.cls_w1 = RowMatrixXd::Zero(d, d);
  p.cls_b1 = RowMatrixXd::Zero(1, d);
  p.cls_w2 = RowMatrixXd::Zero(d, cfg.classes);
  p.cls_b2 = RowMatrixXd::Zero(1, cfg.classes);
  return p;
}

ModelParams make_params(const ModelConfig& cfg, RandomEngine& rng) {
  ModelParams p = make_zero_like(cfg);
  xavier_fill(p.input_weight, rng);
  normal_fill(p.token_kind, 0.02, rng);
  normal_fill(p.global_feat, 0.02, rng);
  // global_prox starts at zero: a fresh global token has "no proximity".
  for (auto& lay : p.layers) {
    lay.ln1_gamma.setOnes();
    lay.ln2_gamma.setOnes();
    xavier_fill(lay.wq, rng);
    xavier_fill(lay.wk, rng);
    xavier_fill(lay.wv, rng);
    xavier_fill(lay.wo, rng);
    xavier_fill(lay.prox_weight, rng);
    xavier_fill(lay.ffn_w1, rng);
    xavier_fill(lay.ffn_w2, rng);
  }
  xavier_fill(p.cls_w1, rng);
  xavier_fill(p.cls_w2, rng);
  return p;
}

const RowMatrixXd& forward(const ModelParams& params, const FeatureTable& node_features,
                           const RowMatrixXd& super_features, const InputSequence& seq,
                           const RowMatrixXd& phi, RunMode mode,
                           RandomEngine* dropout_rng, ForwardTrace& trace) {
  const ModelConfig& cfg = params.cfg;
  const int m = seq.length();
  const int d = cfg.hidden, heads = cfg.heads, dk = cfg.head_dim(), f = cfg.ffn_dim();
  if (phi.rows() != m)
    throw std::invalid_argument("forward: proximity rows != sequence length");
  if (phi.cols() != cfg.prox_dim)
    throw std::invalid_argument("forward: proximity width != prox_dim");
  if (node_features.cols != cfg.feature_dim)
    throw std::invalid_argument("forward: feature width mismatch");
  if (mode == RunMode::Train && cfg.dropout > 0.0 && dropout_rng == nullptr)
    throw std::invalid_argument("forward: Train mode with dropout needs an rng");

  const bool drop = mode == RunMode::Train && cfg.dropout > 0.0;
  const double keep = 1.0 - cfg.dropout;
  const double inv_keep = drop ? 1.0 / keep : 1.0;

  trace.seq = &seq;
  trace.valid.resize(static_cast<std::size_t>(m));
  for (int t = 0; t < m; ++t) trace.valid[static_cast<std::size_t>(t)] = seq.valid(t) ? 1 : 0;

  // Effective proximity: learnable rows substitute for the global slots.
  trace.phi_eff = phi;
  for (int s = 0; s < seq.global_slots; ++s)
    trace.phi_eff.row(seq.global_begin() + s) = params.global_prox.row(s);

  // Input embedding: projected node features + token-kind embedding.
  trace.h0 = RowMatrixXd::Zero(m, d);
  for (int t = 0; t < m; ++t) {
    if (!trace.valid[static_cast<std::size_t>(t)]) continue;
    auto row = trace.h0.row(t);
    switch (seq.kind_of(t)) {
      case TokenKind::Center:
        add_projected_sparse_row(node_features, seq.center, params.input_weight, row);
        row += params.input_bias.row(0);
        row += params.token_kind.row(static_cast<int>(TokenKind::Center));
        break;
      case TokenKind::Fine:
        add_projected_sparse_row(node_features,
                                 seq.fine[static_cast<std::size_t>(t - seq.fine_begin())],
                                 params.input_weight, row);
        row += params.input_bias.row(0);
        row += params.token_kind.row(static_cast<int>(TokenKind::Fine));
        break;
      case TokenKind::Super:
        row.noalias() +=
            super_features.row(seq.supers[static_cast<std::size_t>(t - seq.super_begin())]) *
            params.input_weight;
        row += params.input_bias.row(0);
        row += params.token_kind.row(static_cast<int>(TokenKind::Super));
        break;
      case TokenKind::Global:
        row += params.global_feat.row(t - seq.global_begin());
        row += params.token_kind.row(static_cast<int>(TokenKind::Global));
        break;
    }
  }

  trace.layers.resize(static_cast<std::size_t>(cfg.layers));
  const int n_fine = static_cast<int>(seq.fine.size());
  trace.record_attn.setZero(cfg.layers * heads, n_fine);
  trace.record_vnorm.setZero(cfg.layers * heads, n_fine);

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  RowMatrixXd h = trace.h0;
  RowMatrixXd g1, z2, bias_all;

  for (int l = 0; l < cfg.layers; ++l) {
    const LayerParams& lay = params.layers[static_cast<std::size_t>(l)];
    auto& lt = trace.layers[static_cast<std::size_t>(l)];
    lt.h_in = h;

    layer_norm(h, lay.ln1_gamma, lay.ln1_beta, lt.ln1_xhat, lt.ln1_istd, g1);
    lt.q.noalias() = g1 * lay.wq;
    lt.q.rowwise() += lay.bq.row(0);
    lt.k.noalias() = g1 * lay.wk;
    lt.k.rowwise() += lay.bk.row(0);
    lt.v.noalias() = g1 * lay.wv;
    lt.v.rowwise() += lay.bv.row(0);

    // One bias scalar per (key token, head), broadcast over query positions.
    bias_all.noalias() = trace.phi_eff * lay.prox_weight;
    bias_all.rowwise() += lay.prox_bias.row(0);

    lt.attn.resize(static_cast<std::size_t>(heads));
    lt.attn_mask.resize(static_cast<std::size_t>(heads));
    lt.attn_drop.resize(static_cast<std::size_t>(heads));
    lt.head_concat.resize(m, d);

    for (int hd = 0; hd < heads; ++hd) {
      const auto qh = lt.q.middleCols(hd * dk, dk);
      const auto kh = lt.k.middleCols(hd * dk, dk);
      const auto vh = lt.v.middleCols(hd * dk, dk);

      RowMatrixXd& a = lt.attn[static_cast<std::size_t>(hd)];
      a.noalias() = qh * kh.transpose();
      a *= inv_sqrt_dk;
      a.rowwise() += bias_all.col(hd).transpose();

      // Masked softmax per query row: invalid keys get exactly zero mass,
      // rows of invalid queries are zeroed outright (nothing reads them).
      for (int qi = 0; qi < m; ++qi) {
        if (!trace.valid[static_cast<std::size_t>(qi)]) {
          a.row(qi).setZero();
          continue;
        }
        double peak = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < m; ++t)
          if (trace.valid[static_cast<std::size_t>(t)]) peak = std::max(peak, a(qi, t));
        double total = 0.0;
        for (int t = 0; t < m; ++t) {
          if (trace.valid[static_cast<std::size_t>(t)]) {
            a(qi, t) = std::exp(a(qi, t) - peak);
            total += a(qi, t);
          } else {
            a(qi, t) = 0.0;
          }
        }
        a.row(qi) /= total;
      }

      // Significance record: first-row attention over valid fine tokens and
      // the corresponding value norms (pre-dropout attention).
      for (int i = 0; i < n_fine; ++i) {
        trace.record_attn(l * heads + hd, i) = a(0, seq.fine_begin() + i);
        trace.record_vnorm(l * heads + hd, i) = vh.row(seq.fine_begin() + i).norm();
      }

      RowMatrixXd& mask = lt.attn_mask[static_cast<std::size_t>(hd)];
      mask = RowMatrixXd::Ones(m, m);
      if (drop) {
        for (int qi = 0; qi < m; ++qi) {
          if (!trace.valid[static_cast<std::size_t>(qi)]) continue;
          for (int t = 0; t < m; ++t)
            if (trace.valid[static_cast<std::size_t>(t)])
              mask(qi, t) = dropout_rng->bernoulli(keep) ? inv_keep : 0.0;
        }
      }
      RowMatrixXd& ad = lt.attn_drop[static_cast<std::size_t>(hd)];
      ad = a.cwiseProduct(mask);
      lt.head_concat.middleCols(hd * dk, dk).noalias() = ad * vh;
    }

    lt.h_mid.noalias() = lt.head_concat * lay.wo;
    lt.h_mid.rowwise() += lay.bo.row(0);
    lt.h_mid += lt.h_in;

    layer_norm(lt.h_mid, lay.ln2_gamma, lay.ln2_beta, lt.ln2_xhat, lt.ln2_istd, z2);
    lt.ffn_u.noalias() = z2 * lay.ffn_w1;
    lt.ffn_u.rowwise() += lay.ffn_b1.row(0);

    lt.ffn_mask = RowMatrixXd::Ones(m, f);
    if (drop) {
      for (int t = 0; t < m; ++t) {
        if (!trace.valid[static_cast<std::size_t>(t)]) continue;
        for (int j = 0; j < f; ++j)
          lt.ffn_mask(t, j) = dropout_rng->bernoulli(keep) ? inv_keep : 0.0;
      }
    }
    lt.ffn_act = lt.ffn_u.unaryExpr([](double x) { return gelu(x); }).cwiseProduct(lt.ffn_mask);

    lt.h_out.noalias() = lt.ffn_act * lay.ffn_w2;
    lt.h_out.rowwise() += lay.ffn_b2.row(0);
    lt.h_out += lt.h_mid;
    h = lt.h_out;
  }

  // Classifier head on the center token.
  trace.cls_u.noalias() = h.row(0) * params.cls_w1;
  trace.cls_u += params.cls_b1;
  trace.cls_a = trace.cls_u.unaryExpr([](double x) { return gelu(x); });
  trace.logits.noalias() = trace.cls_a * params.cls_w2;
  trace.logits += params.cls_b2;
  return trace.logits;
}

double cross_entropy(const RowMatrixXd& logits, int target, Eigen::RowVectorXd* probs) {
  if (target < 0 || target >= logits.cols())
    throw std::invalid_argument("cross_entropy: target out of range");
  const double peak = logits.row(0).maxCoeff();
  const Eigen::RowVectorXd expv = (logits.row(0).array() - peak).exp();
  const double total = expv.sum();
  if (probs) *probs = expv / total;
  return std::log(total) + peak - logits(0, target);
}

RowMatrixXd loss_gradient(const RowMatrixXd& logits, int target, double scale) {
  Eigen::RowVectorXd probs;
  cross_entropy(logits, target, &probs);
  RowMatrixXd d = probs;
  d(0, target) -= 1.0;
  d *= scale;
  return d;
}

void backward(const ModelParams& params, const FeatureTable& node_features,
              const RowMatrixXd& super_features, const ForwardTrace& trace,
              const RowMatrixXd& dlogits, ModelParams& grads) {
  const ModelConfig& cfg = params.cfg;
  const InputSequence& seq = *trace.seq;
  const int m = seq.length();
  const int d = cfg.hidden, heads = cfg.heads, dk = cfg.head_dim();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  // Classifier head.
  const RowMatrixXd& h_final = trace.layers.back().h_out;
  grads.cls_w2.noalias() += trace.cls_a.transpose() * dlogits;
  grads.cls_b2 += dlogits;
  RowMatrixXd dcls_a = dlogits * params.cls_w2.transpose();
  RowMatrixXd dcls_u =
      dcls_a.cwiseProduct(trace.cls_u.unaryExpr([](double x) { return gelu_grad(x); }));
  grads.cls_w1.noalias() += h_final.row(0).transpose() * dcls_u;
  grads.cls_b1 += dcls_u;

  RowMatrixXd dh = RowMatrixXd::Zero(m, d);
  dh.row(0) = dcls_u * params.cls_w1.transpose();

  RowMatrixXd g1, z2, dbias_all, dq, dkk, dv, ds;
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerParams& lay = params.layers[static_cast<std::size_t>(l)];
    LayerParams& gl = grads.layers[static_cast<std::size_t>(l)];
    const auto& lt = trace.layers[static_cast<std::size_t>(l)];

    // FFN block: h_out = h_mid + dropout(gelu(LN2(h_mid) W1 + b1)) W2 + b2.
    z2 = lt.ln2_xhat;
    z2.array().rowwise() *= lay.ln2_gamma.row(0).array();
    z2.array().rowwise() += lay.ln2_beta.row(0).array();

    gl.ffn_w2.noalias() += lt.ffn_act.transpose() * dh;
    gl.ffn_b2.row(0) += dh.colwise().sum();
    RowMatrixXd dact = dh * lay.ffn_w2.transpose();
    RowMatrixXd du = dact.cwiseProduct(lt.ffn_mask)
                         .cwiseProduct(lt.ffn_u.unaryExpr([](double x) { return gelu_grad(x); }));
    gl.ffn_w1.noalias() += z2.transpose() * du;
    gl.ffn_b1.row(0) += du.colwise().sum();
    RowMatrixXd dz2 = du * lay.ffn_w1.transpose();
    RowMatrixXd dh_mid =
        dh + layer_norm_backward(dz2, lt.ln2_xhat, lt.ln2_istd, lay.ln2_gamma, gl.ln2_gamma,
                                 gl.ln2_beta);

    // Attention block: h_mid = h_in + (concat_h Adrop_h V_h) Wo + bo.
    gl.wo.noalias() += lt.head_concat.transpose() * dh_mid;
    gl.bo.row(0) += dh_mid.colwise().sum();
    RowMatrixXd dconcat = dh_mid * lay.wo.transpose();

    dq.setZero(m, d);
    dkk.setZero(m, d);
    dv.setZero(m, d);
    dbias_all.setZero(m, heads);

    for (int hd = 0; hd < heads; ++hd) {
      const auto qh = lt.q.middleCols(hd * dk, dk);
      const auto kh = lt.k.middleCols(hd * dk, dk);
      const auto vh = lt.v.middleCols(hd * dk, dk);
      const RowMatrixXd& a = lt.attn[static_cast<std::size_t>(hd)];
      const RowMatrixXd& mask = lt.attn_mask[static_cast<std::size_t>(hd)];
      const RowMatrixXd& ad = lt.attn_drop[static_cast<std::size_t>(hd)];

      const auto dhead = dconcat.middleCols(hd * dk, dk);
      RowMatrixXd dad;
      dad.noalias() = dhead * vh.transpose();
      dv.middleCols(hd * dk, dk).noalias() += ad.transpose() * dhead;

      RowMatrixXd da = dad.cwiseProduct(mask);
      // Softmax backward per query row; invalid rows carry no gradient.
      ds.resize(m, m);
      for (int qi = 0; qi < m; ++qi) {
        if (!trace.valid[static_cast<std::size_t>(qi)]) {
          ds.row(qi).setZero();
          continue;
        }
        const double dot = a.row(qi).dot(da.row(qi));
        ds.row(qi) = a.row(qi).cwiseProduct(
            (da.row(qi).array() - dot).matrix());
      }

      dq.middleCols(hd * dk, dk).noalias() += inv_sqrt_dk * (ds * kh);
      dkk.middleCols(hd * dk, dk).noalias() += inv_sqrt_dk * (ds.transpose() * qh);
      dbias_all.col(hd) += ds.colwise().sum().transpose();
    }

    gl.prox_weight.noalias() += trace.phi_eff.transpose() * dbias_all;
    gl.prox_bias.row(0) += dbias_all.colwise().sum();
    // Only the learnable global rows of phi_eff carry gradient.
    if (seq.global_slots > 0) {
      RowMatrixXd dphi = dbias_all * lay.prox_weight.transpose();
      for (int s = 0; s < seq.global_slots; ++s)
        grads.global_prox.row(s) += dphi.row(seq.global_begin() + s);
    }

    g1 = lt.ln1_xhat;
    g1.array().rowwise() *= lay.ln1_gamma.row(0).array();
    g1.array().rowwise() += lay.ln1_beta.row(0).array();

    gl.wq.noalias() += g1.transpose() * dq;
    gl.bq.row(0) += dq.colwise().sum();
    gl.wk.noalias() += g1.transpose() * dkk;
    gl.bk.row(0) += dkk.colwise().sum();
    gl.wv.noalias() += g1.transpose() * dv;
    gl.bv.row(0) += dv.colwise().sum();

    RowMatrixXd dg1 = dq * lay.wq.transpose();
    dg1.noalias() += dkk * lay.wk.transpose();
    dg1.noalias() += dv * lay.wv.transpose();

    dh = dh_mid + layer_norm_backward(dg1, lt.ln1_xhat, lt.ln1_istd, lay.ln1_gamma,
                                      gl.ln1_gamma, gl.ln1_beta);
  }

  // Input embedding.
  for (int t = 0; t < m; ++t) {
    if (!trace.valid[static_cast<std::size_t>(t)]) continue;
    const auto drow = dh.row(t);
    switch (seq.kind_of(t)) {
      case TokenKind::Center:
      case TokenKind::Fine: {
        const int node = t == 0 ? seq.center
                                : seq.fine[static_cast<std::size_t>(t - seq.fine_begin())];
        const auto idx = node_features.row_indices(node);
        const auto val = node_features.row_values(node);
        for (std::size_t z = 0; z < idx.size(); ++z)
          grads.input_weight.row(idx[z]).noalias() += val[z] * drow;
        grads.input_bias.row(0) += drow;
        grads.token_kind.row(static_cast<int>(seq.kind_of(t))) += drow;
        break;
      }
      case TokenKind::Super: {
        const int cluster = seq.supers[static_cast<std::size_t>(t - seq.super_begin())];
        grads.input_weight.noalias() += super_features.row(cluster).transpose() * drow;
        grads.input_bias.row(0) += drow;
        grads.token_kind.row(static_cast<int>(TokenKind::Super)) += drow;
        break;
      }
      case TokenKind::Global: {
        grads.global_feat.row(t - seq.global_begin()) += drow;
        grads.token_kind.row(static_cast<int>(TokenKind::Global)) += drow;
        break;
      }
    }
  }
}

std::vector<double> significance(const ForwardTrace& trace, bool* degenerate) {
  if (degenerate) *degenerate = false;
  const Eigen::Index n_fine = trace.record_attn.cols();
  std::vector<double> s(static_cast<std::size_t>(n_fine), 0.0);
  if (n_fine == 0) {
    if (degenerate) *degenerate = true;
    return s;
  }
  const Eigen::Index slots = trace.record_attn.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n_fine; ++i) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < slots; ++r)
      acc += trace.record_attn(r, i) * trace.record_vnorm(r, i);
    s[static_cast<std::size_t>(i)] = acc / static_cast<double>(slots);
    total += s[static_cast<std::size_t>(i)];
  }
  if (total <= 0.0) {
    if (degenerate) *degenerate = true;
    std::fill(s.begin(), s.end(), 1.0 / static_cast<double>(n_fine));
    return s;
  }
  for (double& v : s) v /= total;
  return s;
}

namespace {

constexpr char kCheckpointMagic[8] = {'A', 'G', 'T', 'M', 'D', 'L', '0', '1'};

void write_i32(std::ofstream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::int32_t read_i32(std::ifstream& in) {
  std::int32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const ModelParams& params) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const ModelConfig& c = params.cfg;
  for (int v : {c.feature_dim, c.classes, c.hidden, c.heads, c.layers, c.prox_dim,
                c.fine_slots, c.super_slots, c.global_slots})
    write_i32(out, v);
  out.write(reinterpret_cast<const char*>(&c.dropout), sizeof c.dropout);

  auto refs = tensor_refs(const_cast<ModelParams&>(params));
  write_i32(out, static_cast<std::int32_t>(refs.size()));
  for (const auto& ref : refs) {
    write_i32(out, static_cast<std::int32_t>(ref.name.size()));
    out.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
    write_i32(out, static_cast<std::int32_t>(ref.tensor->rows()));
    write_i32(out, static_cast<std::int32_t>(ref.tensor->cols()));
    out.write(reinterpret_cast<const char*>(ref.tensor->data()),
              static_cast<std::streamsize>(sizeof(double)) * ref.tensor->size());
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + file.string());
}

ModelParams load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + file.string());

  ModelConfig c;
  c.feature_dim = read_i32(in);
  c.classes = read_i32(in);
  c.hidden = read_i32(in);
  c.heads = read_i32(in);
  c.layers = read_i32(in);
  c.prox_dim = read_i32(in);
  c.fine_slots = read_i32(in);
  c.super_slots = read_i32(in);
  c.global_slots = read_i32(in);
  if (!in.read(reinterpret_cast<char*>(&c.dropout), sizeof c.dropout))
    throw std::runtime_error("checkpoint: truncated file");

  ModelParams params = make_zero_like(c);
  auto refs = tensor_refs(params);
  const auto count = read_i32(in);
  if (count != static_cast<std::int32_t>(refs.size()))
    throw std::runtime_error("checkpoint: tensor count mismatch");
  for (auto& ref : refs) {
    const auto name_len = read_i32(in);
    std::string name(static_cast<std::size_t>(name_len), '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated file");
    if (name != ref.name)
      throw std::runtime_error("checkpoint: expected tensor '" + ref.name + "', found '" +
                               name + "'");
    const auto rows = read_i32(in), cols = read_i32(in);
    if (rows != ref.tensor->rows() || cols != ref.tensor->cols())
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    if (!in.read(reinterpret_cast<char*>(ref.tensor->data()),
                 static_cast<std::streamsize>(sizeof(double)) * ref.tensor->size()))
      throw std::runtime_error("checkpoint: truncated tensor data");
  }
  return params;
}

}  // namespace agt
