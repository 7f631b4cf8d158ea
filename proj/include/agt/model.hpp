#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agt/coarsen.hpp"
#include "agt/feature_table.hpp"
#include "agt/graph.hpp"
#include "agt/rng.hpp"

namespace agt {

enum class TokenKind { Center = 0, Fine = 1, Super = 2, Global = 3 };
inline constexpr int kNumTokenKinds = 4;

// Fixed-layout token sequence for one center node:
//   [0]                      center
//   [1 .. fine_slots]        bandit-sampled fine nodes, padded
//   [.. + super_slots]       sampled super-nodes (cluster ids), padded
//   [.. + global_slots]      learnable global tokens, always valid
// Padded slots are masked: zero input embedding, zero attention mass.
struct InputSequence {
  int center = -1;
  std::vector<int> fine;    // valid fine node ids (<= fine_slots, no repeats)
  std::vector<int> supers;  // valid cluster ids (<= super_slots)
  int fine_slots = 0;
  int super_slots = 0;
  int global_slots = 0;

  int length() const { return 1 + fine_slots + super_slots + global_slots; }
  int fine_begin() const { return 1; }
  int super_begin() const { return 1 + fine_slots; }
  int global_begin() const { return 1 + fine_slots + super_slots; }

  TokenKind kind_of(int t) const {
    if (t == 0) return TokenKind::Center;
    if (t < super_begin()) return TokenKind::Fine;
    if (t < global_begin()) return TokenKind::Super;
    return TokenKind::Global;
  }
  bool valid(int t) const {
    if (t < super_begin()) {
      if (t == 0) return true;
      return t - fine_begin() < static_cast<int>(fine.size());
    }
    if (t < global_begin()) return t - super_begin() < static_cast<int>(supers.size());
    return t < length();
  }
};

// Builds a sequence from a bandit sample. Super tokens are drawn uniformly
// without replacement from all clusters except the center's own; when fewer
// than super_slots clusters are available the super block is short (padded).
InputSequence assemble_sequence(const CoarseGraph& coarse, int center,
                                const std::vector<int>& fine_sample, int fine_slots,
                                int super_slots, int global_slots, RandomEngine& rng);

// Proximity features Phi(center, token): an M-vector of normalized-adjacency
// powers, phi_m = Atilde^m[center, token], computed with M-1 sparse
// row-vector products. Super tokens get the partition-lifted value
//   phi_m(center, C_j) = sum_{l in C_j} Atilde^m[center, l] / sqrt(|C_j|);
// global rows are zero here (their learnable M-vectors live in the params).
RowMatrixXd encode_proximity(const NormalizedAdjacency& adj, const Partition& part,
                             const InputSequence& seq, int prox_dim);

struct ModelConfig {
  int feature_dim = 0;   // p
  int classes = 0;       // C
  int hidden = 128;      // d
  int heads = 8;         // B
  int layers = 3;        // L
  int prox_dim = 10;     // M
  int fine_slots = 20;   // N
  int super_slots = 3;   // n_s
  int global_slots = 2;  // n_g
  double dropout = 0.5;

  int head_dim() const { return hidden / heads; }
  int ffn_dim() const { return 4 * hidden; }
  int seq_length() const { return 1 + fine_slots + super_slots + global_slots; }
  void validate() const;  // throws std::invalid_argument on any bad dimension
};

// One pre-LN transformer layer: Hhat = MHA(LN(H)) + H; H = FFN(LN(Hhat)) + Hhat.
struct LayerParams {
  RowMatrixXd ln1_gamma, ln1_beta;        // 1 x d
  RowMatrixXd wq, wk, wv, wo;             // d x d (heads are column blocks)
  RowMatrixXd bq, bk, bv, bo;             // 1 x d
  RowMatrixXd prox_weight;                // M x B: proximity -> per-head bias
  RowMatrixXd prox_bias;                  // 1 x B
  RowMatrixXd ln2_gamma, ln2_beta;        // 1 x d
  RowMatrixXd ffn_w1, ffn_b1;             // d x 4d, 1 x 4d
  RowMatrixXd ffn_w2, ffn_b2;             // 4d x d, 1 x d
};

struct ModelParams {
  ModelConfig cfg;
  RowMatrixXd input_weight;   // p x d
  RowMatrixXd input_bias;     // 1 x d
  RowMatrixXd token_kind;     // 4 x d, additive embedding per TokenKind
  RowMatrixXd global_feat;    // n_g x d, learnable global-token features
  RowMatrixXd global_prox;    // n_g x M, learnable global proximity vectors
  std::vector<LayerParams> layers;
  RowMatrixXd cls_w1, cls_b1;  // d x d, 1 x d
  RowMatrixXd cls_w2, cls_b2;  // d x C, 1 x C

  std::size_t num_parameters() const;
};

// Every tensor in a fixed, named order — shared by the optimizer, the
// checkpoint format, and the gradient checker.
struct TensorRef {
  std::string name;
  RowMatrixXd* tensor;
  bool weight_decay;  // false for biases, LayerNorm params and embeddings
};
std::vector<TensorRef> tensor_refs(ModelParams& params);

ModelParams make_params(const ModelConfig& cfg, RandomEngine& rng);
ModelParams make_zero_like(const ModelConfig& cfg);  // gradient accumulator

enum class RunMode { Train, Eval };

// Everything the backward pass needs, retained by forward. Reused across
// calls to avoid reallocation (all sequences in a run share one length).
struct ForwardTrace {
  // Sequence context.
  const InputSequence* seq = nullptr;
  RowMatrixXd phi_eff;          // m x M; global rows copied from params
  std::vector<char> valid;      // per token

  RowMatrixXd h0;               // embedded input, m x d
  struct LayerTrace {
    RowMatrixXd h_in;                      // m x d
    RowMatrixXd ln1_xhat;                  // m x d
    Eigen::VectorXd ln1_istd;              // m
    RowMatrixXd q, k, v;                   // m x d
    std::vector<RowMatrixXd> attn;         // per head, post-softmax, pre-dropout
    std::vector<RowMatrixXd> attn_mask;    // per head, dropout multipliers
    std::vector<RowMatrixXd> attn_drop;    // per head, attn .* mask
    RowMatrixXd head_concat;               // m x d
    RowMatrixXd h_mid;                     // m x d
    RowMatrixXd ln2_xhat;                  // m x d
    Eigen::VectorXd ln2_istd;              // m
    RowMatrixXd ffn_u;                     // m x 4d, pre-activation
    RowMatrixXd ffn_mask;                  // m x 4d, dropout multipliers
    RowMatrixXd ffn_act;                   // m x 4d, dropout(gelu(u))
    RowMatrixXd h_out;                     // m x d
  };
  std::vector<LayerTrace> layers;
  RowMatrixXd cls_u;            // 1 x d pre-activation
  RowMatrixXd cls_a;            // 1 x d gelu(cls_u)
  RowMatrixXd logits;           // 1 x C

  // First-row attention over fine tokens and value norms, per (layer*head).
  RowMatrixXd record_attn;      // (L*B) x n_fine_valid
  RowMatrixXd record_vnorm;     // (L*B) x n_fine_valid
};

// Runs the transformer on one sequence. `node_features` supplies center and
// fine rows (sparse), `super_features` the coarse X' rows (dense). In Train
// mode `dropout_rng` must be non-null; Eval mode ignores it.
// Returns the logits row (also kept in the trace).
const RowMatrixXd& forward(const ModelParams& params, const FeatureTable& node_features,
                           const RowMatrixXd& super_features, const InputSequence& seq,
                           const RowMatrixXd& phi, RunMode mode,
                           RandomEngine* dropout_rng, ForwardTrace& trace);

// Cross entropy of one logits row; optionally emits softmax probabilities.
double cross_entropy(const RowMatrixXd& logits, int target, Eigen::RowVectorXd* probs = nullptr);

// softmax(logits) - onehot(target), scaled; the gradient of scale * CE loss
// with respect to the logits.
RowMatrixXd loss_gradient(const RowMatrixXd& logits, int target, double scale);

// Exact reverse-mode gradients for the traced forward; accumulates into
// `grads` (caller zeroes between optimizer steps).
void backward(const ModelParams& params, const FeatureTable& node_features,
              const RowMatrixXd& super_features, const ForwardTrace& trace,
              const RowMatrixXd& dlogits, ModelParams& grads);

// Per-fine-token significance: mean over layers and heads of
// attention-first-row weight times value norm, normalized to sum 1.
// All-zero records fall back to uniform (`degenerate` reports it).
std::vector<double> significance(const ForwardTrace& trace, bool* degenerate = nullptr);

// Versioned binary checkpoint of config + all named tensors.
void save_checkpoint(const std::filesystem::path& file, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& file);

}  // namespace agt
