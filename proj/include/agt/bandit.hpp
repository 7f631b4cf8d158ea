#pragma once

#include <array>
#include <vector>

#include "agt/heuristics.hpp"
#include "agt/rng.hpp"

namespace agt {

// Adversarial-bandit state over the K sampling heuristics: exponential
// weights with an exploration floor. One state is shared by all center
// nodes; probabilities change only at update epochs.
struct BanditState {
  std::vector<double> weights;       // w_k > 0, init all 1
  std::vector<double> probs;         // p_k in [exploration_floor, 1]
  double exploration_floor = 0.1;    // p_min, requires K*p_min < 1
  int update_period = 100;           // T, epochs between weight updates
  int sample_count = 20;             // N, nodes drawn per center
  int epoch = 0;                     // t

  static BanditState make(int num_arms = kNumHeuristics, double exploration_floor = 0.1,
                          int update_period = 100, int sample_count = 20);
  int num_arms() const { return static_cast<int>(weights.size()); }
};

// p_k = (1 - K*p_min) * w_k / sum_j w_j + p_min. Guarantees sum(p) = 1 and
// p_k >= p_min whenever K*p_min <= 1. Throws on all-zero or negative weights.
std::vector<double> probabilities_from_weights(const BanditState& state);

// The blended per-center sampling distribution psi_i = sum_k p_k * Q_{k,i}
// over the union of the rows' supports. Support sorted ascending.
struct MixedDistribution {
  std::vector<int> support;
  std::vector<double> probs;
  double prob_of(int id) const;
};

// Empty rows are removed and p renormalized over the survivors first.
// Throws std::invalid_argument when every row is empty (caller falls back
// to a uniform choice over all non-center nodes).
MixedDistribution combined_distribution(const std::vector<double>& p,
                                        const std::array<SamplingRow, kNumHeuristics>& q);

// Up to `count` distinct nodes by sequential weighted draws without
// replacement (renormalizing after each draw). Returns the whole support
// when it is smaller than `count`.
std::vector<int> sample_nodes(const MixedDistribution& psi, int count, RandomEngine& rng);

// Per-heuristic reward for one sequence:
//   r_k = sum_{i in sampled} s_i * Q_{k,i} / psi_i
// with s normalized to sum 1 first. The trainer averages these vectors over
// all centers and augmentations in the update window before updating.
std::vector<double> compute_reward(const std::vector<double>& significance,
                                   const std::vector<int>& sampled,
                                   const std::array<SamplingRow, kNumHeuristics>& q,
                                   const MixedDistribution& psi);

// Exponential-weights update:
//   w_k <- w_k * exp((p_min/2) * (r_k + 1/p_k) * sqrt(ln(N/0.1) / (K*T)))
// followed by max-normalization of w (overflow guard; p is scale-invariant)
// and recomputation of p. A non-finite reward vector leaves the state
// unchanged (`skipped` reports this).
BanditState update_weights(const BanditState& state, const std::vector<double>& reward,
                           bool* skipped = nullptr);

}  // namespace agt
