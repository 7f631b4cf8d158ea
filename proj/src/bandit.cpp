#include "agt/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace agt {

BanditState BanditState::make(int num_arms, double exploration_floor, int update_period,
                              int sample_count) {
  if (num_arms <= 0) throw std::invalid_argument("bandit: need at least one arm");
  if (exploration_floor <= 0.0 || num_arms * exploration_floor >= 1.0)
    throw std::invalid_argument("bandit: need 0 < p_min and K*p_min < 1, got p_min = " +
                                std::to_string(exploration_floor));
  if (update_period <= 0) throw std::invalid_argument("bandit: update period must be positive");
  if (sample_count <= 0) throw std::invalid_argument("bandit: sample count must be positive");
  BanditState s;
  s.weights.assign(static_cast<std::size_t>(num_arms), 1.0);
  s.exploration_floor = exploration_floor;
  s.update_period = update_period;
  s.sample_count = sample_count;
  s.probs = probabilities_from_weights(s);
  return s;
}

std::vector<double> probabilities_from_weights(const BanditState& state) {
  const int k = state.num_arms();
  double total = 0.0;
  for (double w : state.weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("bandit: weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("bandit: all weights are zero");
  std::vector<double> p(static_cast<std::size_t>(k));
  const double spread = 1.0 - k * state.exploration_floor;
  for (int i = 0; i < k; ++i)
    p[static_cast<std::size_t>(i)] =
        spread * (state.weights[static_cast<std::size_t>(i)] / total) + state.exploration_floor;
  return p;
}

double MixedDistribution::prob_of(int id) const {
  const auto it = std::lower_bound(support.begin(), support.end(), id);
  if (it == support.end() || *it != id) return 0.0;
  return probs[static_cast<std::size_t>(it - support.begin())];
}

MixedDistribution combined_distribution(const std::vector<double>& p,
                                        const std::array<SamplingRow, kNumHeuristics>& q) {
  if (p.size() != static_cast<std::size_t>(kNumHeuristics))
    throw std::invalid_argument("combined_distribution: p has wrong length");

  // Drop empty heuristics and renormalize their mixture mass away.
  double live_mass = 0.0;
  bool any = false;
  for (int k = 0; k < kNumHeuristics; ++k)
    if (!q[static_cast<std::size_t>(k)].empty()) {
      live_mass += p[static_cast<std::size_t>(k)];
      any = true;
    }
  if (!any) throw std::invalid_argument("combined_distribution: every heuristic row is empty");

  MixedDistribution psi;
  for (int k = 0; k < kNumHeuristics; ++k) {
    const auto& row = q[static_cast<std::size_t>(k)];
    if (row.empty()) continue;
    // Degenerate pinned case: live mass can be 0 when p is an exact one-hot
    // on an empty row; fall back to uniform mixture over the live rows.
    const double share = live_mass > 0.0
                             ? p[static_cast<std::size_t>(k)] / live_mass
                             : 1.0;
    if (share == 0.0) continue;
    // Merge the sorted row into the sorted accumulator.
    MixedDistribution merged;
    merged.support.reserve(psi.support.size() + row.support.size());
    merged.probs.reserve(psi.support.size() + row.support.size());
    std::size_t a = 0, b = 0;
    while (a < psi.support.size() || b < row.support.size()) {
      if (b == row.support.size() ||
          (a < psi.support.size() && psi.support[a] < row.support[b])) {
        merged.support.push_back(psi.support[a]);
        merged.probs.push_back(psi.probs[a]);
        ++a;
      } else if (a == psi.support.size() || row.support[b] < psi.support[a]) {
        merged.support.push_back(row.support[b]);
        merged.probs.push_back(share * row.probs[b]);
        ++b;
      } else {
        merged.support.push_back(psi.support[a]);
        merged.probs.push_back(psi.probs[a] + share * row.probs[b]);
        ++a;
        ++b;
      }
    }
    psi = std::move(merged);
  }
  if (live_mass <= 0.0) {
    // Uniform fallback normalization for the pinned-empty case above.
    double total = 0.0;
    for (double v : psi.probs) total += v;
    for (double& v : psi.probs) v /= total;
  }
  return psi;
}

std::vector<int> sample_nodes(const MixedDistribution& psi, int count, RandomEngine& rng) {
  if (psi.support.empty())
    throw std::invalid_argument("sample_nodes: empty distribution");
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(count), psi.support.size());
  std::vector<int> ids = psi.support;
  std::vector<double> mass = psi.probs;
  double remaining = 0.0;
  for (double v : mass) remaining += v;

  std::vector<int> out;
  out.reserve(take);
  std::size_t live = ids.size();
  for (std::size_t draw = 0; draw < take; ++draw) {
    const double target = rng.uniform() * remaining;
    double acc = 0.0;
    std::size_t pick = live - 1;  // guard against FP undershoot at the tail
    for (std::size_t i = 0; i < live; ++i) {
      acc += mass[i];
      if (target < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(ids[pick]);
    remaining -= mass[pick];
    ids[pick] = ids[live - 1];
    mass[pick] = mass[live - 1];
    --live;
  }
  return out;
}

std::vector<double> compute_reward(const std::vector<double>& significance,
                                   const std::vector<int>& sampled,
                                   const std::array<SamplingRow, kNumHeuristics>& q,
                                   const MixedDistribution& psi) {
  if (significance.size() != sampled.size())
    throw std::invalid_argument("compute_reward: significance/sample length mismatch");
  double s_total = 0.0;
  for (double s : significance) {
    if (s < 0.0) throw std::invalid_argument("compute_reward: negative significance");
    s_total += s;
  }
  if (s_total <= 0.0)
    throw std::invalid_argument("compute_reward: significance sums to zero");

  std::vector<double> r(static_cast<std::size_t>(kNumHeuristics), 0.0);
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    const int node = sampled[i];
    const double psi_i = psi.prob_of(node);
    if (psi_i <= 0.0)
      throw std::logic_error("compute_reward: sampled node " + std::to_string(node) +
                             " has zero mixture probability");
    const double s_i = significance[i] / s_total;
    for (int k = 0; k < kNumHeuristics; ++k) {
      const double q_ki = q[static_cast<std::size_t>(k)].prob_of(node);
      if (q_ki > 0.0) r[static_cast<std::size_t>(k)] += s_i * q_ki / psi_i;
    }
  }
  return r;
}

BanditState update_weights(const BanditState& state, const std::vector<double>& reward,
                           bool* skipped) {
  if (reward.size() != state.weights.size())
    throw std::invalid_argument("update_weights: reward has wrong length");
  if (skipped) *skipped = false;
  for (double r : reward)
    if (!std::isfinite(r)) {
      if (skipped) *skipped = true;
      return state;
    }

  const int k = state.num_arms();
  const double scale = std::sqrt(std::log(state.sample_count / 0.1) /
                                 (static_cast<double>(k) * state.update_period));
  BanditState next = state;
  for (int i = 0; i < k; ++i) {
    const double growth = (state.exploration_floor / 2.0) *
                          (reward[static_cast<std::size_t>(i)] +
                           1.0 / state.probs[static_cast<std::size_t>(i)]) *
                          scale;
    next.weights[static_cast<std::size_t>(i)] *= std::exp(growth);
  }
  const double peak = *std::max_element(next.weights.begin(), next.weights.end());
  for (double& w : next.weights) w /= peak;
  next.probs = probabilities_from_weights(next);
  return next;
}

}  // namespace agt
