#include "agt/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace agt {

AdamW::AdamW(ModelParams& params, AdamWConfig cfg) : cfg_(cfg) {
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw std::invalid_argument("adamw: moment decays must lie in [0, 1)");
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("adamw: epsilon must be positive");
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("adamw: negative weight decay");
  for (const auto& ref : tensor_refs(params)) {
    m_.push_back(RowMatrixXd::Zero(ref.tensor->rows(), ref.tensor->cols()));
    v_.push_back(RowMatrixXd::Zero(ref.tensor->rows(), ref.tensor->cols()));
    decay_.push_back(ref.weight_decay ? 1 : 0);
  }
}

void AdamW::step(ModelParams& params, ModelParams& grads, double lr) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads);
  if (prefs.size() != m_.size() || grefs.size() != m_.size())
    throw std::invalid_argument("adamw: parameter layout changed under the optimizer");

  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));

  for (std::size_t i = 0; i < m_.size(); ++i) {
    RowMatrixXd& p = *prefs[i].tensor;
    const RowMatrixXd& g = *grefs[i].tensor;
    RowMatrixXd& m = m_[i];
    RowMatrixXd& v = v_[i];
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    // Decoupled weight decay first, then the adaptive step.
    if (decay_[i]) p -= (lr * cfg_.weight_decay) * p;
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.epsilon);
  }
}

}  // namespace agt
