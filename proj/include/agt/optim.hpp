#pragma once

#include <vector>

#include "agt/model.hpp"

namespace agt {

struct AdamWConfig {
  double beta1 = 0.99;   // unusual first-moment decay, kept configurable
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;  // decoupled; applied to weight matrices only
};

// AdamW with bias correction. Moment buffers align with tensor_refs order,
// so the bound ModelParams object may be copied/restored freely as long as
// its shape (config) stays fixed.
class AdamW {
 public:
  AdamW(ModelParams& params, AdamWConfig cfg);
  void step(ModelParams& params, ModelParams& grads, double lr);

 private:
  AdamWConfig cfg_;
  std::vector<RowMatrixXd> m_, v_;
  std::vector<char> decay_;
  long steps_ = 0;
};

// Linear warmup to `peak` over `warmup` epochs (lr(0) = peak/warmup,
// lr(warmup) = peak), then linear decay to `end` at epoch `total`.
struct LrSchedule {
  double peak = 2e-4;
  int warmup = 100;
  double end = 1e-9;
  int total = 1000;

  double at(int epoch) const {
    if (warmup > 0 && epoch < warmup)
      return peak * static_cast<double>(epoch + 1) / static_cast<double>(warmup);
    if (total <= warmup) return peak;
    const double frac = static_cast<double>(epoch - warmup) / static_cast<double>(total - warmup);
    return peak + (end - peak) * frac;
  }
};

}  // namespace agt
