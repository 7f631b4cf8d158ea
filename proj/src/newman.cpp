#include "agt/newman.hpp"

#include <stdexcept>
#include <string>

namespace agt {

void validate(const NewmanConfig& cfg) {
  if (cfg.n <= 0) throw std::invalid_argument("newman: n must be positive");
  if (cfg.classes <= 1) throw std::invalid_argument("newman: need at least 2 classes");
  if (cfg.n % cfg.classes != 0)
    throw std::invalid_argument("newman: n (" + std::to_string(cfg.n) +
                                ") not divisible by classes (" + std::to_string(cfg.classes) + ")");
  if (cfg.attr_dim < 0) throw std::invalid_argument("newman: attr_dim must be nonnegative");
  if (cfg.attr_dim % cfg.classes != 0)
    throw std::invalid_argument("newman: attr_dim not divisible by classes");
  if (cfg.z_in < 0.0 || cfg.z_out < 0.0)
    throw std::invalid_argument("newman: z_in and z_out must be nonnegative");
  if (cfg.h_in < 0.0 || cfg.h_out < 0.0)
    throw std::invalid_argument("newman: h_in and h_out must be nonnegative");

  const int block = cfg.n / cfg.classes;
  const double p_in = cfg.z_in / (block - 1);
  const double p_out = cfg.z_out / (cfg.n - block);
  if (block < 2) throw std::invalid_argument("newman: class blocks need at least 2 nodes");
  if (p_in > 1.0)
    throw std::invalid_argument("newman: z_in too large, within-class probability " +
                                std::to_string(p_in) + " > 1");
  if (p_out > 1.0)
    throw std::invalid_argument("newman: z_out too large, between-class probability " +
                                std::to_string(p_out) + " > 1");
  if (cfg.attr_dim > 0) {
    const int h = cfg.attr_dim / cfg.classes;
    const double p_own = cfg.h_in / h;
    const double p_other = cfg.h_out / ((cfg.classes - 1) * static_cast<double>(h));
    if (p_own > 1.0)
      throw std::invalid_argument("newman: h_in too large, own-block bit probability " +
                                  std::to_string(p_own) + " > 1");
    if (p_other > 1.0)
      throw std::invalid_argument("newman: h_out too large, off-block bit probability " +
                                  std::to_string(p_other) + " > 1");
  }
}

Graph generate_newman(const NewmanConfig& cfg) {
  validate(cfg);
  const int block = cfg.n / cfg.classes;
  const double p_in = cfg.z_in / (block - 1);
  const double p_out = cfg.z_out / (cfg.n - block);

  RandomEngine rng(cfg.seed);
  std::vector<int> labels(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) labels[static_cast<std::size_t>(i)] = i / block;

  // Draw order is fixed (pairs i<j ascending, then attributes row by row),
  // which is what makes the output reproducible from the seed alone.
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < cfg.n; ++i)
    for (int j = i + 1; j < cfg.n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]
                           ? p_in
                           : p_out;
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }

  RowMatrixXd features(cfg.n, cfg.attr_dim);
  if (cfg.attr_dim > 0) {
    const int h = cfg.attr_dim / cfg.classes;
    const double p_own = cfg.h_in / h;
    const double p_other = cfg.h_out / ((cfg.classes - 1) * static_cast<double>(h));
    for (int i = 0; i < cfg.n; ++i) {
      const int own = labels[static_cast<std::size_t>(i)];
      for (int a = 0; a < cfg.attr_dim; ++a) {
        const double p = (a / h == own) ? p_own : p_other;
        features(i, a) = rng.bernoulli(p) ? 1.0 : 0.0;
      }
    }
  }

  return make_graph(cfg.n, edges, std::move(features), std::move(labels));
}

double expected_homophily(const NewmanConfig& cfg) {
  if (cfg.z_in + cfg.z_out <= 0.0)
    throw std::invalid_argument("newman: expected_homophily undefined for z_in + z_out = 0");
  return cfg.z_in / (cfg.z_in + cfg.z_out);
}

}  // namespace agt
