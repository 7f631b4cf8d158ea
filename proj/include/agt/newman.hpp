#pragma once

#include <cstdint>

#include "agt/graph.hpp"

namespace agt {

// Planted-partition generator with class-correlated binary attributes.
// Nodes are split into `classes` contiguous equal blocks. Each same-class
// pair is joined with probability z_in / (block - 1) and each cross-class
// pair with probability z_out / (n - block), so z_in and z_out are the
// expected within- and between-class degrees. Each node carries attr_dim
// binary attributes, split into one block of attr_dim/classes bits per
// class: bits in the node's own class block fire with probability
// h_in / (attr_dim/classes), all other bits with probability
// h_out / ((classes-1) * attr_dim/classes).
struct NewmanConfig {
  int n = 128;
  int classes = 4;
  double z_in = 12.0;
  double z_out = 4.0;
  int attr_dim = 200;
  double h_in = 12.0;
  double h_out = 4.0;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument when the config is inconsistent (block sizes
// not integral, any implied probability outside [0, 1], ...).
void validate(const NewmanConfig& cfg);

// Deterministic for a fixed config: the same seed yields a bit-identical
// graph on any platform (see RandomEngine).
Graph generate_newman(const NewmanConfig& cfg);

// Expected fraction of same-class edges: z_in / (z_in + z_out).
double expected_homophily(const NewmanConfig& cfg);

}  // namespace agt
