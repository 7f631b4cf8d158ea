#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agt/graph.hpp"

namespace agt {

// Two deterministic coarsening strategies behind one interface.
//   EdgeMatch: repeatedly contracts a maximal matching of highest-weight
//     coarse edges (weight = inter-cluster edge count).
//   NeighborhoodMerge: greedily merges a seed with its full 1-hop
//     neighborhood, lowest-degree seeds first.
enum class CoarsenMethod { EdgeMatch, NeighborhoodMerge };

const char* coarsen_method_name(CoarsenMethod m);
CoarsenMethod parse_coarsen_method(const std::string& name);  // throws on unknown

// Node-to-cluster map. Cluster ids are canonical: ordered by their lowest
// member id. Member lists are exposed CSR-style for the proximity lifting.
struct Partition {
  int num_clusters = 0;
  std::vector<int> assignment;     // size n, values in [0, num_clusters)
  std::vector<int> sizes;          // per-cluster node counts
  std::vector<int> member_ptr;     // size num_clusters+1
  std::vector<int> member_ids;     // cluster members, ascending within cluster

  std::span<const int> members(int cluster) const {
    return {member_ids.data() + member_ptr[static_cast<std::size_t>(cluster)],
            member_ids.data() + member_ptr[static_cast<std::size_t>(cluster) + 1]};
  }
  // Rebuilds sizes/members from assignment and validates coverage.
  static Partition from_assignment(std::vector<int> assignment);
};

// Coarse graph under the scaled-membership algebra. With Phat the 0/1
// membership matrix and P = Phat D^{-1/2} (D = diag cluster sizes):
//   features' = P^T X   and   adjacency' = P^T A P,
// i.e. X'_j = (sum_{i in C_j} x_i) / sqrt(|C_j|) and
// A'_{jk} = (#edges between C_j and C_k) / sqrt(|C_j| |C_k|).
struct CoarseGraph {
  int n_prime = 0;
  RowMatrixXd features;     // n' x p
  RowMatrixXd adjacency;    // n' x n', symmetric, nonnegative
  Partition origin;
};

// Produces exactly ceil(rate * n) clusters (rate = 1 gives the identity
// partition). The chosen method contracts until the target or a stall
// (no remaining coarse edges: e.g. more connected components than target);
// a deterministic pack phase then merges the smallest clusters (ties by
// lowest member id) until the target is reached exactly.
Partition coarsen(const Graph& g, double rate, CoarsenMethod method);

CoarseGraph coarse_algebra(const Graph& g, const Partition& part);
// Same algebra with a substitute feature matrix (e.g. normalized features).
CoarseGraph coarse_algebra(const Graph& g, const Partition& part,
                           const RowMatrixXd& features);

// Text format: one "node_id cluster_id" line per node.
void save_partition(const std::filesystem::path& file, const Partition& part);
Partition load_partition(const std::filesystem::path& file, int n);

}  // namespace agt
