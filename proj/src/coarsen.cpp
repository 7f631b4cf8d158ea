#include "agt/coarsen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace agt {
namespace {

// Union-find over current cluster ids (path halving, union by smaller root
// id so representatives stay deterministic).
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
  }
};

// Compacts a fine-node -> cluster map to consecutive ids ordered by first
// appearance (i.e. by lowest member id). Returns the cluster count. Input
// ids may be sparse (partition files can skip values) but not negative.
int compact_map(std::vector<int>& map) {
  int max_id = 0;
  for (int m : map) {
    if (m < 0) throw std::invalid_argument("partition: negative cluster id");
    max_id = std::max(max_id, m);
  }
  std::vector<int> relabel(static_cast<std::size_t>(max_id) + 1, -1);
  int next = 0;
  for (int& m : map) {
    if (relabel[static_cast<std::size_t>(m)] < 0) relabel[static_cast<std::size_t>(m)] = next++;
    m = relabel[static_cast<std::size_t>(m)];
  }
  return next;
}

// Weighted coarse edge list of the current clustering: one entry per
// unordered cluster pair, weight = number of fine edges between them.
// std::map keys keep the order deterministic.
std::map<std::pair<int, int>, double> coarse_edges(const Graph& g, const std::vector<int>& map) {
  std::map<std::pair<int, int>, double> edges;
  for (int v = 0; v < g.n; ++v)
    for (int u : g.neighbors(v)) {
      if (u <= v) continue;
      int a = map[static_cast<std::size_t>(v)];
      int b = map[static_cast<std::size_t>(u)];
      if (a == b) continue;
      if (b < a) std::swap(a, b);
      edges[{a, b}] += 1.0;
    }
  return edges;
}

// One matching-contraction round. Returns the number of contractions made;
// stops early as soon as `current - contracted` would reach `target`.
int edge_match_round(const Graph& g, std::vector<int>& map, int current, int target) {
  const auto weights = coarse_edges(g, map);
  if (weights.empty()) return 0;
  struct Edge {
    double w;
    int a, b;
  };
  std::vector<Edge> order;
  order.reserve(weights.size());
  for (const auto& [key, w] : weights) order.push_back({w, key.first, key.second});
  std::sort(order.begin(), order.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w > y.w;
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });

  UnionFind uf(current);
  std::vector<char> matched(static_cast<std::size_t>(current), 0);
  int contracted = 0;
  for (const auto& e : order) {
    if (current - contracted <= target) break;
    if (matched[static_cast<std::size_t>(e.a)] || matched[static_cast<std::size_t>(e.b)]) continue;
    matched[static_cast<std::size_t>(e.a)] = matched[static_cast<std::size_t>(e.b)] = 1;
    uf.unite(e.a, e.b);
    ++contracted;
  }
  if (contracted > 0)
    for (int v = 0; v < g.n; ++v)
      map[static_cast<std::size_t>(v)] = uf.find(map[static_cast<std::size_t>(v)]);
  return contracted;
}

// One seed-plus-neighborhood round. Lowest-degree (then lowest-id) cluster
// seeds absorb their still-free coarse neighbors; absorption stops the
// moment the prospective cluster count reaches `target`.
int neighborhood_round(const Graph& g, std::vector<int>& map, int current, int target) {
  // Coarse adjacency lists, ascending and deduplicated.
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(current));
  for (int v = 0; v < g.n; ++v)
    for (int u : g.neighbors(v)) {
      const int a = map[static_cast<std::size_t>(v)];
      const int b = map[static_cast<std::size_t>(u)];
      if (a != b) nbrs[static_cast<std::size_t>(a)].push_back(b);
    }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  std::vector<int> seeds(static_cast<std::size_t>(current));
  for (int i = 0; i < current; ++i) seeds[static_cast<std::size_t>(i)] = i;
  std::sort(seeds.begin(), seeds.end(), [&](int x, int y) {
    const std::size_t dx = nbrs[static_cast<std::size_t>(x)].size();
    const std::size_t dy = nbrs[static_cast<std::size_t>(y)].size();
    if (dx != dy) return dx < dy;
    return x < y;
  });

  UnionFind uf(current);
  std::vector<char> taken(static_cast<std::size_t>(current), 0);
  int absorbed = 0;
  for (int seed : seeds) {
    if (current - absorbed <= target) break;
    if (taken[static_cast<std::size_t>(seed)]) continue;
    taken[static_cast<std::size_t>(seed)] = 1;
    for (int nb : nbrs[static_cast<std::size_t>(seed)]) {
      if (current - absorbed <= target) break;
      if (taken[static_cast<std::size_t>(nb)]) continue;
      taken[static_cast<std::size_t>(nb)] = 1;
      uf.unite(seed, nb);
      ++absorbed;
    }
  }
  if (absorbed > 0)
    for (int v = 0; v < g.n; ++v)
      map[static_cast<std::size_t>(v)] = uf.find(map[static_cast<std::size_t>(v)]);
  return absorbed;
}

// Merges the smallest clusters (ties by lowest member id) until `target`
// remain. Runs after contraction stalls, e.g. when the graph has more
// connected components than the target.
void pack_to_target(std::vector<int>& map, int current, int target) {
  if (current <= target) return;
  std::vector<int> min_member(static_cast<std::size_t>(current), -1);
  std::vector<int> size(static_cast<std::size_t>(current), 0);
  for (std::size_t v = 0; v < map.size(); ++v) {
    const int c = map[v];
    ++size[static_cast<std::size_t>(c)];
    if (min_member[static_cast<std::size_t>(c)] < 0) min_member[static_cast<std::size_t>(c)] = static_cast<int>(v);
  }

  using Entry = std::tuple<int, int, int>;  // (size, min member, cluster id)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (int c = 0; c < current; ++c) heap.emplace(size[static_cast<std::size_t>(c)], min_member[static_cast<std::size_t>(c)], c);

  UnionFind uf(current);
  std::vector<char> dead(static_cast<std::size_t>(current), 0);
  int remaining = current;
  while (remaining > target) {
    auto pop_live = [&]() {
      while (true) {
        const auto [sz, mm, c] = heap.top();
        heap.pop();
        // Skip stale entries (cluster already merged away or resized).
        if (!dead[static_cast<std::size_t>(c)] && uf.find(c) == c && sz == size[static_cast<std::size_t>(c)]) return std::make_tuple(sz, mm, c);
      }
    };
    const auto [sa, ma, a] = pop_live();
    const auto [sb, mb, b] = pop_live();
    uf.unite(a, b);
    const int root = uf.find(a);
    const int other = root == a ? b : a;
    dead[static_cast<std::size_t>(other)] = 1;
    size[static_cast<std::size_t>(root)] = sa + sb;
    min_member[static_cast<std::size_t>(root)] = std::min(ma, mb);
    heap.emplace(size[static_cast<std::size_t>(root)], min_member[static_cast<std::size_t>(root)], root);
    --remaining;
  }
  for (int& m : map) m = uf.find(m);
}

}  // namespace

const char* coarsen_method_name(CoarsenMethod m) {
  switch (m) {
    case CoarsenMethod::EdgeMatch: return "edge_match";
    case CoarsenMethod::NeighborhoodMerge: return "neighborhood_merge";
  }
  throw std::invalid_argument("coarsen_method_name: bad method");
}

CoarsenMethod parse_coarsen_method(const std::string& name) {
  if (name == "edge_match") return CoarsenMethod::EdgeMatch;
  if (name == "neighborhood_merge") return CoarsenMethod::NeighborhoodMerge;
  throw std::invalid_argument("unknown coarsening method '" + name +
                              "' (expected edge_match or neighborhood_merge)");
}

Partition Partition::from_assignment(std::vector<int> assignment) {
  const int n = static_cast<int>(assignment.size());
  if (n == 0) throw std::invalid_argument("partition: empty assignment");
  // Canonical ids: clusters numbered by their lowest member.
  compact_map(assignment);
  Partition p;
  p.assignment = std::move(assignment);
  p.num_clusters = 1 + *std::max_element(p.assignment.begin(), p.assignment.end());
  p.sizes.assign(static_cast<std::size_t>(p.num_clusters), 0);
  for (int c : p.assignment) ++p.sizes[static_cast<std::size_t>(c)];
  p.member_ptr.assign(static_cast<std::size_t>(p.num_clusters) + 1, 0);
  for (int c = 0; c < p.num_clusters; ++c)
    p.member_ptr[static_cast<std::size_t>(c) + 1] =
        p.member_ptr[static_cast<std::size_t>(c)] + p.sizes[static_cast<std::size_t>(c)];
  p.member_ids.resize(static_cast<std::size_t>(n));
  std::vector<int> cursor(p.member_ptr.begin(), p.member_ptr.end() - 1);
  for (int v = 0; v < n; ++v)
    p.member_ids[static_cast<std::size_t>(cursor[static_cast<std::size_t>(p.assignment[static_cast<std::size_t>(v)])]++)] = v;
  return p;
}

Partition coarsen(const Graph& g, double rate, CoarsenMethod method) {
  if (rate <= 0.0 || rate > 1.0)
    throw std::invalid_argument("coarsen: rate must lie in (0, 1]");
  if (g.n == 0) throw std::invalid_argument("coarsen: empty graph");
  const int target = std::max(1, static_cast<int>(std::ceil(rate * g.n)));

  std::vector<int> map(static_cast<std::size_t>(g.n));
  for (int v = 0; v < g.n; ++v) map[static_cast<std::size_t>(v)] = v;
  int current = g.n;

  while (current > target) {
    const int before = current;
    const int done = method == CoarsenMethod::EdgeMatch
                         ? edge_match_round(g, map, current, target)
                         : neighborhood_round(g, map, current, target);
    if (done == 0) break;  // stalled: no coarse edges left to contract
    current = compact_map(map);
    if (current >= before)
      throw std::logic_error("coarsen: round made no progress");  // unreachable
  }
  if (current > target) {
    pack_to_target(map, current, target);
    current = compact_map(map);
  }
  return Partition::from_assignment(std::move(map));
}

CoarseGraph coarse_algebra(const Graph& g, const Partition& part) {
  return coarse_algebra(g, part, g.features);
}

CoarseGraph coarse_algebra(const Graph& g, const Partition& part,
                           const RowMatrixXd& features) {
  if (static_cast<int>(part.assignment.size()) != g.n)
    throw std::invalid_argument("coarse_algebra: partition size mismatch");
  if (features.rows() != g.n)
    throw std::invalid_argument("coarse_algebra: feature rows mismatch");

  const int np = part.num_clusters;
  std::vector<double> inv_sqrt(static_cast<std::size_t>(np));
  for (int c = 0; c < np; ++c)
    inv_sqrt[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(static_cast<double>(part.sizes[static_cast<std::size_t>(c)]));

  CoarseGraph coarse;
  coarse.n_prime = np;
  coarse.origin = part;

  // X' = P^T X. Scalar two-statement accumulation so the dense oracle in the
  // tests (same loop order) matches bit-for-bit even under FP contraction.
  coarse.features = RowMatrixXd::Zero(np, features.cols());
  for (int i = 0; i < g.n; ++i) {
    const int a = part.assignment[static_cast<std::size_t>(i)];
    const double pa = inv_sqrt[static_cast<std::size_t>(a)];
    for (Eigen::Index f = 0; f < features.cols(); ++f) {
      const double term = pa * features(i, f);
      coarse.features(a, f) += term;
    }
  }

  // A' = P^T A P over the fine edge list, same exactness discipline.
  coarse.adjacency = RowMatrixXd::Zero(np, np);
  for (int i = 0; i < g.n; ++i) {
    const int a = part.assignment[static_cast<std::size_t>(i)];
    const double pa = inv_sqrt[static_cast<std::size_t>(a)];
    for (int l : g.neighbors(i)) {
      const int b = part.assignment[static_cast<std::size_t>(l)];
      const double scaled = pa * 1.0;  // A_il = 1 for every fine edge
      const double term = scaled * inv_sqrt[static_cast<std::size_t>(b)];
      coarse.adjacency(a, b) += term;
    }
  }
  return coarse;
}

void save_partition(const std::filesystem::path& file, const Partition& part) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (std::size_t v = 0; v < part.assignment.size(); ++v)
    out << v << ' ' << part.assignment[v] << '\n';
}

Partition load_partition(const std::filesystem::path& file, int n) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ss(line);
    int node = 0, cluster = 0;
    if (!(ss >> node >> cluster))
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                               ": expected 'node cluster'");
    if (node < 0 || node >= n)
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                               ": node id out of range");
    if (cluster < 0)
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                               ": negative cluster id");
    assignment[static_cast<std::size_t>(node)] = cluster;
  }
  for (std::size_t v = 0; v < assignment.size(); ++v)
    if (assignment[v] < 0)
      throw std::runtime_error(file.string() + ": node " + std::to_string(v) +
                               " has no cluster assignment");
  return Partition::from_assignment(std::move(assignment));
}

}  // namespace agt
