#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "agt/graph.hpp"

namespace agt {

// Row-sparse view of a feature matrix. Citation-style feature matrices are
// overwhelmingly zero, so cosine similarities and input projections iterate
// per-row nonzero lists instead of dense rows.
struct FeatureTable {
  int rows = 0;
  int cols = 0;
  std::vector<int> offsets;      // size rows+1
  std::vector<int> index;        // column of each nonzero
  std::vector<double> value;     // value of each nonzero
  std::vector<double> row_norm;  // Euclidean norm of each row

  explicit FeatureTable(const RowMatrixXd& x) {
    rows = static_cast<int>(x.rows());
    cols = static_cast<int>(x.cols());
    offsets.assign(static_cast<std::size_t>(rows) + 1, 0);
    row_norm.assign(static_cast<std::size_t>(rows), 0.0);
    for (int i = 0; i < rows; ++i) {
      double sq = 0.0;
      for (int j = 0; j < cols; ++j) {
        const double v = x(i, j);
        if (v != 0.0) {
          index.push_back(j);
          value.push_back(v);
          sq += v * v;
        }
      }
      offsets[static_cast<std::size_t>(i) + 1] = static_cast<int>(index.size());
      row_norm[static_cast<std::size_t>(i)] = std::sqrt(sq);
    }
  }

  std::span<const int> row_indices(int i) const {
    return {index.data() + offsets[static_cast<std::size_t>(i)],
            index.data() + offsets[static_cast<std::size_t>(i) + 1]};
  }
  std::span<const double> row_values(int i) const {
    return {value.data() + offsets[static_cast<std::size_t>(i)],
            value.data() + offsets[static_cast<std::size_t>(i) + 1]};
  }

  // Dot product of two rows; both index lists are sorted ascending.
  double dot(int a, int b) const {
    const auto ia = row_indices(a), ib = row_indices(b);
    const auto va = row_values(a), vb = row_values(b);
    double sum = 0.0;
    std::size_t x = 0, y = 0;
    while (x < ia.size() && y < ib.size()) {
      if (ia[x] < ib[y]) {
        ++x;
      } else if (ia[x] > ib[y]) {
        ++y;
      } else {
        sum += va[x] * vb[y];
        ++x;
        ++y;
      }
    }
    return sum;
  }

  // Cosine similarity; 0 when either row is all-zero.
  double cosine(int a, int b) const {
    const double na = row_norm[static_cast<std::size_t>(a)];
    const double nb = row_norm[static_cast<std::size_t>(b)];
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
  }
};

}  // namespace agt
