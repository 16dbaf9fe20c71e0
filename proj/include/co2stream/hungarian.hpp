#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

namespace co2stream {

/// Minimum-cost assignment on a rectangular cost matrix (Hungarian method with
/// row/column potentials, O(n^2 m)). Returns, for every row, the assigned column
/// or -1. Every row is assigned when rows <= cols, every column otherwise.
template <typename Derived>
std::vector<int> solve_assignment(const Eigen::MatrixBase<Derived>& cost) {
  using Scalar = typename Derived::Scalar;
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  std::vector<int> result(rows, -1);
  if (rows == 0 || cols == 0) return result;

  if (rows > cols) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> transposed = cost.transpose();
    const std::vector<int> by_col = solve_assignment(transposed);
    for (int c = 0; c < cols; ++c) {
      if (by_col[c] >= 0) result[by_col[c]] = c;
    }
    return result;
  }

  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based arrays; index 0 is the virtual start column.
  std::vector<Scalar> u(rows + 1, 0), v(cols + 1, 0);
  std::vector<int> owner(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = owner[j0];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const int j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= cols; ++j) {
    if (owner[j] != 0) result[owner[j] - 1] = j - 1;
  }
  return result;
}

}  // namespace co2stream
