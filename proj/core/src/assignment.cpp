#include "thzalloc/assignment.hpp"

#include <limits>

#include "thzalloc/error.hpp"

namespace thz {

std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const std::size_t n = cost.rows(), m = cost.cols();
  if (n > m) throw ValidationError("assignment needs rows <= columns");
  if (!cost.allFinite()) throw ValidationError("assignment costs must be finite");
  if (n == 0) return {};

  // Shortest augmenting paths with potentials; arrays are 1-based, index 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weight) {
  return min_cost_assignment(-weight);
}

}  // namespace thz
