#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace thz {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// O(rows^2 cols). Returns the column chosen for each row.
std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd& cost);

/// Same with weights maximized.
std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weight);

}  // namespace thz
