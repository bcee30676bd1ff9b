#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace anne {

using Index = std::size_t;
using Label = std::int32_t;
using IndexSet = std::vector<Index>;  // sorted ascending, no duplicates

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace anne
