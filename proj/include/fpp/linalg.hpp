#pragma once

#include <Eigen/Dense>

namespace fpp {

// Factor, asset and Brownian dimensions are small; capping them keeps every
// vector and matrix on the stack, which matters inside the path simulator.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

}  // namespace fpp
