#pragma once

#include <Eigen/Dense>

namespace hjweave {

/// Largest state dimension supported by the stack-allocated vector types.
inline constexpr int kMaxStateDim = 6;

/// State-space vectors (positions, velocities, momenta). Storage is inline,
/// so jets evaluated in inner loops never touch the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStateDim, kMaxStateDim>;

/// Coupling-sized objects (m x m matrices, m-vectors of u values).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace hjweave
