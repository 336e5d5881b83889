#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hjweave {

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Optional curvature model: `rebuild` is called at the current iterate every
/// `refresh` iterations, `apply` returns an approximation of H^{-1} q.
struct Preconditioner {
    std::function<void(const Eigen::VectorXd& x)> rebuild;
    std::function<Eigen::VectorXd(const Eigen::VectorXd& q)> apply;
    int refresh = 20;
};

struct LbfgsOptions {
    /// Converged when |grad|_inf <= gradient_tolerance.
    double gradient_tolerance = 1e-8;
    int max_iterations = 500;
    int memory = 10;
    double armijo = 1e-4;
    int max_backtracks = 60;
};

struct LbfgsReport {
    bool converged = false;
    int iterations = 0;
    double value = 0.0;
    double gradient_norm = 0.0;
    /// Objective after every accepted step, starting with the initial value.
    std::vector<double> history;
    std::string message;
};

/// Limited-memory BFGS with backtracking Armijo line search. `x` is updated in
/// place with the best iterate found. Never throws on non-convergence; the
/// caller inspects the report.
LbfgsReport lbfgs(const Objective& objective, Eigen::VectorXd& x, const LbfgsOptions& options = {},
                  const Preconditioner* preconditioner = nullptr);

}  // namespace hjweave
