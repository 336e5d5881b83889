#pragma once

#include <Eigen/Dense>

#include "hjweave/types.hpp"

namespace hjweave {

/// Piecewise-linear curve on [0, t] through N + 1 uniformly spaced nodes
/// s_k = k t / N. Column k of nodes() is the point at s_k.
class Trajectory {
public:
    Trajectory(double horizon, Eigen::MatrixXd nodes);

    static Trajectory straight_line(const Vec& start, const Vec& end, double horizon, int segments);
    static Trajectory constant(const Vec& point, double horizon, int segments);

    double horizon() const { return horizon_; }
    int segments() const { return static_cast<int>(nodes_.cols()) - 1; }
    int dim() const { return static_cast<int>(nodes_.rows()); }
    double step() const { return horizon_ / segments(); }
    double time(int k) const { return horizon_ * k / segments(); }

    Vec node(int k) const { return nodes_.col(k); }
    void set_node(int k, const Vec& point) { nodes_.col(k) = point; }
    Vec start() const { return node(0); }
    Vec end() const { return node(segments()); }

    /// Constant velocity on segment l, i.e. (xi_{l+1} - xi_l) N / t.
    Vec velocity(int segment) const;
    /// Point at the segment midpoint.
    Vec midpoint(int segment) const;

    const Eigen::MatrixXd& nodes() const { return nodes_; }
    Eigen::MatrixXd& nodes() { return nodes_; }

    /// eta(s) = xi(t - s).
    Trajectory reversed() const;

private:
    double horizon_;
    Eigen::MatrixXd nodes_;
};

}  // namespace hjweave
