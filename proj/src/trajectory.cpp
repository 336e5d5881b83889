#include "hjweave/trajectory.hpp"

#include <cmath>

#include "hjweave/errors.hpp"

namespace hjweave {

Trajectory::Trajectory(double horizon, Eigen::MatrixXd nodes)
    : horizon_(horizon), nodes_(std::move(nodes)) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
        throw DomainError("trajectory: horizon must be a finite t > 0");
    if (nodes_.cols() < 2) throw InvalidInputError("trajectory: need at least one segment");
    if (nodes_.rows() < 1 || nodes_.rows() > kMaxStateDim)
        throw InvalidInputError("trajectory: unsupported state dimension");
}

Trajectory Trajectory::straight_line(const Vec& start, const Vec& end, double horizon,
                                     int segments) {
    if (segments < 1) throw InvalidInputError("trajectory: need at least one segment");
    if (start.size() != end.size()) throw InvalidInputError("trajectory: endpoint dimensions differ");
    Eigen::MatrixXd nodes(start.size(), segments + 1);
    for (int k = 0; k <= segments; ++k) {
        const double lambda = static_cast<double>(k) / segments;
        nodes.col(k) = (1.0 - lambda) * start + lambda * end;
    }
    nodes.col(segments) = end;
    return Trajectory(horizon, std::move(nodes));
}

Trajectory Trajectory::constant(const Vec& point, double horizon, int segments) {
    return straight_line(point, point, horizon, segments);
}

Vec Trajectory::velocity(int segment) const {
    return (nodes_.col(segment + 1) - nodes_.col(segment)) / step();
}

Vec Trajectory::midpoint(int segment) const {
    return 0.5 * (nodes_.col(segment) + nodes_.col(segment + 1));
}

Trajectory Trajectory::reversed() const { return Trajectory(horizon_, nodes_.rowwise().reverse()); }

}  // namespace hjweave
