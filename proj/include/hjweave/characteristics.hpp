#pragma once

#include <iosfwd>
#include <vector>

#include "hjweave/caratheodory.hpp"
#include "hjweave/coupling.hpp"
#include "hjweave/lagrangian.hpp"
#include "hjweave/trajectory.hpp"

namespace hjweave {

struct FlowOptions {
    /// RK4 steps on [0, t].
    int steps = 1000;
    /// Smallest admissible |lambda|_min / |lambda|_max of the weighted D^2_v L.
    double singular_tolerance = 1e-12;
};

/// Curve xi solving the weighted Euler-Lagrange equation
///   (d/ds) sum_j d_ij(s) L^j_v = sum_j d_ij(s) L^j_x,   d(s) = exp(A (s - t)),
/// from xi(0) = x0, xi'(0) = v0. Sampled at the RK4 steps.
/// Throws SingularityError when the weighted D^2_v L cannot be inverted.
Trajectory herglotz_flow(int index, const Vec& x0, const Vec& v0, double horizon,
                         const CouplingMatrix& a, const LagrangianSet& lagrangians,
                         const FlowOptions& options = {});

/// Same flow; returns the velocity samples (dim x (steps + 1)).
Eigen::MatrixXd herglotz_flow_velocities(int index, const Vec& x0, const Vec& v0,
                                         double horizon, const CouplingMatrix& a,
                                         const LagrangianSet& lagrangians,
                                         const FlowOptions& options = {});

/// Starting data of the Lie system: positions[i] = xi_i(0),
/// momenta[i][j] = p^j_i(0), values(i, j) = u^j_i(0).
struct LieInitialData {
    std::vector<Vec> positions;
    std::vector<std::vector<Vec>> momenta;
    Matrix values;
};

/// p^j_i(0) = L^j_v(xi_i(0), v_i(0)): initial data satisfying the consistency
/// requirement of lie_flow.
LieInitialData consistent_initial_data(const LagrangianSet& lagrangians,
                                       const std::vector<Vec>& positions,
                                       const std::vector<Vec>& velocities, const Matrix& values);

/// Samples along one characteristic xi_i.
struct CharacteristicCurve {
    int index = 0;
    std::vector<Vec> position;
    /// momenta[j][k] = p^j_i(s_k).
    std::vector<std::vector<Vec>> momenta;
    /// values(j, k) = u^j_i(s_k).
    Eigen::MatrixXd values;
    /// composite[k] = sum_j d_ij(s_k) p^j_i(s_k).
    std::vector<Vec> composite;
};

struct CharacteristicBundle {
    double horizon = 0.0;
    LagrangianSet lagrangians;
    std::vector<double> times;
    std::vector<CharacteristicCurve> curves;
    /// max over samples, curves and j of |H^j_p(xi_i, p^j_i) - H^1_p(xi_i, p^1_i)|.
    double velocity_defect = 0.0;
};

/// Threshold on the initial velocity defect.
inline constexpr double kLieConsistencyTolerance = 1e-6;

/// Integrates, for every i,
///   xi_i'   = H^1_p(xi_i, p^1_i),
///   p^j_i'  = (d/ds) L^j_v(xi_i, xi_i') with xi_i'' from the weighted
///             Euler-Lagrange equation of row i,
///   u^j_i'  = p^j_i . H^j_p - H^j - sum_k a_jk u^k_i,
/// all Hamiltonians evaluated at (xi_i, p^j_i). Throws InvalidInputError when
/// the initial momenta do not share one velocity.
CharacteristicBundle lie_flow(const LieInitialData& initial, double horizon,
                              const CouplingMatrix& a, const LagrangianSet& lagrangians,
                              const FlowOptions& options = {});

/// Bundle along a discrete minimizer of u_index: velocities by second-order
/// differences at the nodes, p^j = L^j_v, u^j from the Caratheodory state.
CharacteristicBundle bundle_from_minimizer(int index, const Trajectory& minimizer,
                                           const CaratheodoryState& state,
                                           const CouplingMatrix& a,
                                           const LagrangianSet& lagrangians);

struct DualArcResidual {
    double momentum = 0.0;
    double hamiltonian = 0.0;
};

/// momentum    = sup ||L-bold^i_v(s, xi_i, xi_i') - sum_j d_ij p^j_i||,
///               with xi_i' differenced from the position samples;
/// hamiltonian = sup |H-bold^i(s, xi_i, p_i) - sum_j d_ij H^j(xi_i, p^j_i)|,
///               H-bold^i from inf_convolution.
DualArcResidual dual_arc_check(const CharacteristicBundle& bundle, const Propagator& propagator);

struct ShootOptions {
    FlowOptions flow;
    double tolerance = 1e-9;
    int max_iterations = 50;
};

/// Initial velocity v0 with herglotz_flow(index, start, v0, t).end() == end.
/// Damped Newton with a finite-difference Jacobian; ConvergenceError on failure.
Vec shoot(int index, double horizon, const Vec& start, const Vec& end, const CouplingMatrix& a,
          const LagrangianSet& lagrangians, const ShootOptions& options = {});

/// Header: s, then per curve i: x<i>_<d>, p<i>_<j>_<d>, u<i>_<j> (1-based).
void write_bundle_csv(std::ostream& out, const CharacteristicBundle& bundle);

}  // namespace hjweave
