#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "hjweave/caratheodory.hpp"
#include "hjweave/coupling.hpp"
#include "hjweave/lagrangian.hpp"
#include "hjweave/optimizer.hpp"
#include "hjweave/trajectory.hpp"

namespace hjweave {

/// Cost attached to a free end node; writes the gradient when `grad` is set.
using EndpointCost = std::function<double(const Vec& x, Vec* grad)>;

/// Discrete Bolza functional on piecewise-linear curves with N segments:
///   constant + start_cost(xi_0) + end_cost(xi_N)
///     + sum_l sum_j weights(j, l) L^j(midpoint_l, velocity_l).
/// An end node is a free variable exactly when its cost is set; otherwise it
/// is held at the value stored in the curve.
struct DiscreteAction {
    LagrangianSet lagrangians;
    Matrix weights;  // m x N
    double constant = 0.0;
    EndpointCost start_cost;
    EndpointCost end_cost;
};

/// Weights of u_i(t) when u(0) is prescribed:
///   row i of exp(-A h)^{N-1-l} h phi_1(-A h), l = 0..N-1.
Matrix forward_weights(int index, const CouplingMatrix& a, double horizon, int segments);

/// Weights of -u_i(0) when u(t) is prescribed:
///   row i of exp(A h)^l h phi_1(A h), l = 0..N-1.
Matrix terminal_weights(int index, const CouplingMatrix& a, double horizon, int segments);

/// Value of the functional; when `grad` is set it receives dim x (N+1)
/// partial derivatives with respect to every node (fixed ones included).
double evaluate_action(const DiscreteAction& action, const Trajectory& curve,
                       Eigen::MatrixXd* grad = nullptr);

/// u_i(t) along the curve with u(0) = a, i.e.
/// sum_j b_ij(t) a_j + quadrature of the weighted Lagrangian.
double discretized_action(int index, const Trajectory& curve, const CouplingMatrix& a,
                          const LagrangianSet& lagrangians, const Vector& boundary);

/// Gradient of discretized_action with respect to interior nodes:
/// dim x (N-1), column k-1 belongs to node k.
Eigen::MatrixXd action_gradient(int index, const Trajectory& curve, const CouplingMatrix& a,
                                const LagrangianSet& lagrangians, const Vector& boundary);

struct MinimizeOptions {
    LbfgsOptions optimizer;
    /// Perturbed restarts after a non-converged first attempt.
    int retries = 1;
    /// Extra perturbed starts used only to detect multiple minimizers.
    int extra_starts = 0;
    /// Relative size of start perturbations.
    double perturbation = 0.1;
    std::uint64_t seed = 0x5eed;
};

struct ActionMinimum {
    Trajectory curve;
    double value = 0.0;
    LbfgsReport report;
    bool multiple_minimizers = false;
};

/// Minimizes the functional over its free nodes, starting from `initial`.
/// Throws ConvergenceError when no attempt reaches the gradient tolerance.
ActionMinimum minimize_action(const DiscreteAction& action, const Trajectory& initial,
                              const MinimizeOptions& options = {});

struct FundamentalSolutionResult {
    /// h_i (initial condition) or its terminal counterpart.
    double value = 0.0;
    Trajectory minimizer;
    CaratheodoryState state;
    int iterations = 0;
    double gradient_norm = 0.0;
    std::vector<double> action_history;
    bool multiple_minimizers = false;
};

struct FundamentalOptions {
    int segments = 200;
    MinimizeOptions minimize;
};

/// h_i(L - A u, t, start, end, a): curve from start (s = 0) to end (s = t),
/// u(0) = a. value = u_i(t) - a_i.
FundamentalSolutionResult minimize_fundamental(int index, double horizon, const Vec& start,
                                               const Vec& end, const Vector& boundary,
                                               const CouplingMatrix& a,
                                               const LagrangianSet& lagrangians,
                                               const FundamentalOptions& options = {});

/// Terminal counterpart (u(t) = a) computed through the reversed system:
/// reversed Lagrangians, coupling -A, swapped endpoints, initial data -a.
/// value = a_i - u_i(0).
FundamentalSolutionResult minimize_fundamental_terminal(int index, double horizon,
                                                        const Vec& start, const Vec& end,
                                                        const Vector& boundary,
                                                        const CouplingMatrix& a,
                                                        const LagrangianSet& lagrangians,
                                                        const FundamentalOptions& options = {});

/// Same quantity minimized directly with terminal weights, no reversal.
FundamentalSolutionResult minimize_fundamental_terminal_direct(
    int index, double horizon, const Vec& start, const Vec& end, const Vector& boundary,
    const CouplingMatrix& a, const LagrangianSet& lagrangians,
    const FundamentalOptions& options = {});

/// Euler-Lagrange residual of the weighted Lagrangian sum_j d_ij(s) L^j:
///   sup_k |(d/ds) sum_j d_ij L^j_v - sum_j d_ij L^j_x| / sum_j |d_ij(s_k)|
/// over interior nodes. Momenta are taken on segments, with d averaged over
/// the segment, and differenced across each node; forces are averaged over
/// the two adjacent segments. For m = 1,
/// or identical Lagrangians with zero row sums, the bracket reduces to
///   (d/ds) L^i_v - L^i_x + sum_j a_ij L^j_v.
double el_residual(int index, const Trajectory& curve, const CouplingMatrix& a,
                   const LagrangianSet& lagrangians);

/// The unweighted expression (d/ds) L^i_v - L^i_x + sum_j a_ij L^j_v with the
/// same differencing. Only a valid optimality test in the reduced cases above;
/// kept as a diagnostic.
double herglotz_form_residual(int index, const Trajectory& curve, const CouplingMatrix& a,
                              const LagrangianSet& lagrangians);

/// CSV rows `s,x1..xd,u1..um,action` with action(s) = u_i(s) - u_i(0).
void write_minimizer_csv(std::ostream& out, const FundamentalSolutionResult& result, int index);

}  // namespace hjweave
