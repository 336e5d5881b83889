#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "hjweave/coupling.hpp"
#include "hjweave/lagrangian.hpp"
#include "hjweave/trajectory.hpp"

namespace hjweave {

// Along a discrete curve the running cost is sampled once per segment, at the
// segment midpoint with the segment's constant velocity. Every integrator
// below (closed form, RK4, general RK4) works with that same forcing, so they
// differ only in how the u-dynamics are integrated.

enum class BoundaryMode { initial, terminal };

/// u_i(s_k) for i = 0..m-1, k = 0..N. Column k holds the m values at s_k.
struct CaratheodoryState {
    BoundaryMode mode = BoundaryMode::initial;
    double horizon = 0.0;
    Matrix u;

    int size() const { return static_cast<int>(u.rows()); }
    int segments() const { return static_cast<int>(u.cols()) - 1; }
    double time(int k) const { return horizon * k / segments(); }
    Vector at(int k) const { return u.col(k); }
    Vector final_values() const { return u.col(segments()); }
};

/// ell(j, l) = L^j(midpoint_l, velocity_l): the m x N segment forcing.
Matrix segment_forcing(const LagrangianSet& lagrangians, const Trajectory& curve);

/// Exact one-segment maps of u' = ell - A u with ell frozen on the segment:
///   forward:  u_{l+1} = decay u_l + gain ell_l,
///   decay = exp(-A h), gain = h phi_1(-A h).
struct SegmentMap {
    Matrix decay;
    Matrix gain;
};

SegmentMap segment_map(const CouplingMatrix& a, double step);

/// Closed-form (propagator) solution of u' = L(xi, xi') - A u along the curve,
/// with u(0) = a (initial mode) or u(t) = a (terminal mode).
CaratheodoryState integrate_linear(const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                   const Trajectory& curve, const Vector& boundary,
                                   BoundaryMode mode);

/// Same ODE re-integrated with classical RK4, `substeps` steps per segment.
CaratheodoryState integrate_linear_rk4(const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                       const Trajectory& curve, const Vector& boundary,
                                       BoundaryMode mode, int substeps = 1);

/// L^i(x, v, u_1..u_m) with its u-gradient and a bound K on |dL/du_j|.
struct GeneralCoupledLagrangian {
    std::function<double(const Vec& x, const Vec& v, const Vector& u)> value;
    std::function<Vector(const Vec& x, const Vec& v, const Vector& u)> grad_u;
    double coupling_bound = 0.0;
};

/// L(x, v) - sum_j a_rj u_j as a general coupled Lagrangian.
GeneralCoupledLagrangian linear_coupling(LagrangianPtr lagrangian, const CouplingMatrix& a,
                                         int row);

struct GeneralIntegrationOptions {
    /// RK4 steps per segment on the first pass.
    int substeps = 1;
    /// Number of times the step may be halved before giving up.
    int max_halvings = 6;
    /// Accept when |u_h(t) - u_{h/2}(t)|_inf <= tolerance * (1 + |u(t)|_inf).
    double tolerance = 1e-9;
};

/// Fixed-step RK4 for u_i' = G^i(xi_i, xi_i', u), u(0) = a; one curve per equation.
CaratheodoryState integrate_general_fixed(const std::vector<GeneralCoupledLagrangian>& system,
                                          const std::vector<Trajectory>& curves,
                                          const Vector& initial, int substeps);

/// Fixed-step RK4 with step-halving error control; returns the finer solution.
/// Throws AccuracyError once max_halvings is exhausted.
CaratheodoryState integrate_general(const std::vector<GeneralCoupledLagrangian>& system,
                                    const std::vector<Trajectory>& curves, const Vector& initial,
                                    const GeneralIntegrationOptions& options = {});

/// CSV rows `s,u1..um`.
void write_state_csv(std::ostream& out, const CaratheodoryState& state);

}  // namespace hjweave
