#pragma once

#include <optional>
#include <string>

#include "hjweave/coupling.hpp"
#include "hjweave/field.hpp"
#include "hjweave/herglotz.hpp"
#include "hjweave/lagrangian.hpp"
#include "hjweave/trajectory.hpp"

namespace hjweave {

struct SearchBox {
    Vec lo;
    Vec hi;
};

struct BolzaOptions {
    /// Segments of the refined minimizer.
    int segments = 200;
    /// Scan points per axis of the coarse endpoint search.
    int scan_points = 33;
    /// Segments used for each scan evaluation.
    int scan_segments = 16;
    /// Endpoint search box; x +/- default_half_width when unset.
    std::optional<SearchBox> search_box;
    double default_half_width = 2.0;
    MinimizeOptions minimize;
};

struct BolzaResult {
    double value = 0.0;
    /// Free endpoint z* of the minimizing curve.
    Vec endpoint;
    Trajectory minimizer{1.0, Eigen::MatrixXd::Zero(1, 2)};
    bool multiple_minimizers = false;
    bool widened = false;
    int iterations = 0;
};

/// u^i(t, x) = min_z  sum_j b_ij(t) phi_j(z) + A^i_{0,t}(z, x), where A^i is
/// the weighted action of curves from z to x. Coarse scan of z over the
/// search box, then joint quasi-Newton refinement of the curve and z. The box
/// is doubled once when z* lands on its boundary; SearchBoxError after that.
BolzaResult bolza_value(int index, double horizon, const Vec& x, const InitialData& data,
                        const CouplingMatrix& a, const LagrangianSet& lagrangians,
                        const BolzaOptions& options = {});

/// Positive-type value sup_y { phi_i(y) - h-breve_i(t, x, y, phi(y)) } over
/// curves from x (s = 0) to y (s = t) with terminal data phi(y), minimized
/// directly with terminal weights. `endpoint` is y*, `minimizer` runs x -> y*.
BolzaResult positive_value_direct(int index, double horizon, const Vec& x,
                                  const InitialData& data, const CouplingMatrix& a,
                                  const LagrangianSet& lagrangians,
                                  const BolzaOptions& options = {});

/// Same value through the reversed system:
///   -bolza_value(reversed L, -A, -phi), minimizer mapped back by s -> t - s.
BolzaResult positive_value_reversal(int index, double horizon, const Vec& x,
                                    const InitialData& data, const CouplingMatrix& a,
                                    const LagrangianSet& lagrangians,
                                    const BolzaOptions& options = {});

struct EvolveOptions {
    BolzaOptions bolza;
    /// Box dilation for the default search box.
    double box_dilation = 2.0;
    /// Nodes re-evaluated through the second formulation (evenly spread).
    int crosscheck_nodes = 5;
    /// Worker threads; 0 reads HJWEAVE_THREADS, falling back to the hardware count.
    int threads = 0;
};

/// Number of worker threads for a requested count (see EvolveOptions::threads).
int resolve_threads(int requested);

/// Negative-type evolution T_t phi on every grid node and component.
/// Nodes listed by crosscheck_nodes are recomputed as
///   phi_i(z*) + h_i(t, z*, x, phi(z*))
/// and the largest difference is stored in crosscheck_defect.
ValueField evolve_field(double horizon, const InitialData& data, const CouplingMatrix& a,
                        const LagrangianSet& lagrangians, const Grid& grid,
                        const EvolveOptions& options = {});

enum class PositiveMethod { reversal, direct };

/// Positive-type evolution T-breve_t phi.
ValueField evolve_field_positive(double horizon, const InitialData& data, const CouplingMatrix& a,
                                 const LagrangianSet& lagrangians, const Grid& grid,
                                 const EvolveOptions& options = {},
                                 PositiveMethod method = PositiveMethod::reversal);

struct DifferentiabilityResidual {
    bool skipped = false;
    std::string notice;
    double dx = 0.0;
    double dt = 0.0;
    /// dt with u^j(t, x) replaced by U^i_j, the value of component j carried
    /// along the minimizer of component i.
    double dt_along = 0.0;
    /// sum_j a_ij (U^i_j - u^j(t, x)); dt = |coupling_gap| up to discretization.
    double coupling_gap = 0.0;
};

struct DifferentiabilityOptions {
    BolzaOptions bolza;
    /// Time offset of the two extra levels used for D_t, relative to t.
    double time_step = 1e-3;
};

/// At grid node k of component i:
///   dx = |D_x u^i - L^i_v(xi(t), xi'(t))|,
///   dt = |D_t u^i + H^i(xi(t), L^i_v(xi(t), xi'(t))) + sum_j a_ij u^j(t, x)|,
/// D_x by central differences on the field, D_t by central differences of
/// bolza_value at t +/- time_step t, xi'(t) by a second-order one-sided
/// difference of the re-computed minimizer. The first-order identities
/// hold with U^i_j in place of u^j(t, x); both forms are reported. Nodes
/// with several minimizers or without an interior stencil are skipped with
/// a notice.
DifferentiabilityResidual differentiability_identities(const ValueField& field, int node, int index,
                                                       const InitialData& data,
                                                       const CouplingMatrix& a,
                                                       const LagrangianSet& lagrangians,
                                                       const DifferentiabilityOptions& options = {});

}  // namespace hjweave
