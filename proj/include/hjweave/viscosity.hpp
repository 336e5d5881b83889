#pragma once

#include <vector>

#include "hjweave/coupling.hpp"
#include "hjweave/field.hpp"
#include "hjweave/lagrangian.hpp"

namespace hjweave {

enum class BoundaryTreatment { copy, periodic };

struct SchemeConfig {
    /// One-dimensional grid. With periodic boundaries the first and last
    /// nodes are the same point.
    Grid grid{Vec::Zero(1), Vec::Ones(1), {2}};
    double cfl = 0.4;
    /// Artificial viscosity per equation; chosen from sampled |H_p| when empty.
    std::vector<double> alpha;
    BoundaryTreatment boundary = BoundaryTreatment::copy;
    double final_time = 1.0;
};

struct SchemeReport {
    int steps = 0;
    double dt = 0.0;
    std::vector<double> alpha;
    /// Gradient bound P used to sample |H_p| on [-P, P].
    double gradient_bound = 0.0;
    bool alpha_recomputed = false;
};

/// Lax-Friedrichs flux H(x, (p- + p+)/2) - alpha (p+ - p-)/2.
double lax_friedrichs_flux(const Hamiltonian& h, const Vec& x, double p_minus, double p_plus,
                           double alpha);

/// Explicit monotone scheme for D_t u^i + H^i(x, D_x u^i) + sum_j a_ij u^j = 0:
///   v_i = u_i - dt flux_i,   u <- exp(-dt A) v,
/// dt = T / ceil(T / (cfl dx / (max alpha + dx |A|_row))). The coupling factor
/// is exact on constants and entrywise non-negative for cooperative A. With
/// automatic alpha, alpha_i = 1.1 max |H^i_p| over the grid and [-P, P],
/// P = 1.1 max |D phi|; the solve restarts once with a larger P when the
/// discrete gradients leave [-P, P]. StabilityError when the flux step loses
/// monotonicity (dt alpha_i > dx, or alpha below the sampled speed) or blows up.
ValueField solve_system(const std::vector<HamiltonianPtr>& hamiltonians, const CouplingMatrix& a,
                        const InitialData& data, const SchemeConfig& config,
                        SchemeReport* report = nullptr);

/// Positive-type system -D_t u^i + H^i(x, D_x u^i) + sum_j a_ij u^j = 0 from
/// u(0) = phi, stepped forward as
///   v_i = u_i + dt [ H(x, (p- + p+)/2) + alpha (p+ - p-)/2 ],   u <- exp(dt A) v.
/// Algebraically equal to -solve_system(H(x, -p), -A, -phi).
ValueField solve_system_positive(const std::vector<HamiltonianPtr>& hamiltonians,
                                 const CouplingMatrix& a, const InitialData& data,
                                 const SchemeConfig& config, SchemeReport* report = nullptr);

struct FieldComparison {
    double linf = 0.0;
    /// Sum of |difference| times the grid cell volume, over all components.
    double l1 = 0.0;
    int component = 0;
    int node = 0;
    Vec location;
};

/// Differences of two fields on the same grid and time; ComparisonError otherwise.
FieldComparison compare(const ValueField& first, const ValueField& second);

}  // namespace hjweave
