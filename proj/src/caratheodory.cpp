#include "hjweave/caratheodory.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "hjweave/csv.hpp"
#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

void check_system(const CouplingMatrix& a, const LagrangianSet& lagrangians,
                  const Trajectory& curve, const Vector& boundary) {
    const int dim = common_dimension(lagrangians);
    if (static_cast<int>(lagrangians.size()) != a.size()) {
        std::ostringstream msg;
        msg << "coupling is " << a.size() << "x" << a.size() << " but " << lagrangians.size()
            << " lagrangians were given";
        throw InvalidInputError(msg.str());
    }
    if (boundary.size() != a.size()) {
        std::ostringstream msg;
        msg << "boundary vector has " << boundary.size() << " entries, coupling size is "
            << a.size();
        throw InvalidInputError(msg.str());
    }
    if (curve.dim() != dim) {
        std::ostringstream msg;
        msg << "curve dimension " << curve.dim() << " differs from lagrangian dimension " << dim;
        throw InvalidInputError(msg.str());
    }
}

template <class F>
Vector rk4_step(const F& f, const Vector& u, double h) {
    const Vector k1 = f(u);
    const Vector k2 = f(u + 0.5 * h * k1);
    const Vector k3 = f(u + 0.5 * h * k2);
    const Vector k4 = f(u + h * k3);
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Matrix segment_forcing(const LagrangianSet& lagrangians, const Trajectory& curve) {
    const int m = static_cast<int>(lagrangians.size());
    Matrix ell(m, curve.segments());
    for (int l = 0; l < curve.segments(); ++l) {
        const Vec x = curve.midpoint(l);
        const Vec v = curve.velocity(l);
        for (int j = 0; j < m; ++j) ell(j, l) = lagrangians[j]->value(x, v);
    }
    return ell;
}

SegmentMap segment_map(const CouplingMatrix& a, double step) {
    const Matrix scaled = -a.entries() * step;
    return {expm(scaled), step * phi1(scaled)};
}

CaratheodoryState integrate_linear(const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                   const Trajectory& curve, const Vector& boundary,
                                   BoundaryMode mode) {
    check_system(a, lagrangians, curve, boundary);
    const int n = curve.segments();
    const Matrix ell = segment_forcing(lagrangians, curve);
    const SegmentMap map = segment_map(a, curve.step());

    CaratheodoryState state{mode, curve.horizon(), Matrix(a.size(), n + 1)};
    if (mode == BoundaryMode::initial) {
        state.u.col(0) = boundary;
        for (int l = 0; l < n; ++l)
            state.u.col(l + 1) = map.decay * state.u.col(l) + map.gain * ell.col(l);
    } else {
        const Matrix growth = expm(a.entries() * curve.step());
        state.u.col(n) = boundary;
        for (int l = n - 1; l >= 0; --l)
            state.u.col(l) = growth * (state.u.col(l + 1) - map.gain * ell.col(l));
    }
    return state;
}

CaratheodoryState integrate_linear_rk4(const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                       const Trajectory& curve, const Vector& boundary,
                                       BoundaryMode mode, int substeps) {
    check_system(a, lagrangians, curve, boundary);
    if (substeps < 1) throw InvalidInputError("integrate_linear_rk4: substeps must be >= 1");
    const int n = curve.segments();
    const Matrix ell = segment_forcing(lagrangians, curve);
    const double h = curve.step() / substeps;
    const Matrix& am = a.entries();

    CaratheodoryState state{mode, curve.horizon(), Matrix(a.size(), n + 1)};
    if (mode == BoundaryMode::initial) {
        state.u.col(0) = boundary;
        for (int l = 0; l < n; ++l) {
            const Vector forcing = ell.col(l);
            auto f = [&](const Vector& u) -> Vector { return forcing - am * u; };
            Vector u = state.u.col(l);
            for (int k = 0; k < substeps; ++k) u = rk4_step(f, u, h);
            state.u.col(l + 1) = u;
        }
    } else {
        state.u.col(n) = boundary;
        for (int l = n - 1; l >= 0; --l) {
            const Vector forcing = ell.col(l);
            auto f = [&](const Vector& u) -> Vector { return forcing - am * u; };
            Vector u = state.u.col(l + 1);
            for (int k = 0; k < substeps; ++k) u = rk4_step(f, u, -h);
            state.u.col(l) = u;
        }
    }
    return state;
}

GeneralCoupledLagrangian linear_coupling(LagrangianPtr lagrangian, const CouplingMatrix& a,
                                         int row) {
    if (row < 0 || row >= a.size()) throw InvalidInputError("linear_coupling: row out of range");
    const Vector coupling_row = a.entries().row(row).transpose();
    GeneralCoupledLagrangian g;
    g.value = [lagrangian, coupling_row](const Vec& x, const Vec& v, const Vector& u) {
        return lagrangian->value(x, v) - coupling_row.dot(u);
    };
    g.grad_u = [coupling_row](const Vec&, const Vec&, const Vector&) -> Vector {
        return -coupling_row;
    };
    g.coupling_bound = coupling_row.cwiseAbs().maxCoeff();
    return g;
}

CaratheodoryState integrate_general_fixed(const std::vector<GeneralCoupledLagrangian>& system,
                                          const std::vector<Trajectory>& curves,
                                          const Vector& initial, int substeps) {
    const int m = static_cast<int>(system.size());
    if (m == 0) throw InvalidInputError("integrate_general: empty system");
    if (static_cast<int>(curves.size()) != m || initial.size() != m)
        throw InvalidInputError("integrate_general: need one curve and one initial value per equation");
    if (substeps < 1) throw InvalidInputError("integrate_general: substeps must be >= 1");
    const int n = curves.front().segments();
    const double horizon = curves.front().horizon();
    for (const auto& c : curves) {
        if (c.segments() != n || std::abs(c.horizon() - horizon) > 1e-14 * horizon)
            throw InvalidInputError("integrate_general: curves must share horizon and node count");
    }
    for (const auto& g : system)
        if (!g.value) throw InvalidInputError("integrate_general: missing value callable");

    const double h = curves.front().step() / substeps;
    CaratheodoryState state{BoundaryMode::initial, horizon, Matrix(m, n + 1)};
    state.u.col(0) = initial;
    std::vector<Vec> xs(m), vs(m);
    for (int l = 0; l < n; ++l) {
        for (int i = 0; i < m; ++i) {
            xs[i] = curves[i].midpoint(l);
            vs[i] = curves[i].velocity(l);
        }
        auto f = [&](const Vector& u) -> Vector {
            Vector du(m);
            for (int i = 0; i < m; ++i) du(i) = system[i].value(xs[i], vs[i], u);
            return du;
        };
        Vector u = state.u.col(l);
        for (int k = 0; k < substeps; ++k) u = rk4_step(f, u, h);
        if (!u.allFinite()) throw AccuracyError("integrate_general: solution is not finite");
        state.u.col(l + 1) = u;
    }
    return state;
}

CaratheodoryState integrate_general(const std::vector<GeneralCoupledLagrangian>& system,
                                    const std::vector<Trajectory>& curves, const Vector& initial,
                                    const GeneralIntegrationOptions& options) {
    int substeps = std::max(1, options.substeps);
    CaratheodoryState coarse = integrate_general_fixed(system, curves, initial, substeps);
    for (int halving = 0; halving <= options.max_halvings; ++halving) {
        CaratheodoryState fine = integrate_general_fixed(system, curves, initial, 2 * substeps);
        const double scale = 1.0 + fine.u.cwiseAbs().maxCoeff();
        const double error = (fine.u - coarse.u).cwiseAbs().maxCoeff();
        if (error <= options.tolerance * scale) return fine;
        coarse = std::move(fine);
        substeps *= 2;
    }
    std::ostringstream msg;
    msg << "integrate_general: step-halving estimate above tolerance after " << options.max_halvings
        << " halvings";
    throw AccuracyError(msg.str());
}

void write_state_csv(std::ostream& out, const CaratheodoryState& state) {
    out << "s";
    for (int i = 0; i < state.size(); ++i) out << ",u" << (i + 1);
    out << "\n";
    for (int k = 0; k <= state.segments(); ++k) {
        out << csv::format(state.time(k));
        for (int i = 0; i < state.size(); ++i) out << "," << csv::format(state.u(i, k));
        out << "\n";
    }
}

}  // namespace hjweave
