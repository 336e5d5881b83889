#include "hjweave/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "hjweave/csv.hpp"
#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

int check_system(const CouplingMatrix& a, const LagrangianSet& lagrangians, double horizon) {
    const int dim = common_dimension(lagrangians);
    if (static_cast<int>(lagrangians.size()) != a.size())
        throw InvalidInputError("number of lagrangians differs from the coupling size");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw DomainError("horizon must be a finite t > 0");
    return dim;
}

void check_index(int index, int m) {
    if (index < 0 || index >= m) {
        std::ostringstream msg;
        msg << "equation index " << index << " outside [0, " << m << ")";
        throw InvalidInputError(msg.str());
    }
}

void check_steps(const FlowOptions& options) {
    if (options.steps < 2) throw InvalidInputError("flow needs at least two steps");
}

void check_point(const Vec& x, int dim, const char* what) {
    if (x.size() != dim) {
        std::ostringstream msg;
        msg << what << " has dimension " << x.size() << ", expected " << dim;
        throw InvalidInputError(msg.str());
    }
    if (!x.allFinite()) throw InvalidInputError(std::string(what) + " is not finite");
}

// Jets of every L^j at (x, v) and the acceleration of the weighted
// Euler-Lagrange equation of row `index`:
//   M xi'' = sum_j w_j (L^j_x - L^j_vx v) - sum_j (dA)_ij L^j_v,  M = sum_j w_j L^j_vv.
struct Acceleration {
    std::vector<LagrangianJet> jets;
    Vec value;
};

Acceleration acceleration(int index, const Propagator& propagator, const CouplingMatrix& a,
                          const LagrangianSet& lagrangians, double s, const Vec& x, const Vec& v,
                          double singular_tolerance) {
    const Matrix d = propagator.d(std::clamp(s, 0.0, propagator.horizon()));
    const Vector w = d.row(index).transpose();
    const Vector dw = (d * a.entries()).row(index).transpose();
    const int dim = static_cast<int>(x.size());
    Acceleration out;
    Mat mass = Mat::Zero(dim, dim);
    Vec rhs = Vec::Zero(dim);
    for (std::size_t j = 0; j < lagrangians.size(); ++j) {
        out.jets.push_back(lagrangians[j]->jet(x, v));
        const LagrangianJet& jet = out.jets.back();
        const auto jj = static_cast<Eigen::Index>(j);
        mass += w(jj) * jet.hess_vv;
        rhs += w(jj) * (jet.grad_x - jet.hess_vx * v) - dw(jj) * jet.grad_v;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(mass, Eigen::EigenvaluesOnly);
    const auto magnitudes = eig.eigenvalues().cwiseAbs();
    const double lo = magnitudes.minCoeff(), hi = magnitudes.maxCoeff();
    if (!std::isfinite(hi) || !(lo > singular_tolerance * hi)) {
        std::ostringstream msg;
        msg << "weighted D^2_v L is singular at s = " << s << " (|lambda| in [" << lo << ", " << hi
            << "])";
        throw SingularityError(msg.str());
    }
    out.value = mass.ldlt().solve(rhs);
    if (!out.value.allFinite()) throw SingularityError("non-finite acceleration");
    return out;
}

template <class F>
void rk4_step(const F& rhs, double s, double h, Eigen::VectorXd& y) {
    const Eigen::VectorXd k1 = rhs(s, y);
    const Eigen::VectorXd k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(s + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct HerglotzSamples {
    Eigen::MatrixXd positions;
    Eigen::MatrixXd velocities;
};

HerglotzSamples integrate_herglotz(int index, const Vec& x0, const Vec& v0, double horizon,
                                   const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                   const FlowOptions& options) {
    const int dim = check_system(a, lagrangians, horizon);
    check_index(index, a.size());
    check_steps(options);
    check_point(x0, dim, "initial position");
    check_point(v0, dim, "initial velocity");
    const Propagator propagator(a, horizon);
    const int n = options.steps;
    const double h = horizon / n;

    auto rhs = [&](double s, const Eigen::VectorXd& y) {
        const Vec x = y.head(dim), v = y.tail(dim);
        Eigen::VectorXd out(2 * dim);
        out.head(dim) = v;
        out.tail(dim) = acceleration(index, propagator, a, lagrangians, s, x, v,
                                     options.singular_tolerance)
                            .value;
        return out;
    };

    HerglotzSamples out{Eigen::MatrixXd(dim, n + 1), Eigen::MatrixXd(dim, n + 1)};
    Eigen::VectorXd y(2 * dim);
    y << x0, v0;
    out.positions.col(0) = x0;
    out.velocities.col(0) = v0;
    for (int k = 0; k < n; ++k) {
        rk4_step(rhs, k * h, h, y);
        if (!y.allFinite()) throw SingularityError("flow left the finite range");
        out.positions.col(k + 1) = y.head(dim);
        out.velocities.col(k + 1) = y.tail(dim);
    }
    return out;
}

// Second-order differences on uniform samples.
std::vector<Vec> differentiate(const std::vector<Vec>& x, double h) {
    const std::size_t n = x.size();
    if (n < 3) throw InvalidInputError("need at least three samples to difference");
    std::vector<Vec> v(n);
    v[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h);
    for (std::size_t k = 1; k + 1 < n; ++k) v[k] = (x[k + 1] - x[k - 1]) / (2.0 * h);
    v[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * h);
    return v;
}

double velocity_defect(const std::vector<HamiltonianPtr>& hamiltonians, const Vec& x,
                       const std::vector<Vec>& momenta) {
    const Vec reference = hamiltonians[0]->grad_p(x, momenta[0]);
    double worst = 0.0;
    for (std::size_t j = 1; j < hamiltonians.size(); ++j)
        worst = std::max(worst, (hamiltonians[j]->grad_p(x, momenta[j]) - reference).norm());
    return worst;
}

Vec composite_momentum(const Vector& w, const std::vector<Vec>& momenta) {
    Vec out = Vec::Zero(momenta[0].size());
    for (std::size_t j = 0; j < momenta.size(); ++j) out += w(static_cast<Eigen::Index>(j)) * momenta[j];
    return out;
}

}  // namespace

Trajectory herglotz_flow(int index, const Vec& x0, const Vec& v0, double horizon,
                         const CouplingMatrix& a, const LagrangianSet& lagrangians,
                         const FlowOptions& options) {
    return Trajectory(horizon,
                      integrate_herglotz(index, x0, v0, horizon, a, lagrangians, options).positions);
}

Eigen::MatrixXd herglotz_flow_velocities(int index, const Vec& x0, const Vec& v0, double horizon,
                                         const CouplingMatrix& a,
                                         const LagrangianSet& lagrangians,
                                         const FlowOptions& options) {
    return integrate_herglotz(index, x0, v0, horizon, a, lagrangians, options).velocities;
}

LieInitialData consistent_initial_data(const LagrangianSet& lagrangians,
                                       const std::vector<Vec>& positions,
                                       const std::vector<Vec>& velocities, const Matrix& values) {
    const int dim = common_dimension(lagrangians);
    const std::size_t m = lagrangians.size();
    if (positions.size() != m || velocities.size() != m)
        throw InvalidInputError("initial data needs one position and velocity per equation");
    LieInitialData out;
    out.positions = positions;
    out.values = values;
    for (std::size_t i = 0; i < m; ++i) {
        check_point(positions[i], dim, "initial position");
        check_point(velocities[i], dim, "initial velocity");
        std::vector<Vec> row;
        for (const auto& l : lagrangians) row.push_back(l->jet(positions[i], velocities[i]).grad_v);
        out.momenta.push_back(std::move(row));
    }
    return out;
}

CharacteristicBundle lie_flow(const LieInitialData& initial, double horizon,
                              const CouplingMatrix& a, const LagrangianSet& lagrangians,
                              const FlowOptions& options) {
    const int dim = check_system(a, lagrangians, horizon);
    check_steps(options);
    const int m = a.size();
    if (static_cast<int>(initial.positions.size()) != m ||
        static_cast<int>(initial.momenta.size()) != m || initial.values.rows() != m ||
        initial.values.cols() != m)
        throw InvalidInputError("lie_flow: initial data must cover every pair (i, j)");
    for (int i = 0; i < m; ++i) {
        check_point(initial.positions[i], dim, "initial position");
        if (static_cast<int>(initial.momenta[i].size()) != m)
            throw InvalidInputError("lie_flow: initial momenta must cover every pair (i, j)");
        for (const Vec& p : initial.momenta[i]) check_point(p, dim, "initial momentum");
    }
    if (!initial.values.allFinite()) throw InvalidInputError("lie_flow: initial values not finite");

    const auto hamiltonians = make_hamiltonians(lagrangians);
    for (int i = 0; i < m; ++i) {
        const double defect = velocity_defect(hamiltonians, initial.positions[i], initial.momenta[i]);
        if (!(defect <= kLieConsistencyTolerance)) {
            std::ostringstream msg;
            msg << "lie_flow: initial momenta of curve " << i + 1
                << " do not share one velocity (defect " << defect << ")";
            throw InvalidInputError(msg.str());
        }
    }

    const Propagator propagator(a, horizon);
    const int n = options.steps;
    const double h = horizon / n;
    CharacteristicBundle bundle;
    bundle.horizon = horizon;
    bundle.lagrangians = lagrangians;
    for (int k = 0; k <= n; ++k) bundle.times.push_back(horizon * k / n);

    // State layout: xi, p^1..p^m, u^1..u^m.
    const int size = dim + m * dim + m;
    for (int i = 0; i < m; ++i) {
        auto rhs = [&](double s, const Eigen::VectorXd& y) {
            const Vec x = y.head(dim);
            std::vector<Vec> p(m);
            for (int j = 0; j < m; ++j) p[j] = y.segment(dim + j * dim, dim);
            const Eigen::VectorXd u = y.tail(m);
            const Vec v = hamiltonians[0]->grad_p(x, p[0]);
            const Acceleration acc = acceleration(i, propagator, a, lagrangians, s, x, v,
                                                  options.singular_tolerance);
            Eigen::VectorXd out(size);
            out.head(dim) = v;
            const Eigen::VectorXd coupling = a.entries() * u;
            for (int j = 0; j < m; ++j) {
                const LagrangianJet& jet = acc.jets[j];
                out.segment(dim + j * dim, dim) = jet.hess_vx * v + jet.hess_vv * acc.value;
                const Vec hp = hamiltonians[j]->grad_p(x, p[j]);
                out(dim + m * dim + j) = p[j].dot(hp) - hamiltonians[j]->value(x, p[j]) - coupling(j);
            }
            return out;
        };

        CharacteristicCurve curve;
        curve.index = i;
        curve.momenta.assign(m, {});
        curve.values.resize(m, n + 1);
        auto record = [&](int k, const Eigen::VectorXd& y) {
            const Vec x = y.head(dim);
            std::vector<Vec> p(m);
            for (int j = 0; j < m; ++j) {
                p[j] = y.segment(dim + j * dim, dim);
                curve.momenta[j].push_back(p[j]);
            }
            curve.position.push_back(x);
            curve.values.col(k) = y.tail(m);
            const Vector w = propagator.d(bundle.times[k]).row(i).transpose();
            curve.composite.push_back(composite_momentum(w, p));
            bundle.velocity_defect = std::max(bundle.velocity_defect, velocity_defect(hamiltonians, x, p));
        };

        Eigen::VectorXd y(size);
        y.head(dim) = initial.positions[i];
        for (int j = 0; j < m; ++j) y.segment(dim + j * dim, dim) = initial.momenta[i][j];
        y.tail(m) = initial.values.row(i).transpose();
        record(0, y);
        for (int k = 0; k < n; ++k) {
            rk4_step(rhs, k * h, h, y);
            if (!y.allFinite()) throw SingularityError("lie_flow left the finite range");
            record(k + 1, y);
        }
        bundle.curves.push_back(std::move(curve));
    }
    return bundle;
}

CharacteristicBundle bundle_from_minimizer(int index, const Trajectory& minimizer,
                                           const CaratheodoryState& state,
                                           const CouplingMatrix& a,
                                           const LagrangianSet& lagrangians) {
    const int dim = check_system(a, lagrangians, minimizer.horizon());
    const int m = a.size();
    check_index(index, m);
    const int n = minimizer.segments();
    if (minimizer.dim() != dim) throw InvalidInputError("minimizer dimension mismatch");
    if (state.size() != m || state.segments() != n)
        throw InvalidInputError("state does not match the minimizer");

    const auto hamiltonians = make_hamiltonians(lagrangians);
    const Propagator propagator(a, minimizer.horizon());
    CharacteristicBundle bundle;
    bundle.horizon = minimizer.horizon();
    bundle.lagrangians = lagrangians;
    CharacteristicCurve curve;
    curve.index = index;
    curve.momenta.assign(m, {});
    curve.values = state.u;
    for (int k = 0; k <= n; ++k) {
        bundle.times.push_back(minimizer.time(k));
        curve.position.push_back(minimizer.node(k));
    }
    const std::vector<Vec> velocity = differentiate(curve.position, minimizer.step());
    for (int k = 0; k <= n; ++k) {
        std::vector<Vec> p;
        for (int j = 0; j < m; ++j) {
            p.push_back(lagrangians[j]->jet(curve.position[k], velocity[k]).grad_v);
            curve.momenta[j].push_back(p.back());
        }
        const Vector w = propagator.d(bundle.times[k]).row(index).transpose();
        curve.composite.push_back(composite_momentum(w, p));
        bundle.velocity_defect =
            std::max(bundle.velocity_defect, velocity_defect(hamiltonians, curve.position[k], p));
    }
    bundle.curves.push_back(std::move(curve));
    return bundle;
}

DualArcResidual dual_arc_check(const CharacteristicBundle& bundle, const Propagator& propagator) {
    if (std::abs(propagator.horizon() - bundle.horizon) > 1e-12 * bundle.horizon)
        throw InvalidInputError("dual_arc_check: propagator horizon differs from the bundle's");
    const auto& lagrangians = bundle.lagrangians;
    const auto hamiltonians = make_hamiltonians(lagrangians);
    const std::size_t m = lagrangians.size();
    DualArcResidual out;
    if (bundle.times.size() < 3) return out;
    const double h = bundle.times[1] - bundle.times[0];
    for (const CharacteristicCurve& curve : bundle.curves) {
        const std::vector<Vec> velocity = differentiate(curve.position, h);
        for (std::size_t k = 0; k < bundle.times.size(); ++k) {
            Vector w = propagator.d(bundle.times[k]).row(curve.index).transpose();
            // exp(-A tau) is nonnegative for cooperative A; drop rounding below zero near s = t
            const double floor = -1e-13 * w.cwiseAbs().maxCoeff();
            for (Eigen::Index j = 0; j < w.size(); ++j)
                if (w(j) < 0.0 && w(j) > floor) w(j) = 0.0;
            const Vec& x = curve.position[k];
            Vec weighted = Vec::Zero(x.size());
            double hamiltonian_sum = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double wj = w(static_cast<Eigen::Index>(j));
                weighted += wj * curve.momenta[j][k];
                hamiltonian_sum += wj * hamiltonians[j]->value(x, curve.momenta[j][k]);
            }
            const Vec independent = combine_jets(lagrangians, w, x, velocity[k]).grad_v;
            out.momentum = std::max(out.momentum, (independent - weighted).norm());
            const double bold = inf_convolution(lagrangians, w, x, curve.composite[k]).value;
            out.hamiltonian = std::max(out.hamiltonian, std::abs(bold - hamiltonian_sum));
        }
    }
    return out;
}

Vec shoot(int index, double horizon, const Vec& start, const Vec& end, const CouplingMatrix& a,
          const LagrangianSet& lagrangians, const ShootOptions& options) {
    const int dim = check_system(a, lagrangians, horizon);
    check_point(end, dim, "target");
    auto endpoint = [&](const Vec& v0) -> Vec {
        const auto samples = integrate_herglotz(index, start, v0, horizon, a, lagrangians, options.flow);
        return samples.positions.col(options.flow.steps);
    };

    Vec v = (end - start) / horizon;
    Vec residual = endpoint(v) - end;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (residual.norm() <= options.tolerance) return v;
        Mat jac(dim, dim);
        const double delta = 1e-6 * (1.0 + v.norm());
        for (int c = 0; c < dim; ++c) {
            Vec plus = v, minus = v;
            plus(c) += delta;
            minus(c) -= delta;
            jac.col(c) = (endpoint(plus) - endpoint(minus)) / (2.0 * delta);
        }
        const Eigen::FullPivLU<Mat> lu(jac);
        if (!lu.isInvertible()) throw ConvergenceError("shoot: singular endpoint Jacobian");
        const Vec step = -lu.solve(residual);
        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 30 && !accepted; ++halving, lambda *= 0.5) {
            try {
                const Vec trial = v + lambda * step;
                const Vec r = endpoint(trial) - end;
                if (r.allFinite() && r.norm() < residual.norm()) {
                    v = trial;
                    residual = r;
                    accepted = true;
                }
            } catch (const SingularityError&) {
            }
        }
        if (!accepted) break;
    }
    if (residual.norm() <= options.tolerance) return v;
    std::ostringstream msg;
    msg << "shoot: endpoint miss " << residual.norm() << " after Newton iterations";
    throw ConvergenceError(msg.str());
}

void write_bundle_csv(std::ostream& out, const CharacteristicBundle& bundle) {
    out << "s";
    for (const auto& curve : bundle.curves) {
        const int i = curve.index + 1;
        const auto dim = curve.position.empty() ? 0 : curve.position[0].size();
        for (Eigen::Index d = 0; d < dim; ++d) out << ",x" << i << "_" << d + 1;
        for (std::size_t j = 0; j < curve.momenta.size(); ++j)
            for (Eigen::Index d = 0; d < dim; ++d) out << ",p" << i << "_" << j + 1 << "_" << d + 1;
        for (Eigen::Index j = 0; j < curve.values.rows(); ++j) out << ",u" << i << "_" << j + 1;
    }
    out << "\n";
    for (std::size_t k = 0; k < bundle.times.size(); ++k) {
        out << csv::format(bundle.times[k]);
        for (const auto& curve : bundle.curves) {
            for (Eigen::Index d = 0; d < curve.position[k].size(); ++d)
                out << "," << csv::format(curve.position[k](d));
            for (const auto& pj : curve.momenta)
                for (Eigen::Index d = 0; d < pj[k].size(); ++d) out << "," << csv::format(pj[k](d));
            for (Eigen::Index j = 0; j < curve.values.rows(); ++j)
                out << "," << csv::format(curve.values(j, static_cast<Eigen::Index>(k)));
        }
        out << "\n";
    }
}

}  // namespace hjweave
