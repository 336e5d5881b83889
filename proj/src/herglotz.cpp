#include "hjweave/herglotz.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "hjweave/csv.hpp"
#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

void check_problem(int index, double horizon, const Vector& boundary, const CouplingMatrix& a,
                   const LagrangianSet& lagrangians) {
    common_dimension(lagrangians);
    if (static_cast<int>(lagrangians.size()) != a.size())
        throw InvalidInputError("number of lagrangians differs from the coupling size");
    if (index < 0 || index >= a.size()) {
        std::ostringstream msg;
        msg << "equation index " << index << " outside [0, " << a.size() << ")";
        throw InvalidInputError(msg.str());
    }
    if (boundary.size() != a.size())
        throw InvalidInputError("boundary vector length differs from the coupling size");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw DomainError("horizon must be a finite t > 0");
}

void check_curve(const Trajectory& curve, const LagrangianSet& lagrangians) {
    if (curve.dim() != common_dimension(lagrangians))
        throw InvalidInputError("curve dimension differs from the lagrangian dimension");
}

DiscreteAction forward_action(int index, double horizon, int segments, const Vector& boundary,
                              const CouplingMatrix& a, const LagrangianSet& lagrangians) {
    DiscreteAction action;
    action.lagrangians = lagrangians;
    action.weights = forward_weights(index, a, horizon, segments);
    action.constant = matrix_exponential(a, -horizon).row(index).dot(boundary);
    return action;
}

// Block-tridiagonal model of the kinetic Hessian over the free nodes,
// factored by block Cholesky.
class ChainPreconditioner {
public:
    ChainPreconditioner(const DiscreteAction& action, Trajectory curve, int first, int last)
        : action_(action), curve_(std::move(curve)), first_(first), last_(last) {}

    void rebuild(const Eigen::VectorXd& x) {
        const int dim = curve_.dim();
        const int n = curve_.segments();
        ok_ = true;
        for (int k = first_; k <= last_; ++k)
            curve_.set_node(k, x.segment((k - first_) * dim, dim));
        const double h = curve_.step();
        kinetic_.assign(n, Mat::Zero(dim, dim));
        for (int l = 0; l < n; ++l) {
            const Vec mid = curve_.midpoint(l);
            const Vec vel = curve_.velocity(l);
            Mat block = Mat::Zero(dim, dim);
            for (std::size_t j = 0; j < action_.lagrangians.size(); ++j) {
                const double w = action_.weights(static_cast<Eigen::Index>(j), l);
                if (w != 0.0) block += w * action_.lagrangians[j]->jet(mid, vel).hess_vv;
            }
            block = 0.5 * (block + block.transpose()) / (h * h);
            Eigen::LLT<Mat> check(block);
            if (check.info() != Eigen::Success) {
                const double scale = std::max(std::abs(block.trace()) / dim, 1e-12);
                block = scale * Mat::Identity(dim, dim);
            }
            kinetic_[l] = block;
        }
        double largest = 0.0;
        for (const auto& k : kinetic_) largest = std::max(largest, k.diagonal().maxCoeff());
        const double shift = 1e-12 * std::max(largest, 1.0);

        factors_.clear();
        for (int k = first_; k <= last_; ++k) {
            Mat diag = shift * Mat::Identity(dim, dim);
            if (k >= 1) diag += kinetic_[k - 1];
            if (k <= n - 1) diag += kinetic_[k];
            if (k > first_) {
                const Mat& off = kinetic_[k - 1];
                diag -= off * factors_.back().solve(off);
            }
            factors_.emplace_back(diag);
            ok_ = ok_ && factors_.back().info() == Eigen::Success;
        }
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& q) const {
        if (!ok_ || factors_.empty()) return q;
        const int dim = curve_.dim();
        const int count = last_ - first_ + 1;
        std::vector<Vec> y(count);
        for (int r = 0; r < count; ++r) {
            y[r] = q.segment(r * dim, dim);
            if (r > 0) y[r] += kinetic_[first_ + r - 1] * factors_[r - 1].solve(y[r - 1]);
        }
        Eigen::VectorXd z(q.size());
        Vec next;
        for (int r = count - 1; r >= 0; --r) {
            Vec rhs = y[r];
            if (r < count - 1) rhs += kinetic_[first_ + r] * next;
            next = factors_[r].solve(rhs);
            z.segment(r * dim, dim) = next;
        }
        return z;
    }

private:
    const DiscreteAction& action_;
    Trajectory curve_;
    int first_;
    int last_;
    std::vector<Mat> kinetic_;
    std::vector<Eigen::LLT<Mat>> factors_;
    bool ok_ = true;
};

struct Attempt {
    Trajectory curve;
    LbfgsReport report;
};

Attempt run_attempt(const DiscreteAction& action, Trajectory curve, const LbfgsOptions& options) {
    const int dim = curve.dim();
    const int n = curve.segments();
    const int first = action.start_cost ? 0 : 1;
    const int last = action.end_cost ? n : n - 1;
    const int count = last - first + 1;
    if (count <= 0) {
        LbfgsReport report;
        report.converged = true;
        report.value = evaluate_action(action, curve);
        report.history.push_back(report.value);
        return {std::move(curve), report};
    }

    Eigen::VectorXd x(count * dim);
    for (int k = first; k <= last; ++k) x.segment((k - first) * dim, dim) = curve.node(k);

    Trajectory work = curve;
    Eigen::MatrixXd full_grad;
    Objective objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
        for (int k = first; k <= last; ++k) work.set_node(k, z.segment((k - first) * dim, dim));
        const double value = evaluate_action(action, work, &full_grad);
        grad.resize(z.size());
        for (int k = first; k <= last; ++k)
            grad.segment((k - first) * dim, dim) = full_grad.col(k);
        return value;
    };

    ChainPreconditioner chain(action, curve, first, last);
    Preconditioner pre;
    pre.rebuild = [&](const Eigen::VectorXd& z) { chain.rebuild(z); };
    pre.apply = [&](const Eigen::VectorXd& q) { return chain.apply(q); };

    LbfgsReport report = lbfgs(objective, x, options, &pre);
    for (int k = first; k <= last; ++k) curve.set_node(k, x.segment((k - first) * dim, dim));
    return {std::move(curve), std::move(report)};
}

Trajectory perturbed(const Trajectory& base, const DiscreteAction& action, double size,
                     std::mt19937_64& rng) {
    Trajectory out = base;
    const int n = base.segments();
    const double spread = (base.end() - base.start()).norm();
    const double amplitude = size * std::max(1.0, spread);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int first = action.start_cost ? 0 : 1;
    const int last = action.end_cost ? n : n - 1;
    Vec kick(base.dim());
    for (int d = 0; d < base.dim(); ++d) kick(d) = normal(rng);
    for (int k = first; k <= last; ++k) {
        const double bump = (action.start_cost || action.end_cost)
                                ? 1.0
                                : std::sin(M_PI * static_cast<double>(k) / n);
        out.set_node(k, base.node(k) + amplitude * bump * kick);
    }
    return out;
}

std::string describe(const LbfgsReport& report) {
    std::ostringstream msg;
    msg << "action minimization did not converge: " << report.message << " after "
        << report.iterations << " iterations, |grad|_inf = " << report.gradient_norm
        << ", value = " << report.value;
    return msg.str();
}

// Momenta P_l and forces F_l per segment for the given per-segment weights,
// differenced into a per-node residual.
template <class WeightFn, class ExtraFn>
double node_residual(const Trajectory& curve, const LagrangianSet& lagrangians,
                     const WeightFn& segment_weights, const ExtraFn& extra_and_norm) {
    const int n = curve.segments();
    if (n < 3) throw InvalidInputError("residual needs at least 3 segments");
    const int m = static_cast<int>(lagrangians.size());
    const double h = curve.step();
    std::vector<Vec> momentum(n), force(n);
    std::vector<std::vector<Vec>> partial(n, std::vector<Vec>(m));
    for (int l = 0; l < n; ++l) {
        const Vec mid = curve.midpoint(l);
        const Vec vel = curve.velocity(l);
        const Vector w = segment_weights(l);
        momentum[l] = Vec::Zero(curve.dim());
        force[l] = Vec::Zero(curve.dim());
        for (int j = 0; j < m; ++j) {
            const LagrangianJet jet = lagrangians[j]->jet(mid, vel);
            partial[l][j] = jet.grad_v;
            momentum[l] += w(j) * jet.grad_v;
            force[l] += w(j) * jet.grad_x;
        }
    }
    double worst = 0.0;
    for (int k = 1; k < n; ++k) {
        Vec r = (momentum[k] - momentum[k - 1]) / h - 0.5 * (force[k - 1] + force[k]);
        const double scale = extra_and_norm(k, partial, r);
        worst = std::max(worst, r.norm() / scale);
    }
    return worst;
}

}  // namespace

Matrix forward_weights(int index, const CouplingMatrix& a, double horizon, int segments) {
    if (segments < 1) throw InvalidInputError("need at least one segment");
    const double h = horizon / segments;
    const Matrix scaled = -a.entries() * h;
    const Matrix decay = expm(scaled);
    const Matrix gain = h * phi1(scaled);
    Matrix weights(a.size(), segments);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Unit(a.size(), index);
    for (int l = segments - 1; l >= 0; --l) {
        weights.col(l) = (row * gain).transpose();
        row = row * decay;
    }
    return weights;
}

Matrix terminal_weights(int index, const CouplingMatrix& a, double horizon, int segments) {
    if (segments < 1) throw InvalidInputError("need at least one segment");
    const double h = horizon / segments;
    const Matrix scaled = a.entries() * h;
    const Matrix growth = expm(scaled);
    const Matrix gain = h * phi1(scaled);
    Matrix weights(a.size(), segments);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Unit(a.size(), index);
    for (int l = 0; l < segments; ++l) {
        weights.col(l) = (row * gain).transpose();
        row = row * growth;
    }
    return weights;
}

double evaluate_action(const DiscreteAction& action, const Trajectory& curve,
                       Eigen::MatrixXd* grad) {
    const int n = curve.segments();
    const int dim = curve.dim();
    const int m = static_cast<int>(action.lagrangians.size());
    if (action.weights.rows() != m || action.weights.cols() != n)
        throw InvalidInputError("action weights do not match the curve");
    const double h = curve.step();
    // Compensated (Neumaier) sum keeps the value accurate to a few ulps, which
    // the line search relies on near convergence.
    double total = action.constant, carry = 0.0;
    const auto add = [&](double term) {
        const double next = total + term;
        carry += std::abs(total) >= std::abs(term) ? (total - next) + term : (term - next) + total;
        total = next;
    };
    if (grad) grad->setZero(dim, n + 1);

    for (int l = 0; l < n; ++l) {
        const Vec mid = curve.midpoint(l);
        const Vec vel = curve.velocity(l);
        if (!grad) {
            for (int j = 0; j < m; ++j) {
                const double w = action.weights(j, l);
                if (w != 0.0) add(w * action.lagrangians[j]->value(mid, vel));
            }
            continue;
        }
        Vec gx = Vec::Zero(dim);
        Vec gv = Vec::Zero(dim);
        for (int j = 0; j < m; ++j) {
            const double w = action.weights(j, l);
            if (w == 0.0) continue;
            const LagrangianJet jet = action.lagrangians[j]->jet(mid, vel);
            add(w * jet.value);
            gx += w * jet.grad_x;
            gv += w * jet.grad_v;
        }
        grad->col(l) += 0.5 * gx - gv / h;
        grad->col(l + 1) += 0.5 * gx + gv / h;
    }

    if (action.start_cost) {
        Vec g(dim);
        add(action.start_cost(curve.start(), grad ? &g : nullptr));
        if (grad) grad->col(0) += g;
    }
    if (action.end_cost) {
        Vec g(dim);
        add(action.end_cost(curve.end(), grad ? &g : nullptr));
        if (grad) grad->col(n) += g;
    }
    return total + carry;
}

double discretized_action(int index, const Trajectory& curve, const CouplingMatrix& a,
                          const LagrangianSet& lagrangians, const Vector& boundary) {
    check_problem(index, curve.horizon(), boundary, a, lagrangians);
    check_curve(curve, lagrangians);
    const DiscreteAction action =
        forward_action(index, curve.horizon(), curve.segments(), boundary, a, lagrangians);
    return evaluate_action(action, curve);
}

Eigen::MatrixXd action_gradient(int index, const Trajectory& curve, const CouplingMatrix& a,
                                const LagrangianSet& lagrangians, const Vector& boundary) {
    check_problem(index, curve.horizon(), boundary, a, lagrangians);
    check_curve(curve, lagrangians);
    const DiscreteAction action =
        forward_action(index, curve.horizon(), curve.segments(), boundary, a, lagrangians);
    Eigen::MatrixXd grad;
    evaluate_action(action, curve, &grad);
    return grad.middleCols(1, curve.segments() - 1);
}

ActionMinimum minimize_action(const DiscreteAction& action, const Trajectory& initial,
                              const MinimizeOptions& options) {
    std::mt19937_64 rng(options.seed);
    Attempt best = run_attempt(action, initial, options.optimizer);
    for (int r = 0; r < options.retries && !best.report.converged; ++r) {
        Attempt retry = run_attempt(action, perturbed(initial, action, options.perturbation, rng),
                                    options.optimizer);
        if (retry.report.converged || retry.report.value < best.report.value)
            best = std::move(retry);
    }
    if (!best.report.converged) throw ConvergenceError(describe(best.report));

    ActionMinimum out{best.curve, best.report.value, best.report, false};
    for (int s = 0; s < options.extra_starts; ++s) {
        Attempt other = run_attempt(action, perturbed(initial, action, options.perturbation, rng),
                                    options.optimizer);
        if (!other.report.converged) continue;
        const double gap = (other.curve.nodes() - out.curve.nodes()).cwiseAbs().maxCoeff();
        if (std::abs(other.report.value - out.value) <= 1e-6) {
            if (gap > 1e-3) out.multiple_minimizers = true;
        } else if (other.report.value < out.value) {
            out.curve = other.curve;
            out.value = other.report.value;
            out.report = other.report;
        }
    }
    return out;
}

FundamentalSolutionResult minimize_fundamental(int index, double horizon, const Vec& start,
                                               const Vec& end, const Vector& boundary,
                                               const CouplingMatrix& a,
                                               const LagrangianSet& lagrangians,
                                               const FundamentalOptions& options) {
    check_problem(index, horizon, boundary, a, lagrangians);
    const int dim = common_dimension(lagrangians);
    if (start.size() != dim || end.size() != dim)
        throw InvalidInputError("endpoint dimension differs from the lagrangian dimension");
    const DiscreteAction action =
        forward_action(index, horizon, options.segments, boundary, a, lagrangians);
    const ActionMinimum best = minimize_action(
        action, Trajectory::straight_line(start, end, horizon, options.segments), options.minimize);

    FundamentalSolutionResult result{0.0, best.curve, {}, best.report.iterations,
                                     best.report.gradient_norm, best.report.history,
                                     best.multiple_minimizers};
    result.state = integrate_linear(a, lagrangians, best.curve, boundary, BoundaryMode::initial);
    result.value = result.state.u(index, options.segments) - boundary(index);
    return result;
}

FundamentalSolutionResult minimize_fundamental_terminal(int index, double horizon,
                                                        const Vec& start, const Vec& end,
                                                        const Vector& boundary,
                                                        const CouplingMatrix& a,
                                                        const LagrangianSet& lagrangians,
                                                        const FundamentalOptions& options) {
    FundamentalSolutionResult mirror = minimize_fundamental(
        index, horizon, end, start, -boundary, a.negated(), reversed(lagrangians), options);
    FundamentalSolutionResult result = mirror;
    result.minimizer = mirror.minimizer.reversed();
    result.state.mode = BoundaryMode::terminal;
    result.state.u = -mirror.state.u.rowwise().reverse();
    return result;
}

FundamentalSolutionResult minimize_fundamental_terminal_direct(
    int index, double horizon, const Vec& start, const Vec& end, const Vector& boundary,
    const CouplingMatrix& a, const LagrangianSet& lagrangians, const FundamentalOptions& options) {
    check_problem(index, horizon, boundary, a, lagrangians);
    const int dim = common_dimension(lagrangians);
    if (start.size() != dim || end.size() != dim)
        throw InvalidInputError("endpoint dimension differs from the lagrangian dimension");
    DiscreteAction action;
    action.lagrangians = lagrangians;
    action.weights = terminal_weights(index, a, horizon, options.segments);
    action.constant = boundary(index) - matrix_exponential(a, horizon).row(index).dot(boundary);
    const ActionMinimum best = minimize_action(
        action, Trajectory::straight_line(start, end, horizon, options.segments), options.minimize);

    FundamentalSolutionResult result{0.0, best.curve, {}, best.report.iterations,
                                     best.report.gradient_norm, best.report.history,
                                     best.multiple_minimizers};
    result.state = integrate_linear(a, lagrangians, best.curve, boundary, BoundaryMode::terminal);
    result.value = boundary(index) - result.state.u(index, 0);
    return result;
}

double el_residual(int index, const Trajectory& curve, const CouplingMatrix& a,
                   const LagrangianSet& lagrangians) {
    check_problem(index, curve.horizon(), Vector::Zero(a.size()), a, lagrangians);
    check_curve(curve, lagrangians);
    const Propagator prop(a, curve.horizon());
    const double h = curve.step();
    // Segment average of d(s): d(s_{l+1}) phi_1(-A h).
    const Matrix average = phi1(-a.entries() * h);
    auto weights = [&](int l) -> Vector {
        return (prop.d((l + 1) * h).row(index) * average).transpose();
    };
    auto norm = [&](int k, const std::vector<std::vector<Vec>>&, Vec&) {
        return prop.d(k * h).row(index).cwiseAbs().sum();
    };
    return node_residual(curve, lagrangians, weights, norm);
}

double herglotz_form_residual(int index, const Trajectory& curve, const CouplingMatrix& a,
                              const LagrangianSet& lagrangians) {
    check_problem(index, curve.horizon(), Vector::Zero(a.size()), a, lagrangians);
    check_curve(curve, lagrangians);
    const int m = a.size();
    auto weights = [&](int) -> Vector { return Vector::Unit(m, index); };
    auto coupling = [&](int k, const std::vector<std::vector<Vec>>& partial, Vec& r) {
        for (int j = 0; j < m; ++j) r += 0.5 * a(index, j) * (partial[k - 1][j] + partial[k][j]);
        return 1.0;
    };
    return node_residual(curve, lagrangians, weights, coupling);
}

void write_minimizer_csv(std::ostream& out, const FundamentalSolutionResult& result, int index) {
    const Trajectory& curve = result.minimizer;
    const CaratheodoryState& state = result.state;
    out << "s";
    for (int d = 0; d < curve.dim(); ++d) out << ",x" << (d + 1);
    for (int j = 0; j < state.size(); ++j) out << ",u" << (j + 1);
    out << ",action\n";
    for (int k = 0; k <= curve.segments(); ++k) {
        out << csv::format(curve.time(k));
        for (int d = 0; d < curve.dim(); ++d) out << "," << csv::format(curve.nodes()(d, k));
        for (int j = 0; j < state.size(); ++j) out << "," << csv::format(state.u(j, k));
        out << "," << csv::format(state.u(index, k) - state.u(index, 0)) << "\n";
    }
}

}  // namespace hjweave
