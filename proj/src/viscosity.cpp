#include "hjweave/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

constexpr int kMomentumSamples = 41;

enum class Sense { negative, positive };

struct Setup {
    int nodes = 0;
    int unique = 0;  // nodes carrying independent values (periodic drops the last)
    double dx = 0.0;
    std::vector<double> x;
};

Setup check_inputs(const std::vector<HamiltonianPtr>& hamiltonians, const CouplingMatrix& a,
                   const InitialData& data, const SchemeConfig& config) {
    const int m = a.size();
    if (static_cast<int>(hamiltonians.size()) != m || data.size() != m)
        throw InvalidInputError("scheme: Hamiltonians, coupling and data must have one size");
    if (config.grid.dim() != 1) throw InvalidInputError("scheme: the grid must be one-dimensional");
    for (const auto& h : hamiltonians)
        if (!h || h->dim() != 1) throw InvalidInputError("scheme: every Hamiltonian must be one-dimensional");
    if (!(config.cfl > 0.0) || !std::isfinite(config.cfl))
        throw InvalidInputError("scheme: cfl must be positive");
    if (!(config.final_time >= 0.0) || !std::isfinite(config.final_time))
        throw InvalidInputError("scheme: final time must be finite and non-negative");
    if (!config.alpha.empty()) {
        if (static_cast<int>(config.alpha.size()) != m)
            throw InvalidInputError("scheme: one alpha per equation");
        for (double al : config.alpha)
            if (!(al >= 0.0) || !std::isfinite(al)) throw InvalidInputError("scheme: alpha must be non-negative");
    }
    Setup s;
    s.nodes = config.grid.size();
    s.dx = config.grid.spacing(0);
    s.unique = s.nodes;
    if (config.boundary == BoundaryTreatment::periodic) {
        if (s.nodes < 3) throw InvalidInputError("scheme: periodic grids need at least three points");
        s.unique = s.nodes - 1;
    }
    for (int k = 0; k < s.nodes; ++k) s.x.push_back(config.grid.node(k)(0));
    return s;
}

double sampled_speed(const Hamiltonian& h, const Setup& s, double bound) {
    double speed = 0.0;
    Vec x(1), p(1);
    for (int k = 0; k < s.nodes; ++k) {
        x(0) = s.x[k];
        for (int q = 0; q < kMomentumSamples; ++q) {
            p(0) = bound * (2.0 * q / (kMomentumSamples - 1) - 1.0);
            speed = std::max(speed, std::abs(h.grad_p(x, p)(0)));
        }
    }
    return speed;
}

ValueField run(Sense sense, const std::vector<HamiltonianPtr>& hamiltonians, const CouplingMatrix& a,
               const InitialData& data, const SchemeConfig& config, SchemeReport* report) {
    const Setup s = check_inputs(hamiltonians, a, data, config);
    const int m = a.size();
    const int n = s.unique;
    const bool periodic = config.boundary == BoundaryTreatment::periodic;

    Matrix initial(m, s.nodes);
    double bound = 0.0;
    Vec x(1);
    for (int k = 0; k < s.nodes; ++k) {
        x(0) = s.x[k];
        for (int i = 0; i < m; ++i) {
            initial(i, k) = data.components[i].value(x);
            bound = std::max(bound, std::abs(data.components[i].gradient(x)(0)));
        }
    }
    for (int i = 0; i < m; ++i)
        for (int k = 0; k + 1 < s.nodes; ++k)
            bound = std::max(bound, std::abs(initial(i, k + 1) - initial(i, k)) / s.dx);
    bound *= 1.1;

    const auto left = [&](int k) { return k > 0 ? k - 1 : (periodic ? n - 1 : 0); };
    const auto right = [&](int k) { return k + 1 < n ? k + 1 : (periodic ? 0 : n - 1); };

    bool recomputed = false;
    for (int attempt = 0;; ++attempt) {
        std::vector<double> alpha(m);
        for (int i = 0; i < m; ++i) {
            const double speed = sampled_speed(*hamiltonians[i], s, bound);
            if (config.alpha.empty()) {
                alpha[i] = 1.1 * speed;
            } else {
                alpha[i] = config.alpha[i];
                if (alpha[i] < speed) {
                    std::ostringstream msg;
                    msg << "scheme: alpha " << alpha[i] << " of equation " << i + 1
                        << " is below the sampled speed " << speed;
                    throw StabilityError(msg.str());
                }
            }
        }
        const double alpha_max = *std::max_element(alpha.begin(), alpha.end());
        const double denominator = std::max(alpha_max + s.dx * a.row_norm(), 1e-300);
        const double dt_max = config.cfl * s.dx / denominator;
        const int steps = config.final_time == 0.0
                              ? 0
                              : static_cast<int>(std::ceil(config.final_time / dt_max - 1e-12));
        const double dt = steps ? config.final_time / steps : 0.0;

        // The coupling acts through exp(-+dt A) after the flux step, exact on
        // constants; for cooperative A, exp(-dt A) is entrywise non-negative.
        const Matrix propagate = matrix_exponential(a, sense == Sense::negative ? -dt : dt);
        for (int i = 0; i < m; ++i) {
            const double self = dt * alpha[i] / s.dx;
            if (self > 1.0 + 1e-12) {
                std::ostringstream msg;
                msg << "scheme: step " << dt << " violates the monotonicity bound of equation " << i + 1
                    << " (self coefficient " << 1.0 - self << ")";
                throw StabilityError(msg.str());
            }
        }

        Matrix u = initial.leftCols(n);
        Matrix next(m, n);
        double observed = 0.0;
        Vec p(1);
        for (int step = 0; step < steps; ++step) {
            for (int i = 0; i < m; ++i) {
                const Hamiltonian& h = *hamiltonians[i];
                for (int k = 0; k < n; ++k) {
                    const double pm = (u(i, k) - u(i, left(k))) / s.dx;
                    const double pp = (u(i, right(k)) - u(i, k)) / s.dx;
                    observed = std::max({observed, std::abs(pm), std::abs(pp)});
                    x(0) = s.x[k];
                    p(0) = 0.5 * (pm + pp);
                    const double centered = h.value(x, p);
                    const double diffusion = 0.5 * alpha[i] * (pp - pm);
                    if (sense == Sense::negative)
                        next(i, k) = u(i, k) - dt * (centered - diffusion);
                    else
                        next(i, k) = u(i, k) + dt * (centered + diffusion);
                }
            }
            if (!next.allFinite()) {
                std::ostringstream msg;
                msg << "scheme: non-finite values at step " << step + 1;
                throw StabilityError(msg.str());
            }
            u.noalias() = propagate * next;
        }

        if (observed > bound * (1.0 + 1e-9) + 1e-12) {
            if (attempt == 0) {
                bound = 1.1 * observed;
                recomputed = true;
                continue;
            }
            std::ostringstream msg;
            msg << "scheme: discrete gradients reached " << observed
                << " after alpha was recomputed for " << bound;
            throw StabilityError(msg.str());
        }

        ValueField field{config.grid, config.final_time, Matrix(m, s.nodes), {}, {}, 0.0};
        field.values.leftCols(n) = u;
        if (periodic) field.values.col(s.nodes - 1) = u.col(0);
        field.multiple = Eigen::MatrixXi::Zero(m, s.nodes);
        if (report) {
            report->steps = steps;
            report->dt = dt;
            report->alpha = alpha;
            report->gradient_bound = bound;
            report->alpha_recomputed = recomputed;
        }
        return field;
    }
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b)); }

}  // namespace

double lax_friedrichs_flux(const Hamiltonian& h, const Vec& x, double p_minus, double p_plus,
                           double alpha) {
    Vec p(1);
    p(0) = 0.5 * (p_minus + p_plus);
    return h.value(x, p) - 0.5 * alpha * (p_plus - p_minus);
}

ValueField solve_system(const std::vector<HamiltonianPtr>& hamiltonians, const CouplingMatrix& a,
                        const InitialData& data, const SchemeConfig& config, SchemeReport* report) {
    return run(Sense::negative, hamiltonians, a, data, config, report);
}

ValueField solve_system_positive(const std::vector<HamiltonianPtr>& hamiltonians,
                                 const CouplingMatrix& a, const InitialData& data,
                                 const SchemeConfig& config, SchemeReport* report) {
    return run(Sense::positive, hamiltonians, a, data, config, report);
}

FieldComparison compare(const ValueField& first, const ValueField& second) {
    const Grid& g = first.grid;
    const Grid& h = second.grid;
    bool same = g.dim() == h.dim() && first.components() == second.components() &&
                first.values.cols() == g.size() && second.values.cols() == h.size();
    for (int d = 0; same && d < g.dim(); ++d)
        same = g.points()[d] == h.points()[d] && close(g.lo()(d), h.lo()(d)) && close(g.hi()(d), h.hi()(d));
    if (!same) throw ComparisonError("compare: fields live on different grids or have different sizes");
    if (!close(first.time, second.time)) {
        std::ostringstream msg;
        msg << "compare: fields are at different times " << first.time << " and " << second.time;
        throw ComparisonError(msg.str());
    }
    double cell = 1.0;
    for (int d = 0; d < g.dim(); ++d) cell *= g.spacing(d);

    FieldComparison out;
    for (int i = 0; i < first.components(); ++i)
        for (int k = 0; k < g.size(); ++k) {
            const double diff = std::abs(first.values(i, k) - second.values(i, k));
            out.l1 += diff * cell;
            if (diff > out.linf) {
                out.linf = diff;
                out.component = i;
                out.node = k;
            }
        }
    out.location = g.node(out.node);
    return out;
}

}  // namespace hjweave
