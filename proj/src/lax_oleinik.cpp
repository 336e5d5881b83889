#include "hjweave/lax_oleinik.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// min over z and curves joining z with the fixed point x of
//   coefficients . phi(z) + sum_l sum_j W(j, l) L^j(segment l).
// z is the start node when free_start, the end node otherwise.
struct EndpointProblem {
    double horizon = 0.0;
    Vec x;
    bool free_start = true;
    std::function<Matrix(int)> weights;
    Vector coefficients;
    const InitialData* data = nullptr;
    const LagrangianSet* lagrangians = nullptr;

    double cost(const Vec& z, Vec* grad) const {
        double total = 0.0;
        if (grad) grad->setZero(z.size());
        for (int j = 0; j < data->size(); ++j) {
            const double c = coefficients(j);
            if (c == 0.0) continue;
            total += c * data->components[j].value(z);
            if (grad) *grad += c * data->components[j].gradient(z);
        }
        return total;
    }

    Trajectory line(const Vec& z, int segments) const {
        return free_start ? Trajectory::straight_line(z, x, horizon, segments)
                          : Trajectory::straight_line(x, z, horizon, segments);
    }

    Vec free_node(const Trajectory& curve) const { return free_start ? curve.start() : curve.end(); }
};

struct ScanPoint {
    Vec z;
    double value = kInf;
    Trajectory curve{1.0, Eigen::MatrixXd::Zero(1, 2)};
};

Trajectory resample(const Trajectory& coarse, int segments) {
    Eigen::MatrixXd nodes(coarse.dim(), segments + 1);
    const int n = coarse.segments();
    for (int k = 0; k <= segments; ++k) {
        const double pos = static_cast<double>(k) * n / segments;
        const int l = std::min(static_cast<int>(pos), n - 1);
        const double frac = pos - l;
        nodes.col(k) = (1.0 - frac) * coarse.nodes().col(l) + frac * coarse.nodes().col(l + 1);
    }
    return Trajectory(coarse.horizon(), nodes);
}

std::vector<ScanPoint> scan(const EndpointProblem& problem, const Grid& box,
                            const BolzaOptions& options) {
    const Matrix weights = problem.weights(options.scan_segments);
    MinimizeOptions quiet = options.minimize;
    quiet.extra_starts = 0;
    std::vector<ScanPoint> out(box.size());
    for (int k = 0; k < box.size(); ++k) {
        ScanPoint& p = out[k];
        p.z = box.node(k);
        const DiscreteAction action{*problem.lagrangians, weights, 0.0, {}, {}};
        try {
            const ActionMinimum best =
                minimize_action(action, problem.line(p.z, options.scan_segments), quiet);
            p.value = best.value + problem.cost(p.z, nullptr);
            p.curve = best.curve;
        } catch (const ConvergenceError&) {
            p.value = kInf;
        }
        if (!std::isfinite(p.value)) p.value = kInf;
    }
    return out;
}

std::vector<int> local_minima(const std::vector<ScanPoint>& points, const Grid& box) {
    std::vector<int> out;
    for (int k = 0; k < box.size(); ++k) {
        if (!std::isfinite(points[k].value)) continue;
        bool minimal = true;
        for (int axis = 0; axis < box.dim() && minimal; ++axis)
            for (int offset : {-1, 1}) {
                const auto nb = box.neighbor(k, axis, offset);
                if (nb && points[*nb].value < points[k].value) minimal = false;
            }
        if (minimal) out.push_back(k);
    }
    std::sort(out.begin(), out.end(),
              [&](int a, int b) { return points[a].value < points[b].value; });
    return out;
}

BolzaResult refine(const EndpointProblem& problem, const ScanPoint& start,
                   const BolzaOptions& options) {
    DiscreteAction action{*problem.lagrangians, problem.weights(options.segments), 0.0, {}, {}};
    EndpointCost cost = [&problem](const Vec& z, Vec* grad) { return problem.cost(z, grad); };
    if (problem.free_start)
        action.start_cost = cost;
    else
        action.end_cost = cost;
    const ActionMinimum best =
        minimize_action(action, resample(start.curve, options.segments), options.minimize);
    BolzaResult out;
    out.value = best.value;
    out.minimizer = best.curve;
    out.endpoint = problem.free_node(best.curve);
    out.multiple_minimizers = best.multiple_minimizers;
    out.iterations = best.report.iterations;
    return out;
}

bool touches(const Vec& z, const SearchBox& box) {
    for (Eigen::Index a = 0; a < z.size(); ++a) {
        const double tol = 1e-6 * (box.hi(a) - box.lo(a));
        if (z(a) <= box.lo(a) + tol || z(a) >= box.hi(a) - tol) return true;
    }
    return false;
}

bool on_edge(const Grid& grid, int k) {
    const auto idx = grid.multi_index(k);
    for (int a = 0; a < grid.dim(); ++a)
        if (idx[a] == 0 || idx[a] == grid.points()[a] - 1) return true;
    return false;
}

// nullopt when the best scan point already sits on the box boundary.
std::optional<BolzaResult> solve_in_box(const EndpointProblem& problem, const SearchBox& box,
                                        const BolzaOptions& options) {
    const Grid scan_grid(box.lo, box.hi, std::vector<int>(box.lo.size(), options.scan_points));
    const std::vector<ScanPoint> points = scan(problem, scan_grid, options);
    const std::vector<int> minima = local_minima(points, scan_grid);
    if (minima.empty()) throw ConvergenceError("endpoint scan found no finite value");
    if (on_edge(scan_grid, minima[0])) return std::nullopt;

    BolzaResult best = refine(problem, points[minima[0]], options);
    double lo = kInf, hi = -kInf;
    for (const auto& p : points)
        if (std::isfinite(p.value)) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
        }
    // A second basin whose scan value is close to the best is refined too;
    // equal refined values at distinct endpoints mean several minimizers.
    if (minima.size() > 1 &&
        points[minima[1]].value <= points[minima[0]].value + 0.05 * (hi - lo) + 1e-12) {
        BolzaResult other = refine(problem, points[minima[1]], options);
        const double scale = 1.0 + std::abs(best.value);
        if (std::abs(other.value - best.value) <= 1e-6 * scale) {
            if ((other.endpoint - best.endpoint).norm() > 1e-3) best.multiple_minimizers = true;
        } else if (other.value < best.value) {
            best = std::move(other);
        }
    }
    return best;
}

BolzaResult solve(const EndpointProblem& problem, const BolzaOptions& options) {
    const int dim = static_cast<int>(problem.x.size());
    if (options.scan_points < 2) throw InvalidInputError("scan needs at least two points per axis");
    if (options.scan_segments < 1 || options.segments < 1)
        throw InvalidInputError("segment counts must be positive");
    SearchBox box;
    if (options.search_box) {
        box = *options.search_box;
        if (box.lo.size() != dim || box.hi.size() != dim)
            throw InvalidInputError("search box dimension differs from the point");
    } else {
        box.lo = problem.x.array() - options.default_half_width;
        box.hi = problem.x.array() + options.default_half_width;
    }
    std::optional<BolzaResult> result = solve_in_box(problem, box, options);
    if (result && !touches(result->endpoint, box)) return *result;

    const Vec center = 0.5 * (box.lo + box.hi);
    const Vec width = box.hi - box.lo;
    const SearchBox wide{center - width, center + width};
    result = solve_in_box(problem, wide, options);
    if (!result || touches(result->endpoint, wide)) {
        std::ostringstream msg;
        msg << "minimizing endpoint stays on the boundary of the widened search box ["
            << wide.lo.transpose() << "] to [" << wide.hi.transpose() << "]";
        throw SearchBoxError(msg.str());
    }
    result->widened = true;
    return *result;
}

void check_problem(int index, double horizon, const Vec& x, const InitialData& data,
                   const CouplingMatrix& a, const LagrangianSet& lagrangians) {
    const int dim = common_dimension(lagrangians);
    const int m = a.size();
    if (static_cast<int>(lagrangians.size()) != m)
        throw InvalidInputError("number of lagrangians differs from the coupling size");
    if (data.size() != m) throw InvalidInputError("initial data count differs from the coupling size");
    if (index < 0 || index >= m) throw InvalidInputError("equation index out of range");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be a finite t > 0");
    if (x.size() != dim || !x.allFinite()) throw InvalidInputError("evaluation point is malformed");
}

SearchBox box_of(const Grid& grid) { return {grid.lo(), grid.hi()}; }

template <class Task>
void parallel_for(int count, int threads, const Task& task) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int k = 0; k < count; ++k) task(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int k = next++; k < count; k = next++) {
                {
                    std::lock_guard<std::mutex> lock(guard);
                    if (failure) return;
                }
                try {
                    task(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(guard);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<int> spread_nodes(int size, int count) {
    std::vector<int> out;
    if (count <= 0) return out;
    if (count == 1) return {size / 2};
    for (int q = 0; q < count; ++q) {
        const int k = static_cast<int>(std::lround(static_cast<double>(q) * (size - 1) / (count - 1)));
        if (out.empty() || out.back() != k) out.push_back(k);
    }
    return out;
}

using PointSolver = std::function<BolzaResult(int index, const Vec& x, const BolzaOptions&)>;

ValueField sweep(double horizon, int m, const Grid& grid, const EvolveOptions& options,
                 const PointSolver& solver) {
    BolzaOptions bolza = options.bolza;
    if (!bolza.search_box) bolza.search_box = box_of(grid.dilated(options.box_dilation));
    ValueField field{grid, horizon, Matrix(m, grid.size()), {}, {}, 0.0};
    field.endpoints.assign(m, Eigen::MatrixXd(grid.dim(), grid.size()));
    field.multiple = Eigen::MatrixXi::Zero(m, grid.size());
    parallel_for(m * grid.size(), resolve_threads(options.threads), [&](int task) {
        const int i = task % m, k = task / m;
        const BolzaResult r = solver(i, grid.node(k), bolza);
        field.values(i, k) = r.value;
        field.endpoints[i].col(k) = r.endpoint;
        field.multiple(i, k) = r.multiple_minimizers ? 1 : 0;
    });
    if (!field.values.allFinite()) throw ConvergenceError("evolved field has non-finite values");
    return field;
}

}  // namespace

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HJWEAVE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

BolzaResult bolza_value(int index, double horizon, const Vec& x, const InitialData& data,
                        const CouplingMatrix& a, const LagrangianSet& lagrangians,
                        const BolzaOptions& options) {
    check_problem(index, horizon, x, data, a, lagrangians);
    EndpointProblem problem;
    problem.horizon = horizon;
    problem.x = x;
    problem.free_start = true;
    problem.weights = [&](int n) { return forward_weights(index, a, horizon, n); };
    problem.coefficients = matrix_exponential(a, -horizon).row(index).transpose();
    problem.data = &data;
    problem.lagrangians = &lagrangians;
    return solve(problem, options);
}

BolzaResult positive_value_direct(int index, double horizon, const Vec& x, const InitialData& data,
                                  const CouplingMatrix& a, const LagrangianSet& lagrangians,
                                  const BolzaOptions& options) {
    check_problem(index, horizon, x, data, a, lagrangians);
    EndpointProblem problem;
    problem.horizon = horizon;
    problem.x = x;
    problem.free_start = false;
    problem.weights = [&](int n) { return terminal_weights(index, a, horizon, n); };
    problem.coefficients = -matrix_exponential(a, horizon).row(index).transpose();
    problem.data = &data;
    problem.lagrangians = &lagrangians;
    BolzaResult r = solve(problem, options);
    r.value = -r.value;
    return r;
}

BolzaResult positive_value_reversal(int index, double horizon, const Vec& x,
                                    const InitialData& data, const CouplingMatrix& a,
                                    const LagrangianSet& lagrangians, const BolzaOptions& options) {
    check_problem(index, horizon, x, data, a, lagrangians);
    BolzaResult r = bolza_value(index, horizon, x, data.negated(), a.negated(), reversed(lagrangians),
                                options);
    r.value = -r.value;
    r.minimizer = r.minimizer.reversed();
    return r;
}

ValueField evolve_field(double horizon, const InitialData& data, const CouplingMatrix& a,
                        const LagrangianSet& lagrangians, const Grid& grid,
                        const EvolveOptions& options) {
    check_problem(0, horizon, grid.node(0), data, a, lagrangians);
    ValueField field = sweep(horizon, a.size(), grid, options,
                             [&](int i, const Vec& x, const BolzaOptions& bolza) {
                                 return bolza_value(i, horizon, x, data, a, lagrangians, bolza);
                             });
    FundamentalOptions fundamental;
    fundamental.segments = options.bolza.segments;
    fundamental.minimize = options.bolza.minimize;
    for (int k : spread_nodes(grid.size(), options.crosscheck_nodes))
        for (int i = 0; i < a.size(); ++i) {
            const Vec z = field.endpoints[i].col(k);
            const Vector phi = data.values(z);
            const double h = minimize_fundamental(i, horizon, z, grid.node(k), phi, a, lagrangians,
                                                  fundamental)
                                 .value;
            field.crosscheck_defect =
                std::max(field.crosscheck_defect, std::abs(phi(i) + h - field.values(i, k)));
        }
    return field;
}

ValueField evolve_field_positive(double horizon, const InitialData& data, const CouplingMatrix& a,
                                 const LagrangianSet& lagrangians, const Grid& grid,
                                 const EvolveOptions& options, PositiveMethod method) {
    check_problem(0, horizon, grid.node(0), data, a, lagrangians);
    const auto by = [&](PositiveMethod which) -> PointSolver {
        return [&, which](int i, const Vec& x, const BolzaOptions& bolza) {
            return which == PositiveMethod::direct
                       ? positive_value_direct(i, horizon, x, data, a, lagrangians, bolza)
                       : positive_value_reversal(i, horizon, x, data, a, lagrangians, bolza);
        };
    };
    ValueField field = sweep(horizon, a.size(), grid, options, by(method));
    const PointSolver other = by(method == PositiveMethod::direct ? PositiveMethod::reversal
                                                                   : PositiveMethod::direct);
    BolzaOptions bolza = options.bolza;
    if (!bolza.search_box) bolza.search_box = box_of(grid.dilated(options.box_dilation));
    for (int k : spread_nodes(grid.size(), options.crosscheck_nodes))
        for (int i = 0; i < a.size(); ++i)
            field.crosscheck_defect =
                std::max(field.crosscheck_defect,
                         std::abs(other(i, grid.node(k), bolza).value - field.values(i, k)));
    return field;
}

DifferentiabilityResidual differentiability_identities(const ValueField& field, int node, int index,
                                                       const InitialData& data,
                                                       const CouplingMatrix& a,
                                                       const LagrangianSet& lagrangians,
                                                       const DifferentiabilityOptions& options) {
    const Grid& grid = field.grid;
    if (node < 0 || node >= grid.size()) throw InvalidInputError("node outside the grid");
    const Vec x = grid.node(node);
    check_problem(index, field.time, x, data, a, lagrangians);
    if (field.components() != a.size()) throw InvalidInputError("field component count mismatch");
    DifferentiabilityResidual out;
    Vec dx(grid.dim());
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const auto lo = grid.neighbor(node, axis, -1), hi = grid.neighbor(node, axis, 1);
        if (!lo || !hi) {
            out.skipped = true;
            out.notice = "node has no interior stencil";
            return out;
        }
        dx(axis) = (field.values(index, *hi) - field.values(index, *lo)) / (2 * grid.spacing(axis));
    }
    if (field.multiple.size() && field.multiple(index, node)) {
        out.skipped = true;
        out.notice = "node has several minimizers";
        return out;
    }

    BolzaOptions bolza = options.bolza;
    if (!bolza.search_box) bolza.search_box = box_of(grid.dilated(2.0));
    const double t = field.time;
    const BolzaResult r = bolza_value(index, t, x, data, a, lagrangians, bolza);
    if (r.multiple_minimizers) {
        out.skipped = true;
        out.notice = "node has several minimizers";
        return out;
    }
    const Trajectory& xi = r.minimizer;
    const int n = xi.segments();
    if (n < 2) throw InvalidInputError("minimizer needs at least two segments");
    const Vec velocity = (3.0 * xi.node(n) - 4.0 * xi.node(n - 1) + xi.node(n - 2)) / (2.0 * xi.step());
    const Vec p = lagrangians[index]->jet(xi.end(), velocity).grad_v;
    out.dx = (dx - p).norm();

    const double delta = options.time_step * t;
    const double later = bolza_value(index, t + delta, x, data, a, lagrangians, bolza).value;
    const double earlier = bolza_value(index, t - delta, x, data, a, lagrangians, bolza).value;
    const double dt = (later - earlier) / (2 * delta);
    const double hamiltonian = make_hamiltonian(lagrangians[index])->value(xi.end(), p);
    const double coupling = a.entries().row(index).dot(field.values.col(node));
    const Vector carried = integrate_linear(a, lagrangians, xi, data.values(xi.start()),
                                           BoundaryMode::initial)
                               .final_values();
    const double coupling_along = a.entries().row(index).dot(carried);
    out.dt = std::abs(dt + hamiltonian + coupling);
    out.dt_along = std::abs(dt + hamiltonian + coupling_along);
    out.coupling_gap = coupling_along - coupling;
    return out;
}

}  // namespace hjweave
