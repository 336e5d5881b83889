#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hjweave/csv.hpp"
#include "hjweave/errors.hpp"
#include "hjweave/herglotz.hpp"

using namespace hjweave;

namespace {

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

Vector vector2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

LagrangianSet harmonic_pair(int dim = 1) {
    return {make_quadratic(dim, 1.0, HarmonicPotential{1.0}),
            make_quadratic(dim, 1.0, HarmonicPotential{2.25})};
}

Trajectory bumpy(const Vec& start, const Vec& end, double t, int n, double size) {
    Trajectory curve = Trajectory::straight_line(start, end, t, n);
    for (int k = 1; k < n; ++k) {
        const double s = curve.time(k) / t;
        Vec offset = Vec::Constant(start.size(), size * std::sin(M_PI * s) * (1 + s));
        curve.set_node(k, curve.node(k) + offset);
    }
    return curve;
}

const CouplingMatrix kSymmetric(mat2(1, -1, -1, 1));

}  // namespace

TEST_CASE("discretized action of the free particle") {
    const LagrangianSet set{make_quadratic(2), make_quadratic(2)};
    const Vec x = vec2(0.3, -1.0), y = vec2(1.5, 0.5);
    const double t = 0.7;
    for (int n : {1, 7, 200}) {
        const Trajectory line = Trajectory::straight_line(x, y, t, n);
        const double value = discretized_action(1, line, CouplingMatrix::zero(2), set, vector2(0.4, -0.9));
        CHECK(value == doctest::Approx(-0.9 + (x - y).squaredNorm() / (2 * t)).epsilon(1e-14));
    }
}

TEST_CASE("discretized action is affine in the data") {
    const CouplingMatrix a(mat2(0.8, -0.3, -0.5, 1.2));
    const LagrangianSet set = harmonic_pair();
    const Trajectory curve = bumpy(vec1(-0.5), vec1(0.8), 1.3, 50, 0.2);
    const Vector data = vector2(0.7, -1.1);
    const double shift = discretized_action(0, curve, a, set, data) -
                         discretized_action(0, curve, a, set, Vector::Zero(2));
    CHECK(shift == doctest::Approx(matrix_exponential(a, -1.3).row(0).dot(data)).epsilon(1e-12));
}

TEST_CASE("discretized action equals the propagated u_i(t)") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const LagrangianSet set{make_quadratic(2, 1.0, HarmonicPotential{0.5}), make_quartic(2, 0.3)};
    for (int trial = 0; trial < 10; ++trial) {
        const CouplingMatrix a(mat2(u(rng), u(rng), u(rng), u(rng)));
        const Trajectory curve = bumpy(vec2(u(rng), u(rng)), vec2(u(rng), u(rng)), 1.0, 64, u(rng));
        const Vector data = vector2(u(rng), u(rng));
        const auto state = integrate_linear(a, set, curve, data, BoundaryMode::initial);
        for (int i = 0; i < 2; ++i)
            CHECK(std::abs(discretized_action(i, curve, a, set, data) - state.u(i, 64)) < 1e-10);
    }
}

TEST_CASE("action gradient") {
    const LagrangianSet free{make_quadratic(1)};
    const Trajectory line = Trajectory::straight_line(vec1(0.0), vec1(2.0), 1.0, 10);
    const auto g0 = action_gradient(0, line, CouplingMatrix::zero(1), free, Vector::Zero(1));
    CHECK(g0.cols() == 9);
    CHECK(g0.cwiseAbs().maxCoeff() < 1e-13);

    // Moving node 4 only touches nodes 3..5 of the gradient.
    const CouplingMatrix a(mat2(1.0, -0.4, -0.6, 0.9));
    const LagrangianSet set = harmonic_pair();
    Trajectory curve = bumpy(vec1(-1), vec1(1), 1.0, 10, 0.3);
    const auto before = action_gradient(0, curve, a, set, Vector::Zero(2));
    curve.set_node(4, curve.node(4) + vec1(0.1));
    const auto after = action_gradient(0, curve, a, set, Vector::Zero(2));
    for (int k = 1; k <= 9; ++k) {
        const double change = std::abs(after(0, k - 1) - before(0, k - 1));
        if (k >= 3 && k <= 5)
            CHECK(change > 0.0);
        else
            CHECK(change == 0.0);
    }
}

TEST_CASE("action gradient matches finite differences") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec k(2);
    k << 1.0, 0.5;
    const LagrangianSet set{make_quadratic(2, 1.0, CosinePotential{0.7, k}), make_quartic(2, 0.4, HarmonicPotential{1.0})};
    const CouplingMatrix a(mat2(0.9, -0.2, -0.7, 0.5));
    const Vector data = vector2(0.3, 0.6);
    Trajectory curve = bumpy(vec2(0, 0), vec2(1, -1), 1.0, 12, 0.4);
    const auto grad = action_gradient(1, curve, a, set, data);
    const double h = 1e-6;
    double worst = 0.0;
    for (int node = 1; node < 12; ++node) {
        for (int d = 0; d < 2; ++d) {
            Trajectory plus = curve, minus = curve;
            Vec e = Vec::Zero(2);
            e(d) = h;
            plus.set_node(node, curve.node(node) + e);
            minus.set_node(node, curve.node(node) - e);
            const double fd = (discretized_action(1, plus, a, set, data) - discretized_action(1, minus, a, set, data)) / (2 * h);
            const double g = grad(d, node - 1);
            worst = std::max(worst, std::abs(fd - g) / std::max(1.0, std::abs(g)));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("free particle fundamental solution") {
    const LagrangianSet set{make_quadratic(2)};
    const Vec x = vec2(-0.4, 0.2), y = vec2(1.0, 1.3);
    const auto r = minimize_fundamental(0, 0.8, x, y, Vector::Constant(1, 0.5), CouplingMatrix::zero(1), set);
    CHECK(r.value == doctest::Approx((x - y).squaredNorm() / 1.6).epsilon(1e-12));
    const Trajectory line = Trajectory::straight_line(x, y, 0.8, 200);
    CHECK((r.minimizer.nodes() - line.nodes()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.gradient_norm <= 1e-8);
}

TEST_CASE("data shift changes the value but not the minimizer") {
    const CouplingMatrix a(mat2(1.0, -0.5, -0.8, 1.2));
    const LagrangianSet set = harmonic_pair();
    const Vector data = vector2(0.9, -0.4);
    const auto with = minimize_fundamental(0, 1.0, vec1(-0.5), vec1(0.8), data, a, set);
    const auto without = minimize_fundamental(0, 1.0, vec1(-0.5), vec1(0.8), Vector::Zero(2), a, set);
    const Matrix b = matrix_exponential(a, -1.0);
    const double expected = (b(0, 0) - 1.0) * data(0) + b(0, 1) * data(1);
    CHECK(std::abs((with.value - without.value) - expected) < 1e-10);
    CHECK((with.minimizer.nodes() - without.minimizer.nodes()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero row sums reduce to the free particle") {
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const Vector data = vector2(0.3, -0.6);
    const double t = 1.2;
    const auto r = minimize_fundamental(1, t, vec1(0.0), vec1(1.5), data, kSymmetric, set);
    const Matrix b = matrix_exponential(kSymmetric, -t);
    const double expected = 1.5 * 1.5 / (2 * t) + b.row(1).dot(data) - data(1);
    CHECK(r.value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("minimization invariants") {
    const CouplingMatrix a(mat2(1.0, -1.0, -1.0, 1.0));
    Vec k(1);
    k << 2.0;
    const LagrangianSet set{make_quadratic(1, 1.0, CosinePotential{0.3, k}), make_quartic(1, 0.2, HarmonicPotential{1.0})};
    const Vector data = vector2(0.2, 0.1);
    for (int i = 0; i < 2; ++i) {
        const auto r = minimize_fundamental(i, 1.0, vec1(-0.7), vec1(0.9), data, a, set);
        const Trajectory line = Trajectory::straight_line(vec1(-0.7), vec1(0.9), 1.0, 200);
        CHECK(r.value <= discretized_action(i, line, a, set, data) - data(i) + 1e-12);
        for (std::size_t s = 1; s < r.action_history.size(); ++s)
            CHECK(r.action_history[s] <= r.action_history[s - 1]);
        CHECK(r.value == doctest::Approx(r.state.u(i, 200) - data(i)).epsilon(1e-14));
        CHECK(el_residual(i, r.minimizer, a, set) < 1e-4);
    }
}

TEST_CASE("refinement converges at second order") {
    const CouplingMatrix a(mat2(1.0, -0.5, -0.5, 1.0));
    const LagrangianSet set = harmonic_pair();
    FundamentalOptions opts;
    std::vector<double> values;
    for (int n : {25, 50, 100}) {
        opts.segments = n;
        values.push_back(minimize_fundamental(0, 1.5, vec1(-1.0), vec1(0.5), vector2(0.1, 0.2), a, set, opts).value);
    }
    const double ratio = std::abs(values[0] - values[1]) / std::abs(values[1] - values[2]);
    CHECK(ratio > 3.5);
}

TEST_CASE("minimizer of a coupled harmonic system satisfies the Euler-Lagrange equation") {
    const LagrangianSet set = harmonic_pair();
    const auto r = minimize_fundamental(0, 1.0, vec1(-0.5), vec1(0.8), vector2(0.3, -0.2), kSymmetric, set);
    CHECK(el_residual(0, r.minimizer, kSymmetric, set) < 1e-4);
    // The unweighted form is not satisfied once the Lagrangians differ.
    CHECK(herglotz_form_residual(0, r.minimizer, kSymmetric, set) > 1e-2);
}

TEST_CASE("Euler-Lagrange residual on closed-form curves") {
    const LagrangianSet free{make_quadratic(1)};
    const Trajectory line = Trajectory::straight_line(vec1(0.0), vec1(1.0), 1.0, 50);
    CHECK(el_residual(0, line, CouplingMatrix::zero(1), free) < 1e-12);
    CHECK(herglotz_form_residual(0, line, CouplingMatrix::zero(1), free) < 1e-12);

    // m = 1, coupling a: xi' = v0 e^{-a s} solves v' = -a v.
    const double rate = 0.8, v0 = 1.3, t = 2.0;
    const CouplingMatrix scalar(Matrix::Constant(1, 1, rate));
    auto sampled = [&](int n) {
        Eigen::MatrixXd nodes(1, n + 1);
        for (int k = 0; k <= n; ++k) nodes(0, k) = v0 / rate * (1 - std::exp(-rate * t * k / n));
        return Trajectory(t, nodes);
    };
    const double r1 = herglotz_form_residual(0, sampled(50), scalar, free);
    const double r2 = herglotz_form_residual(0, sampled(100), scalar, free);
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.05));
    CHECK(el_residual(0, sampled(50), scalar, free) <= 1.0 / (50.0 * 50.0));
    CHECK(el_residual(0, sampled(100), scalar, free) <= 1.0 / (100.0 * 100.0));

    // A curve that is not an extremal.
    CHECK(el_residual(0, bumpy(vec1(0), vec1(1), 1.0, 50, 0.3), CouplingMatrix::zero(1), free) > 0.1);
    CHECK_THROWS_AS(el_residual(0, Trajectory::straight_line(vec1(0), vec1(1), 1.0, 2), CouplingMatrix::zero(1), free),
                    InvalidInputError);
}

TEST_CASE("terminal fundamental solution of a symmetric free particle") {
    const LagrangianSet set{make_quadratic(1)};
    const auto r = minimize_fundamental_terminal(0, 0.5, vec1(0.2), vec1(-0.3), Vector::Constant(1, 1.0),
                                                 CouplingMatrix::zero(1), set);
    CHECK(r.value == doctest::Approx(0.25 / 1.0).epsilon(1e-12));
    CHECK(r.minimizer.start()(0) == 0.2);
    CHECK(r.minimizer.end()(0) == -0.3);
    CHECK(r.state.mode == BoundaryMode::terminal);
    CHECK(r.state.u(0, 200) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("terminal solution: reversal and direct paths agree") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec k(1);
    k << 1.5;
    Mat mass(1, 1);
    mass << 1.5;
    const LagrangianSet set{make_quadratic(mass, CosinePotential{0.2, k}),
                            make_quadratic(1, 1.0, HarmonicPotential{0.5})};
    const FamilyConstants fc = family_constants(set, 2.0);
    for (int trial = 0; trial < 4; ++trial) {
        const CouplingMatrix a(mat2(0.3 + 0.2 * u(rng), -0.2, -0.1, 0.4));
        // Terminal weights are rows of exp(A s); keep t inside the short
        // horizon of the reversed coupling so the weighted Lagrangian stays convex.
        const double t = std::min(0.8, 0.9 * short_horizon(a.negated(), fc.c1_growth, fc.c2_hess, 0.1));
        const Vector data = vector2(u(rng), u(rng));
        const Vec x = vec1(u(rng)), y = vec1(u(rng));
        for (int i = 0; i < 2; ++i) {
            const auto reversal = minimize_fundamental_terminal(i, t, x, y, data, a, set);
            const auto direct = minimize_fundamental_terminal_direct(i, t, x, y, data, a, set);
            CHECK(std::abs(reversal.value - direct.value) < 1e-6);
            CHECK((reversal.minimizer.nodes() - direct.minimizer.nodes()).cwiseAbs().maxCoeff() < 1e-6);
            CHECK((reversal.state.u - direct.state.u).cwiseAbs().maxCoeff() < 1e-6);

            // Identity with the initial-condition problem for the reversed system.
            const auto mirror = minimize_fundamental(i, t, y, x, -data, a.negated(), reversed(set));
            CHECK(std::abs(direct.value - mirror.value) < 1e-6);
        }
    }
}

TEST_CASE("reversing a Lagrangian set twice gives it back") {
    const LagrangianSet set{make_quartic(1, 0.5)};
    CHECK(reversed(reversed(set))[0].get() == set[0].get());
}

TEST_CASE("symmetric wells produce flagged multiple minimizers") {
    // L = 1/2 v^2 + 4 cos(pi x): a hump at 0 with wells at +-1. Curves from 0
    // back to 0 escape to either well; the constant curve is a saddle.
    Vec k(1);
    k << M_PI;
    const LagrangianSet set{make_quadratic(1, 1.0, CosinePotential{4.0, k})};
    FundamentalOptions opts;
    opts.segments = 80;
    opts.minimize.extra_starts = 6;
    opts.minimize.perturbation = 0.5;
    const auto r = minimize_fundamental(0, 3.0, vec1(0.0), vec1(0.0), Vector::Zero(1),
                                        CouplingMatrix::zero(1), set, opts);
    CHECK(r.value < 4.0 * 3.0 - 1.0);
    CHECK(r.multiple_minimizers);
}

TEST_CASE("non-convergence is reported") {
    FundamentalOptions opts;
    opts.minimize.optimizer.max_iterations = 1;
    opts.minimize.retries = 0;
    const LagrangianSet set{make_quartic(1, 1.0, HarmonicPotential{3.0})};
    CHECK_THROWS_AS(minimize_fundamental(0, 2.0, vec1(-3.0), vec1(3.0), Vector::Zero(1), CouplingMatrix::zero(1), set, opts),
                    ConvergenceError);
}

TEST_CASE("minimizer csv export") {
    const LagrangianSet set = harmonic_pair();
    FundamentalOptions opts;
    opts.segments = 20;
    const auto r = minimize_fundamental(1, 1.0, vec1(0.0), vec1(1.0), vector2(0.5, 0.25), kSymmetric, set, opts);
    std::stringstream out;
    write_minimizer_csv(out, r, 1);
    std::string line;
    std::getline(out, line);
    CHECK(line == "s,x1,u1,u2,action");
    int rows = 0;
    std::string last;
    while (std::getline(out, line)) {
        ++rows;
        last = line;
    }
    CHECK(rows == 21);
    const auto fields = csv::split(last);
    CHECK(csv::parse(fields[4]) == doctest::Approx(r.value).epsilon(1e-14));
}
