#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hjweave/errors.hpp"
#include "hjweave/viscosity.hpp"

using namespace hjweave;

namespace {

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

SchemeConfig config_on(double lo, double hi, double dx, double t) {
    SchemeConfig c;
    c.grid = Grid(vec1(lo), vec1(hi), {static_cast<int>(std::lround((hi - lo) / dx)) + 1});
    c.final_time = t;
    return c;
}

std::vector<HamiltonianPtr> free_hamiltonians(int m) {
    std::vector<HamiltonianPtr> out;
    for (int i = 0; i < m; ++i) out.push_back(make_hamiltonian(make_quadratic(1)));
    return out;
}

const CouplingMatrix kSwap(mat2(1, -1, -1, 1));
const CouplingMatrix kNone(Matrix::Zero(1, 1));
const InitialData kParabola{{Datum{QuadraticData{1.0}}}};

// x^2 / (2 (1 + t)) against the scheme on [-2, 2].
double parabola_error(double dx) {
    const auto field = solve_system(free_hamiltonians(1), kNone, kParabola, config_on(-2, 2, dx, 0.5));
    double err = 0.0;
    for (int k = 0; k < field.grid.size(); ++k) {
        const double x = field.grid.node(k)(0);
        err = std::max(err, std::abs(field.values(0, k) - x * x / 3.0));
    }
    return err;
}

// min_z phi(z) + (x - z)^2 / (2t), dense scan.
double hopf_lax_scan(const Datum& phi, double t, double x) {
    double best = INFINITY;
    const int n = 100000;
    for (int k = 0; k <= n; ++k) {
        const double z = x - 4.0 + 8.0 * k / n;
        best = std::min(best, phi.value(vec1(z)) + (x - z) * (x - z) / (2 * t));
    }
    return best;
}

}  // namespace

TEST_CASE("scheme reproduces the Hopf-Lax parabola") {
    SchemeReport report;
    const auto field = solve_system(free_hamiltonians(1), kNone, kParabola, config_on(-2, 2, 0.01, 0.5), &report);
    CHECK(field.time == 0.5);
    CHECK(report.steps > 0);
    CHECK(report.alpha[0] >= 2.0);
    CHECK(parabola_error(0.01) <= 0.02);
}

TEST_CASE("scheme is first order on the parabola") {
    const std::vector<double> dx{0.04, 0.02, 0.01};
    std::vector<double> err;
    for (double h : dx) err.push_back(parabola_error(h));
    // least-squares slope of log err against log dx
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < dx.size(); ++k) {
        const double lx = std::log(dx[k]), ly = std::log(err[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(dx.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 0.8);
    CHECK(slope <= 1.2);
}

TEST_CASE("constant data follow the coupling exactly") {
    const InitialData data{{Datum{ConstantData{1.0}}, Datum{ConstantData{0.0}}}};
    const double t = 0.7;
    const auto neg = solve_system(free_hamiltonians(2), kSwap, data, config_on(-1, 1, 0.05, t));
    const auto pos = solve_system_positive(free_hamiltonians(2), kSwap, data, config_on(-1, 1, 0.05, t));
    for (int k = 0; k < neg.grid.size(); ++k) {
        CHECK(std::abs(neg.values(0, k) - 0.5 * (1 + std::exp(-2 * t))) < 1e-6);
        CHECK(std::abs(neg.values(1, k) - 0.5 * (1 - std::exp(-2 * t))) < 1e-6);
        CHECK(std::abs(pos.values(0, k) - 0.5 * (1 + std::exp(2 * t))) < 1e-6);
        CHECK(std::abs(pos.values(1, k) - 0.5 * (1 - std::exp(2 * t))) < 1e-6);
    }
}

TEST_CASE("positive scheme mirrors the negative one on the reflected system") {
    const InitialData data{{Datum{GaussianData{1.0, vec1(0.3), 0.5}}, Datum{CosineData{0.5, vec1(2.0)}}}};
    const CouplingMatrix a(mat2(1.0, -0.4, -0.7, 2.0));
    std::vector<HamiltonianPtr> hs{make_hamiltonian(make_quadratic(1, 1.0, HarmonicPotential{1.0})),
                                   make_hamiltonian(make_quadratic(1))};
    std::vector<HamiltonianPtr> reflected;
    for (const auto& h : hs) reflected.push_back(std::make_shared<ReflectedHamiltonian>(h));
    const auto config = config_on(-2, 2, 0.02, 0.4);
    const auto pos = solve_system_positive(hs, a, data, config);
    const auto mirror = solve_system(reflected, a.negated(), data.negated(), config);
    CHECK((pos.values + mirror.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("positive scheme is first order on the parabola") {
    // -u_t + u_x^2 / 2 = 0 from -x^2/2 gives -x^2 / (2 (1 + t)).
    const InitialData data{{Datum{QuadraticData{-1.0}}}};
    std::vector<double> err;
    for (double dx : {0.04, 0.02, 0.01}) {
        const auto field = solve_system_positive(free_hamiltonians(1), kNone, data, config_on(-2, 2, dx, 0.5));
        double e = 0.0;
        for (int k = 0; k < field.grid.size(); ++k) {
            const double x = field.grid.node(k)(0);
            e = std::max(e, std::abs(field.values(0, k) + x * x / 3.0));
        }
        err.push_back(e);
    }
    const double slope = std::log(err[0] / err[2]) / std::log(4.0);
    CHECK(slope >= 0.8);
    CHECK(slope <= 1.2);
}

TEST_CASE("flux is consistent and monotone") {
    const auto h = make_hamiltonian(make_quadratic(1, 1.0, HarmonicPotential{2.0}));
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pick(-3.0, 3.0);
    const double alpha = 1.1 * 3.0;  // |H_p| = |p| on [-3, 3]
    const double delta = 1e-3;
    for (int trial = 0; trial < 200; ++trial) {
        const Vec x = vec1(pick(rng));
        const double pm = pick(rng), pp = pick(rng);
        CHECK(lax_friedrichs_flux(*h, x, pm, pm, alpha) == h->value(x, vec1(pm)));
        if (std::abs(pm) + delta > 3.0 || std::abs(pp) + delta > 3.0) continue;
        const double base = lax_friedrichs_flux(*h, x, pm, pp, alpha);
        CHECK(lax_friedrichs_flux(*h, x, pm + delta, pp, alpha) >= base);
        CHECK(lax_friedrichs_flux(*h, x, pm, pp + delta, alpha) <= base);
    }
}

TEST_CASE("ordered data stay ordered") {
    const InitialData low{{Datum{GaussianData{0.8, vec1(0.0), 0.4}}, Datum{CosineData{0.3, vec1(3.0)}, -0.2}}};
    const InitialData high{{Datum{GaussianData{1.0, vec1(0.0), 0.4}}, Datum{CosineData{0.3, vec1(3.0)}, 0.0}}};
    const CouplingMatrix a(mat2(2.0, -1.5, -0.5, 0.5));
    std::vector<HamiltonianPtr> hs{make_hamiltonian(make_quadratic(1, 1.0, HarmonicPotential{1.5})),
                                   make_hamiltonian(make_quadratic(1))};
    auto config = config_on(-2, 2, 0.02, 0.6);
    // Use one alpha for both runs so that the two solves share a scheme.
    config.alpha = {4.0, 4.0};
    const auto lo = solve_system(hs, a, low, config);
    const auto hi = solve_system(hs, a, high, config);
    CHECK((hi.values - lo.values).minCoeff() >= -1e-12);
}

TEST_CASE("periodic boundary on cosine data") {
    const double two_pi = 2 * std::numbers::pi;
    const Datum phi{CosineData{1.0, vec1(1.0)}};
    SchemeConfig config = config_on(0, two_pi, two_pi / 400, 0.5);
    config.boundary = BoundaryTreatment::periodic;
    const auto field = solve_system(free_hamiltonians(1), kNone, InitialData{{phi}}, config);
    const int last = field.grid.size() - 1;
    CHECK(field.values(0, 0) == field.values(0, last));
    double err = 0.0;
    for (int k = 0; k <= last; k += 10) {
        const double x = field.grid.node(k)(0);
        err = std::max(err, std::abs(field.values(0, k) - hopf_lax_scan(phi, 0.5, x)));
    }
    CHECK(err < 0.02);
}

TEST_CASE("stability violations are reported") {
    auto config = config_on(-2, 2, 0.02, 0.3);
    config.cfl = 1.5;
    CHECK_THROWS_AS(solve_system(free_hamiltonians(1), kNone, kParabola, config), StabilityError);
    config.cfl = 0.4;
    config.alpha = {0.5};
    CHECK_THROWS_AS(solve_system(free_hamiltonians(1), kNone, kParabola, config), StabilityError);
    config.alpha = {};
    CHECK_THROWS_AS(solve_system(free_hamiltonians(2), kNone, kParabola, config), InvalidInputError);
}

TEST_CASE("compare reports norms and location") {
    const auto config = config_on(-1, 1, 0.1, 0.2);
    const auto field = solve_system(free_hamiltonians(1), kNone, kParabola, config);
    const auto same = compare(field, field);
    CHECK(same.linf == 0.0);
    CHECK(same.l1 == 0.0);

    auto shifted = field;
    shifted.values.array() += 1e-3;
    shifted.values(0, 4) += 1e-3;
    const auto diff = compare(field, shifted);
    CHECK(diff.linf == doctest::Approx(2e-3).epsilon(1e-9));
    CHECK(diff.node == 4);
    CHECK(diff.location(0) == doctest::Approx(-0.6));
    CHECK(diff.l1 == doctest::Approx((21 * 1e-3 + 1e-3) * 0.1).epsilon(1e-9));

    auto later = field;
    later.time = 0.3;
    CHECK_THROWS_AS(compare(field, later), ComparisonError);
    const auto coarse = solve_system(free_hamiltonians(1), kNone, kParabola, config_on(-1, 1, 0.2, 0.2));
    CHECK_THROWS_AS(compare(field, coarse), ComparisonError);
}
