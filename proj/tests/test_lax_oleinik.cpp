#include <cmath>
#include <sstream>

#include "doctest.h"
#include "hjweave/errors.hpp"
#include "hjweave/field.hpp"
#include "hjweave/lax_oleinik.hpp"

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

Datum gaussian(double amplitude, double center, double sigma) {
    return Datum{GaussianData{amplitude, vec1(center), sigma}, 0.0};
}

Grid line_grid(double lo, double hi, int points) { return Grid(vec1(lo), vec1(hi), {points}); }

// min_z phi(z) + (x - z)^2 / (2t) over a dense grid.
double hopf_lax_scan(const Datum& phi, double t, double x) {
    double best = INFINITY;
    const int n = 200000;
    for (int k = 0; k <= n; ++k) {
        const double z = x - 4.0 + 8.0 * k / n;
        best = std::min(best, phi.value(vec1(z)) + (x - z) * (x - z) / (2 * t));
    }
    return best;
}

EvolveOptions quick(int segments = 40) {
    EvolveOptions opts;
    opts.bolza.segments = segments;
    opts.threads = 1;
    return opts;
}

const CouplingMatrix kSwap(mat2(1, -1, -1, 1));

}  // namespace

TEST_CASE("bolza value with constant data") {
    const InitialData data{{Datum{ConstantData{1.0}}, Datum{ConstantData{0.0}}}};
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const double e = std::exp(-2.0);
    for (double x : {-0.7, 0.3}) {
        const auto u1 = bolza_value(0, 1.0, vec1(x), data, kSwap, set);
        const auto u2 = bolza_value(1, 1.0, vec1(x), data, kSwap, set);
        CHECK(u1.value == doctest::Approx(0.5 * (1 + e)).epsilon(1e-9));
        CHECK(u2.value == doctest::Approx(0.5 * (1 - e)).epsilon(1e-9));
        CHECK(std::abs(u1.endpoint(0) - x) < 1e-6);
        CHECK(std::abs(u2.endpoint(0) - x) < 1e-6);
        CHECK_FALSE(u1.multiple_minimizers);
    }
}

TEST_CASE("zero row sums reduce to the scalar Hopf-Lax formula") {
    const Datum phi = gaussian(-1.0, 0.2, 0.5);
    const InitialData data{{phi, phi}};
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const CouplingMatrix a(mat2(0.7, -0.7, -1.3, 1.3));
    for (double x : {-1.0, 0.0, 0.45, 1.2}) {
        const double oracle = hopf_lax_scan(phi, 0.8, x);
        for (int i = 0; i < 2; ++i) CHECK(std::abs(bolza_value(i, 0.8, vec1(x), data, a, set).value - oracle) < 1e-6);
    }
}

TEST_CASE("Hopf-Lax closed form for quadratic data") {
    const InitialData data{{Datum{QuadraticData{1.0}}, Datum{QuadraticData{1.0}}}};
    CHECK_FALSE(data.bounded_uniformly_continuous());
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const double t = 0.6;
    for (double x : {-1.5, 0.2, 0.9}) {
        const auto r = bolza_value(1, t, vec1(x), data, kSwap, set);
        CHECK(std::abs(r.value - x * x / (2 * (1 + t))) < 1e-8);
        CHECK(std::abs(r.endpoint(0) - x / (1 + t)) < 1e-6);
    }
}

TEST_CASE("constant shifts move values by b(t) c") {
    const InitialData data{{gaussian(1.0, 0.0, 0.4), gaussian(-0.5, 0.5, 0.7)}};
    const LagrangianSet set{make_quadratic(1, 1.0, HarmonicPotential{0.5}), make_quartic(1, 0.1)};
    const CouplingMatrix a(mat2(1.0, -0.4, -0.8, 0.8));
    const Vector c = (Vector(2) << 0.7, -1.1).finished();
    const double t = 0.7;
    const Vector shift = matrix_exponential(a, -t) * c;
    for (int i = 0; i < 2; ++i) {
        const double base = bolza_value(i, t, vec1(0.3), data, a, set).value;
        const double moved = bolza_value(i, t, vec1(0.3), data.shifted(c), a, set).value;
        CHECK(std::abs(moved - base - shift(i)) < 1e-8);
    }
}

TEST_CASE("search box is widened once, then reported") {
    // -1/2 z^2 against (x - z)^2 / (2t) with t = 2 is unbounded below.
    const InitialData data{{Datum{QuadraticData{-1.0}}}};
    const LagrangianSet set{make_quadratic(1)};
    CHECK_THROWS_AS(bolza_value(0, 2.0, vec1(0.1), data, CouplingMatrix::zero(1), set), SearchBoxError);

    // Minimizer near 1.5 lies outside the first box [-1, 1] but inside the widened one.
    BolzaOptions opts;
    opts.search_box = SearchBox{vec1(-1.0), vec1(1.0)};
    const InitialData well{{gaussian(-3.0, 1.5, 0.3)}};
    const auto r = bolza_value(0, 0.2, vec1(1.2), well, CouplingMatrix::zero(1), set, opts);
    CHECK(r.widened);
    CHECK(std::abs(r.value - hopf_lax_scan(well.components[0], 0.2, 1.2)) < 1e-6);
}

TEST_CASE("evolved field attains the data as t -> 0") {
    const InitialData data{{gaussian(1.0, 0.0, 0.5), gaussian(0.5, 0.3, 0.8)}};
    const LagrangianSet set{make_quadratic(1, 1.0, HarmonicPotential{1.0}), make_quadratic(1, 1.0, HarmonicPotential{2.0})};
    const double t = 1e-3;
    const Grid grid = line_grid(-1.0, 1.0, 11);
    const ValueField field = evolve_field(t, data, kSwap, set, grid, quick(20));
    const ValueField positive = evolve_field_positive(t, data, kSwap, set, grid, quick(20));
    double worst = 0.0, worst_positive = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
        const Vector phi = data.values(grid.node(k));
        worst = std::max(worst, (field.values.col(k) - phi).cwiseAbs().maxCoeff());
        worst_positive = std::max(worst_positive, (positive.values.col(k) - phi).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 5 * t);
    CHECK(worst_positive < 5 * t);
    CHECK(worst > 0.0);
}

TEST_CASE("evolution is monotone in the data") {
    const InitialData low{{gaussian(1.0, 0.0, 0.5), gaussian(-0.5, 0.3, 0.4)}};
    InitialData high = low;
    high.components[1] = gaussian(0.2, 0.3, 0.4);
    const LagrangianSet set{make_quadratic(1), make_quartic(1, 0.2)};
    const Grid grid = line_grid(-1.0, 1.0, 9);
    const ValueField u = evolve_field(0.5, low, kSwap, set, grid, quick());
    const ValueField w = evolve_field(0.5, high, kSwap, set, grid, quick());
    CHECK((u.values - w.values).maxCoeff() <= 1e-9);
    // Raising phi_2 alone lifts u^1 through the positive coupling weight.
    CHECK((w.values.row(0) - u.values.row(0)).minCoeff() > 0.0);
}

TEST_CASE("zero row sum field matches the Hopf-Lax oracle on 201 nodes") {
    const Datum phi = gaussian(-1.0, 0.0, 0.5);
    const InitialData data{{phi, phi}};
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const Grid grid = line_grid(-2.0, 2.0, 201);
    EvolveOptions opts = quick(8);
    opts.bolza.scan_points = 17;
    const ValueField field = evolve_field(0.5, data, kSwap, set, grid, opts);
    double worst = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
        const double oracle = hopf_lax_scan(phi, 0.5, grid.node(k)(0));
        worst = std::max(worst, std::abs(field.values(0, k) - oracle));
        worst = std::max(worst, std::abs(field.values(1, k) - oracle));
    }
    CHECK(worst < 2e-3);
    CHECK(field.crosscheck_defect < 1e-6);
}

TEST_CASE("two formulations of the evolution agree") {
    const InitialData data{{gaussian(1.0, 0.0, 0.5), Datum{CosineData{0.4, vec1(2.0)}, 0.1}}};
    const LagrangianSet set{make_quadratic(1, 1.0, HarmonicPotential{0.5}), make_quartic(1, 0.1)};
    const CouplingMatrix a(mat2(0.5, -0.5, -1.0, 1.0));
    EvolveOptions opts = quick(60);
    opts.crosscheck_nodes = 4;
    const ValueField field = evolve_field(0.6, data, a, set, line_grid(-1, 1, 7), opts);
    CHECK(field.crosscheck_defect < 1e-6);
}

TEST_CASE("duality between positive and negative evolutions") {
    const InitialData data{{gaussian(1.0, 0.0, 0.5), gaussian(-0.6, 0.4, 0.6)}};
    const LagrangianSet set{make_quadratic(1, 1.0, HarmonicPotential{1.0}), make_quadratic(1, 1.0, HarmonicPotential{0.25})};
    const Grid grid = line_grid(-1.0, 1.0, 7);
    const double t = 0.5;
    EvolveOptions opts = quick(60);
    const ValueField direct = evolve_field_positive(t, data, kSwap, set, grid, opts, PositiveMethod::direct);
    const ValueField via_reversal = evolve_field_positive(t, data, kSwap, set, grid, opts, PositiveMethod::reversal);
    // T(-phi) for the reversed system: reversed Lagrangians, coupling -A.
    const ValueField negative = evolve_field(t, data.negated(), kSwap.negated(), reversed(set), grid, opts);
    CHECK((direct.values + negative.values).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((direct.values - via_reversal.values).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(direct.crosscheck_defect < 1e-6);
}

TEST_CASE("positive evolution of constant data") {
    const InitialData data{{Datum{ConstantData{1.0}}, Datum{ConstantData{0.0}}}};
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const double t = 0.5, e = std::exp(2 * t);
    for (auto method : {PositiveMethod::direct, PositiveMethod::reversal}) {
        const ValueField f = evolve_field_positive(t, data, kSwap, set, line_grid(-1, 1, 3), quick(), method);
        for (int k = 0; k < 3; ++k) {
            CHECK(f.values(0, k) == doctest::Approx(0.5 * (1 + e)).epsilon(1e-9));
            CHECK(f.values(1, k) == doctest::Approx(0.5 * (1 - e)).epsilon(1e-9));
        }
    }
}

TEST_CASE("differentiability identities in the free quadratic case") {
    const InitialData data{{Datum{QuadraticData{1.0}}}};
    const LagrangianSet set{make_quadratic(1)};
    const double t = 0.5;
    const Grid grid = line_grid(-1.0, 1.0, 21);
    const ValueField field = evolve_field(t, data, CouplingMatrix::zero(1), set, grid, quick());
    for (int k : {3, 10, 16}) {
        const double x = grid.node(k)(0);
        CHECK(std::abs(field.values(0, k) - x * x / (2 * (1 + t))) < 1e-8);
        DifferentiabilityOptions opts;
        opts.bolza.segments = 40;
        const auto r = differentiability_identities(field, k, 0, data, CouplingMatrix::zero(1), set, opts);
        REQUIRE_FALSE(r.skipped);
        CHECK(r.dx < 1e-6);
        CHECK(r.dt < 1e-5);
    }
    const auto edge = differentiability_identities(field, 0, 0, data, CouplingMatrix::zero(1), set);
    CHECK(edge.skipped);
}

TEST_CASE("differentiability identities in a smooth coupled regime") {
    const InitialData data{{Datum{QuadraticData{0.5}}, Datum{QuadraticData{1.0}, 0.2}}};
    const LagrangianSet set{make_quadratic(1, 1.0, HarmonicPotential{1.0}), make_quadratic(1, 1.0, HarmonicPotential{0.5})};
    const Grid grid = line_grid(-1.0, 1.0, 41);
    const ValueField field = evolve_field(0.3, data, kSwap, set, grid, quick(100));
    DifferentiabilityOptions opts;
    opts.bolza.segments = 100;
    for (int k : {8, 20, 31})
        for (int i = 0; i < 2; ++i) {
            const auto r = differentiability_identities(field, k, i, data, kSwap, set, opts);
            REQUIRE_FALSE(r.skipped);
            CHECK(r.dx < 1e-3);
            CHECK(r.dt_along < 1e-5);
            // The stated form differs by the coupling gap, which does not vanish here.
            CHECK(std::abs(r.dt - std::abs(r.coupling_gap)) < 1e-5);
        }
}

TEST_CASE("kinks from symmetric wells are flagged and skipped") {
    const InitialData data{{Datum{CosineData{1.0, vec1(M_PI)}}}};
    const LagrangianSet set{make_quadratic(1)};
    const Grid grid = line_grid(-1.0, 1.0, 21);
    const ValueField field = evolve_field(1.0, data, CouplingMatrix::zero(1), set, grid, quick());
    CHECK(field.multiple(0, 10) == 1);
    const auto r = differentiability_identities(field, 10, 0, data, CouplingMatrix::zero(1), set);
    CHECK(r.skipped);
    CHECK(r.notice.find("several") != std::string::npos);
}

TEST_CASE("field sweep does not depend on the thread count") {
    const InitialData data{{gaussian(1.0, 0.0, 0.5), gaussian(-0.5, 0.3, 0.4)}};
    const LagrangianSet set{make_quadratic(1), make_quartic(1, 0.2)};
    const Grid grid = line_grid(-1.0, 1.0, 9);
    EvolveOptions one = quick(), three = quick();
    three.threads = 3;
    const ValueField a = evolve_field(0.4, data, kSwap, set, grid, one);
    const ValueField b = evolve_field(0.4, data, kSwap, set, grid, three);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("value field csv round-trips") {
    const InitialData data{{gaussian(1.0, 0.0, 0.5), gaussian(-0.5, 0.3, 0.4)}};
    const LagrangianSet set{make_quadratic(1), make_quadratic(1)};
    const ValueField field = evolve_field(0.4, data, kSwap, set, line_grid(-1, 1, 5), quick(10));
    std::stringstream io;
    write_field_csv(io, field);
    const std::string text = io.str();
    CHECK(text.rfind("t,x1,u1,u2,z1_1,z2_1\n", 0) == 0);
    const ValueField back = read_field_csv(io);
    CHECK(back.time == field.time);
    CHECK((back.values - field.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.endpoints[1] - field.endpoints[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.grid.points()[0] == 5);

    std::stringstream bad("t,x1,u1\n0.5,0,1\n0.5,0.3,1\n0.5,1,2\n");
    CHECK_THROWS_AS(read_field_csv(bad), InvalidInputError);
}

TEST_CASE("grid geometry") {
    const Grid g(Vec::Zero(2), Vec::Ones(2), {3, 4});
    CHECK(g.size() == 12);
    CHECK(g.node(5)(0) == doctest::Approx(1.0));
    CHECK(g.node(5)(1) == doctest::Approx(1.0 / 3));
    CHECK(*g.neighbor(5, 1, 1) == 8);
    CHECK_FALSE(g.neighbor(5, 0, 1));
    const Grid d = g.dilated(2.0);
    CHECK(d.lo()(0) == doctest::Approx(-0.5));
    CHECK(d.hi()(1) == doctest::Approx(1.5));
    CHECK_THROWS_AS(Grid(Vec::Zero(1), Vec::Zero(1), {3}), InvalidInputError);
}
