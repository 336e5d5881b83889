#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "hjweave/coupling.hpp"
#include "hjweave/errors.hpp"

using namespace hjweave;

namespace {

Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

// exp of a symmetric matrix through its eigendecomposition.
Matrix expm_symmetric(const Matrix& x) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(x);
    return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
           eig.eigenvectors().transpose();
}

// Truncated Taylor series; accurate for small norms only.
Matrix expm_taylor(const Matrix& x, int terms = 40) {
    Matrix sum = Matrix::Identity(x.rows(), x.cols());
    Matrix term = sum;
    for (int k = 1; k < terms; ++k) {
        term = term * x / k;
        sum += term;
    }
    return sum;
}

Matrix random_cooperative(std::mt19937_64& rng, int m) {
    std::uniform_real_distribution<double> off(0.05, 1.0);
    std::uniform_real_distribution<double> diag(-1.0, 2.0);
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = i == j ? diag(rng) : -off(rng);
    return a;
}

double brute_force_horizon(const CouplingMatrix& a, double c, double kappa, double upper,
                           int samples) {
    // Scan tau from 0 downward; report the last tau before the margin fails.
    double last_good = 0.0;
    for (int k = 0; k <= samples; ++k) {
        const double tau = upper * k / samples;
        if (diagonal_margin(expm_symmetric(-a.entries() * tau), c) < kappa) return last_good;
        last_good = tau;
    }
    return upper;
}

}  // namespace

TEST_CASE("certify flags cooperative and irreducible couplings") {
    auto r1 = certify(mat2(1, -1, -1, 1));
    CHECK(r1.cooperative);
    CHECK(r1.irreducible);
    CHECK(r1.violations.empty());
    CHECK(r1.components.size() == 1);

    auto r2 = certify(mat2(0, 1, 0, 0));
    CHECK_FALSE(r2.cooperative);
    CHECK_FALSE(r2.irreducible);
    REQUIRE(r2.violations.size() == 1);
    CHECK(r2.violations[0] == std::pair<int, int>{0, 1});
    CHECK(r2.components.size() == 2);

    Matrix cycle(3, 3);
    cycle << 1, -1, 0, 0, 1, -1, -1, 0, 1;
    auto r3 = certify(cycle);
    CHECK(r3.cooperative);
    CHECK(r3.irreducible);
}

TEST_CASE("certify rejects malformed input") {
    CHECK_THROWS_AS(certify(Matrix(2, 3)), InvalidInputError);
    CHECK_THROWS_AS(certify(mat2(1, NAN, 0, 1)), InvalidInputError);
    CHECK_THROWS_AS(CouplingMatrix(mat2(INFINITY, 0, 0, 1)), InvalidInputError);
}

TEST_CASE("matrix exponential closed forms") {
    CHECK((matrix_exponential(CouplingMatrix::zero(3), 2.5) - Matrix::Identity(3, 3)).norm() == 0.0);

    const CouplingMatrix a(mat2(1, -1, -1, 1));
    const Matrix e = matrix_exponential(a, -1.0);
    const double q = std::exp(-2.0);
    CHECK(e(0, 0) == doctest::Approx(0.5 * (1 + q)).epsilon(1e-14));
    CHECK(e(0, 1) == doctest::Approx(0.5 * (1 - q)).epsilon(1e-14));
    CHECK(e(0, 0) == doctest::Approx(0.56767).epsilon(1e-5));
    CHECK(e(0, 1) == doctest::Approx(0.43233).epsilon(1e-5));

    Matrix diag = Matrix::Zero(3, 3);
    diag.diagonal() << -0.7, 0.0, 1.3;
    const Matrix ed = matrix_exponential(CouplingMatrix(diag), 1.7);
    for (int i = 0; i < 3; ++i)
        CHECK(ed(i, i) == doctest::Approx(std::exp(diag(i, i) * 1.7)).epsilon(1e-14));
    CHECK(std::abs(ed(0, 1)) == 0.0);
}

TEST_CASE("matrix exponential agrees with independent oracles") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix x(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) x(i, j) = 3.0 * u(rng);
        const Matrix sym = 0.5 * (x + x.transpose());
        const Matrix ref = expm_symmetric(sym);
        CHECK((expm(sym) - ref).norm() <= 1e-12 * ref.norm());

        const Matrix small = 0.1 * x;
        const Matrix taylor = expm_taylor(small);
        CHECK((expm(small) - taylor).norm() <= 1e-13 * taylor.norm());
    }
}

TEST_CASE("exponential group law and inverse identity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> time(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix x(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) x(i, j) = u(rng);
        x *= 5.0 / x.cwiseAbs().rowwise().sum().maxCoeff();
        const CouplingMatrix a(x);
        const double s = time(rng), t = time(rng);
        const Matrix lhs = matrix_exponential(a, s + t);
        const Matrix rhs = matrix_exponential(a, s) * matrix_exponential(a, t);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, lhs.cwiseAbs().maxCoeff()));

        const Propagator p(a, 1.0);
        const double tau = time(rng);
        CHECK((p.b(tau) * p.c(tau) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("exponential refuses overflowing arguments") {
    CHECK_THROWS_AS(expm(Matrix::Constant(2, 2, 1e5)), RangeError);
    CHECK_THROWS_AS(matrix_exponential(CouplingMatrix(mat2(800, 0, 0, 0)), 1.0), RangeError);
}

TEST_CASE("phi1 integrates the exponential") {
    const Matrix x = mat2(0.3, -0.2, 0.1, -0.4);
    // Trapezoid-free check: phi1(X) X + I = exp(X).
    CHECK((phi1(x) * x + Matrix::Identity(2, 2) - expm(x)).norm() < 1e-14);
    CHECK((phi1(Matrix::Zero(2, 2)) - Matrix::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("propagator coefficients") {
    const Propagator zero(CouplingMatrix::zero(2), 1.0);
    CHECK((zero.b(0.3) - Matrix::Identity(2, 2)).norm() == 0.0);
    CHECK((zero.d(0.4) - Matrix::Identity(2, 2)).norm() == 0.0);

    const CouplingMatrix a(mat2(1, -1, -1, 1));
    const Propagator p(a, 1.0);
    CHECK(p.b(1.0).minCoeff() > 0.0);
    CHECK((p.d(1.0) - Matrix::Identity(2, 2)).norm() < 1e-14);
    CHECK((p.d(0.3) - p.b(1.0) * p.c(0.3)).norm() < 1e-15);
    CHECK((p.d(0.3) - matrix_exponential(a, 0.3 - 1.0)).norm() < 1e-14);

    // db/dtau = -A b.
    const double h = 1e-5;
    for (double tau : {0.1, 0.5, 1.3}) {
        const Matrix deriv = (p.b(tau + h) - p.b(tau - h)) / (2 * h);
        CHECK((deriv + a.entries() * p.b(tau)).cwiseAbs().maxCoeff() < 1e-8);
    }

    CHECK_THROWS_AS(Propagator(a, 0.0), DomainError);
    CHECK_THROWS_AS(propagator(a, -1.0), DomainError);
}

TEST_CASE("inverse identity over random cooperative matrices") {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const CouplingMatrix a(random_cooperative(rng, 3));
        const Propagator p(a, 1.0);
        worst = std::max(worst, (p.b_horizon() * p.c(1.0) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("positivity of exp(-A t) for cooperative irreducible couplings") {
    const std::vector<double> times{0.01, 0.1, 1.0, 10.0};
    CHECK(verify_positivity(CouplingMatrix(mat2(1, -1, -1, 1)), times));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const CouplingMatrix a(random_cooperative(rng, 4));
        REQUIRE(a.cooperative());
        REQUIRE(a.irreducible());
        CHECK(verify_positivity(a, times));
    }

    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(verify_positivity(CouplingMatrix(mat2(1, 0, 0, 1)), one), PreconditionError);
    CHECK_THROWS_AS(verify_positivity(CouplingMatrix(mat2(0, 1, 1, 0)), one), PreconditionError);
    const std::vector<double> bad{0.0};
    CHECK_THROWS_AS(verify_positivity(CouplingMatrix(mat2(1, -1, -1, 1)), bad), DomainError);
}

TEST_CASE("short horizon") {
    CHECK(short_horizon(CouplingMatrix::zero(2), 1.0, 1.0, 0.5) == kUnboundedHorizon);

    // margin cosh - |sinh| = e^{-|tau|}: equals 0.1 at ln 10.
    const double swap = short_horizon(CouplingMatrix(mat2(0, 1, 1, 0)), 1.0, 1.0, 0.1);
    CHECK(swap == doctest::Approx(std::log(10.0)).epsilon(1e-6));
    CHECK(std::abs(swap - std::log(10.0)) < 2e-6);

    const CouplingMatrix coop(mat2(1, -1, -1, 1));
    const double t_bar = short_horizon(coop, 1.0, 1.0, 0.5);
    const double brute = brute_force_horizon(coop, 1.0, 0.5, 2.0 * t_bar, 100000);
    CHECK(std::abs(t_bar - brute) < 1e-5);

    CHECK_THROWS_AS(short_horizon(coop, 1.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(short_horizon(coop, 0.5, 1.0, 0.5), DomainError);
}

TEST_CASE("short horizon is monotone in C and kappa") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix x(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) x(i, j) = u(rng);
        const CouplingMatrix a(x);
        double previous = kUnboundedHorizon;
        for (double c : {1.0, 1.5, 3.0}) {
            const double t = short_horizon(a, c, 1.0, 0.3);
            CHECK(t <= previous + 1e-6);
            previous = t;
        }
        previous = kUnboundedHorizon;
        for (double kappa : {0.1, 0.4, 0.8}) {
            const double t = short_horizon(a, 1.0, 1.0, kappa);
            CHECK(t <= previous + 1e-6);
            previous = t;
        }
    }
}
