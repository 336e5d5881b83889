#pragma once

#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "hjweave/types.hpp"

namespace hjweave {

/// Square matrix A = (a_ij) coupling the m equations through the zero-order
/// term sum_j a_ij u_j. Entries are validated on construction (square,
/// finite, m >= 1); certification flags are computed once.
class CouplingMatrix {
public:
    explicit CouplingMatrix(Matrix entries);

    static CouplingMatrix zero(int m);

    int size() const { return static_cast<int>(entries_.rows()); }
    const Matrix& entries() const { return entries_; }
    double operator()(int i, int j) const { return entries_(i, j); }

    /// a_ij <= 0 for every i != j.
    bool cooperative() const { return cooperative_; }
    /// Off-diagonal sparsity graph strongly connected.
    bool irreducible() const { return irreducible_; }

    /// Maximum absolute row sum.
    double row_norm() const;

    CouplingMatrix negated() const { return CouplingMatrix(-entries_); }

private:
    Matrix entries_;
    bool cooperative_ = false;
    bool irreducible_ = false;
};

struct CertificationReport {
    bool cooperative = false;
    bool irreducible = false;
    /// Off-diagonal (i, j) with a_ij > 0, zero-based, row-major order.
    std::vector<std::pair<int, int>> violations;
    /// Strongly connected components of the off-diagonal graph, each sorted,
    /// ordered by smallest member.
    std::vector<std::vector<int>> components;
};

/// Validates the raw matrix and reports cooperativity/irreducibility.
/// Throws InvalidInputError for non-square or non-finite input.
CertificationReport certify(const Matrix& entries);
CertificationReport certify(const CouplingMatrix& a);

/// exp(X) by scaling and squaring with a Pade approximant (degree chosen
/// from the 1-norm, up to 13). Throws RangeError when the result overflows.
Matrix expm(const Matrix& x);

/// exp(A * tau).
Matrix matrix_exponential(const CouplingMatrix& a, double tau);

/// phi_1(X) = sum_k X^k / (k+1)!, so that  int_0^h exp(A r) dr = h * phi_1(A h).
/// Evaluated through the exponential of the augmented block [[X, I], [0, 0]].
Matrix phi1(const Matrix& x);

/// b(tau) = exp(-A tau), c(tau) = exp(A tau), d(s) = exp(A (s - t)) for a
/// fixed horizon t > 0. d(s) is formed as b(t) c(s).
class Propagator {
public:
    Propagator(CouplingMatrix a, double horizon);

    double horizon() const { return horizon_; }
    const CouplingMatrix& coupling() const { return a_; }
    int size() const { return a_.size(); }

    Matrix b(double tau) const;
    Matrix c(double tau) const;
    Matrix d(double s) const;

    /// b(t), cached.
    const Matrix& b_horizon() const { return b_t_; }

private:
    CouplingMatrix a_;
    double horizon_;
    Matrix b_t_;
};

/// Throws DomainError for t <= 0.
Propagator propagator(const CouplingMatrix& a, double t);

/// True iff every entry of exp(-A t) is strictly positive at every sample.
/// Requires A cooperative and irreducible (PreconditionError otherwise) and
/// every sample t > 0 (DomainError otherwise).
bool verify_positivity(const CouplingMatrix& a, std::span<const double> t_samples);

/// min_i [ g_ii - C sum_{j != i} |g_ij| ] with g = exp(A tau).
double diagonal_margin(const Matrix& g, double c);

struct HorizonOptions {
    /// Uniform tau-samples per margin evaluation on [-T, 0] (both ends included).
    int samples = 1024;
    double bisection_tolerance = 1e-6;
    /// Doubling stops here; beyond it the horizon is reported as unbounded.
    double search_cap = 1e3;
};

/// Sentinel returned when the margin never drops below kappa up to the cap.
inline constexpr double kUnboundedHorizon = std::numeric_limits<double>::infinity();

/// Largest T such that, for every tau in [-T, 0], both
///   g_ii(tau) - c1 sum_{j!=i} |g_ij(tau)| >= kappa  and the same with c2,
/// where g = exp(A tau). Bracketing by doubling then bisection.
/// Requires c1, c2 >= 1 and kappa in (0, 1) (DomainError otherwise).
double short_horizon(const CouplingMatrix& a, double c1_growth, double c2_hess, double kappa,
                     const HorizonOptions& options = {});

}  // namespace hjweave
