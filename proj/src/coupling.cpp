#include "hjweave/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

void validate_entries(const Matrix& entries) {
    if (entries.rows() == 0 || entries.rows() != entries.cols()) {
        std::ostringstream msg;
        msg << "coupling matrix must be square and non-empty, got " << entries.rows() << "x"
            << entries.cols();
        throw InvalidInputError(msg.str());
    }
    for (Eigen::Index i = 0; i < entries.rows(); ++i) {
        for (Eigen::Index j = 0; j < entries.cols(); ++j) {
            if (!std::isfinite(entries(i, j))) {
                std::ostringstream msg;
                msg << "coupling matrix entry (" << i << "," << j << ") is not finite";
                throw InvalidInputError(msg.str());
            }
        }
    }
}

// Edge i -> j whenever i != j and a_ij != 0.
std::vector<int> reachable(const Matrix& a, int from, bool transpose) {
    const int m = static_cast<int>(a.rows());
    std::vector<int> seen(m, 0);
    std::vector<int> queue{from};
    seen[from] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int v = queue[head];
        for (int w = 0; w < m; ++w) {
            if (w == v || seen[w]) continue;
            const double entry = transpose ? a(w, v) : a(v, w);
            if (entry != 0.0) {
                seen[w] = 1;
                queue.push_back(w);
            }
        }
    }
    return seen;
}

std::vector<std::vector<int>> strongly_connected_components(const Matrix& a) {
    const int m = static_cast<int>(a.rows());
    std::vector<int> assigned(m, 0);
    std::vector<std::vector<int>> components;
    for (int v = 0; v < m; ++v) {
        if (assigned[v]) continue;
        const auto forward = reachable(a, v, false);
        const auto backward = reachable(a, v, true);
        std::vector<int> component;
        for (int w = 0; w < m; ++w) {
            if (forward[w] && backward[w]) {
                component.push_back(w);
                assigned[w] = 1;
            }
        }
        components.push_back(std::move(component));
    }
    return components;
}

bool is_irreducible(const Matrix& a) {
    if (a.rows() == 1) {
        // A 1x1 matrix is reducible exactly when it is zero.
        return a(0, 0) != 0.0;
    }
    const auto forward = reachable(a, 0, false);
    const auto backward = reachable(a, 0, true);
    return std::all_of(forward.begin(), forward.end(), [](int s) { return s != 0; }) &&
           std::all_of(backward.begin(), backward.end(), [](int s) { return s != 0; });
}

bool is_cooperative(const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j && a(i, j) > 0.0) return false;
    return true;
}

// Pade coefficients for exp, degrees 3, 5, 7, 9, 13.
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                           302702400.0,   30270240.0,   2162160.0,
                                           110880.0,      3960.0,       90.0,
                                           1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};

// 1-norm thresholds below which the unscaled degree-k approximant is accurate
// to double precision.
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

template <std::size_t N>
Matrix pade_low(const Matrix& x, const std::array<double, N>& b) {
    const Eigen::Index m = x.rows();
    const Matrix id = Matrix::Identity(m, m);
    const Matrix x2 = x * x;
    Matrix power = id;
    Matrix u_inner = Matrix::Zero(m, m);
    Matrix v = Matrix::Zero(m, m);
    for (std::size_t k = 0; k < N; k += 2) {
        v += b[k] * power;
        if (k + 1 < N) u_inner += b[k + 1] * power;
        power = power * x2;
    }
    const Matrix u = x * u_inner;
    return (v - u).partialPivLu().solve(v + u);
}

Matrix pade13(const Matrix& x) {
    const auto& b = kPade13;
    const Eigen::Index m = x.rows();
    const Matrix id = Matrix::Identity(m, m);
    const Matrix x2 = x * x;
    const Matrix x4 = x2 * x2;
    const Matrix x6 = x4 * x2;
    const Matrix u_tail = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2);
    const Matrix u = x * (u_tail + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
    const Matrix v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                     b[2] * x2 + b[0] * id;
    return (v - u).partialPivLu().solve(v + u);
}

bool all_finite(const Matrix& x) { return x.allFinite(); }

}  // namespace

CouplingMatrix::CouplingMatrix(Matrix entries) : entries_(std::move(entries)) {
    validate_entries(entries_);
    cooperative_ = is_cooperative(entries_);
    irreducible_ = is_irreducible(entries_);
}

CouplingMatrix CouplingMatrix::zero(int m) { return CouplingMatrix(Matrix::Zero(m, m)); }

double CouplingMatrix::row_norm() const { return entries_.cwiseAbs().rowwise().sum().maxCoeff(); }

CertificationReport certify(const Matrix& entries) {
    validate_entries(entries);
    CertificationReport report;
    for (Eigen::Index i = 0; i < entries.rows(); ++i)
        for (Eigen::Index j = 0; j < entries.cols(); ++j)
            if (i != j && entries(i, j) > 0.0)
                report.violations.emplace_back(static_cast<int>(i), static_cast<int>(j));
    report.cooperative = report.violations.empty();
    report.irreducible = is_irreducible(entries);
    report.components = strongly_connected_components(entries);
    return report;
}

CertificationReport certify(const CouplingMatrix& a) { return certify(a.entries()); }

Matrix expm(const Matrix& x) {
    if (x.rows() != x.cols()) throw InvalidInputError("expm: matrix must be square");
    if (!all_finite(x)) throw RangeError("expm: non-finite argument");
    const Eigen::Index m = x.rows();
    if (m == 0) return x;
    const double norm = x.cwiseAbs().colwise().sum().maxCoeff();
    if (norm == 0.0) return Matrix::Identity(m, m);
    // exp overflows double well before this; refuse instead of squaring 1000+ times.
    if (norm > 1e4) throw RangeError("expm: |A tau| too large, result would overflow");

    if (norm <= kTheta3) return pade_low(x, kPade3);
    if (norm <= kTheta5) return pade_low(x, kPade5);
    if (norm <= kTheta7) return pade_low(x, kPade7);
    if (norm <= kTheta9) return pade_low(x, kPade9);

    const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
    Matrix result = pade13(x / std::ldexp(1.0, squarings));
    for (int k = 0; k < squarings; ++k) result = result * result;
    if (!all_finite(result)) throw RangeError("expm: result overflows double precision");
    return result;
}

Matrix matrix_exponential(const CouplingMatrix& a, double tau) {
    if (!std::isfinite(tau)) throw DomainError("matrix_exponential: tau must be finite");
    return expm(a.entries() * tau);
}

Matrix phi1(const Matrix& x) {
    const Eigen::Index m = x.rows();
    Matrix block = Matrix::Zero(2 * m, 2 * m);
    block.topLeftCorner(m, m) = x;
    block.topRightCorner(m, m) = Matrix::Identity(m, m);
    return expm(block).topRightCorner(m, m);
}

Propagator::Propagator(CouplingMatrix a, double horizon) : a_(std::move(a)), horizon_(horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw DomainError("propagator: horizon must be a finite t > 0");
    b_t_ = b(horizon_);
}

Matrix Propagator::b(double tau) const { return matrix_exponential(a_, -tau); }
Matrix Propagator::c(double tau) const { return matrix_exponential(a_, tau); }
Matrix Propagator::d(double s) const { return matrix_exponential(a_, s - horizon_); }

Propagator propagator(const CouplingMatrix& a, double t) { return Propagator(a, t); }

bool verify_positivity(const CouplingMatrix& a, std::span<const double> t_samples) {
    if (!a.cooperative() || !a.irreducible())
        throw PreconditionError(
            "verify_positivity: coupling must be cooperative and irreducible");
    for (double t : t_samples) {
        if (!(t > 0.0)) throw DomainError("verify_positivity: sample times must be > 0");
        if (matrix_exponential(a, -t).minCoeff() <= 0.0) return false;
    }
    return true;
}

double diagonal_margin(const Matrix& g, double c) {
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            if (j != i) off += std::abs(g(i, j));
        worst = std::min(worst, g(i, i) - c * off);
    }
    return worst;
}

double short_horizon(const CouplingMatrix& a, double c1_growth, double c2_hess, double kappa,
                     const HorizonOptions& options) {
    if (!(c1_growth >= 1.0) || !(c2_hess >= 1.0))
        throw DomainError("short_horizon: growth and Hessian constants must be >= 1");
    if (!(kappa > 0.0) || !(kappa < 1.0))
        throw DomainError("short_horizon: kappa must lie in (0, 1); the margin is 1 at tau = 0");
    if (options.samples < 1) throw DomainError("short_horizon: need at least one sample");

    // Larger constant gives the smaller margin, so one check covers both.
    const double c = std::max(c1_growth, c2_hess);
    auto holds = [&](double horizon) {
        for (int k = 0; k <= options.samples; ++k) {
            const double tau = -horizon * static_cast<double>(k) / options.samples;
            Matrix g;
            try {
                g = matrix_exponential(a, tau);
            } catch (const RangeError&) {
                return false;
            }
            if (diagonal_margin(g, c) < kappa) return false;
        }
        return true;
    };

    double good = 0.0;
    double bad = 1.0;
    if (holds(bad)) {
        good = bad;
        while (true) {
            bad = 2.0 * good;
            if (bad > options.search_cap) return kUnboundedHorizon;
            if (!holds(bad)) break;
            good = bad;
        }
    } else {
        while (bad > options.bisection_tolerance && !holds(bad / 2.0)) bad /= 2.0;
        if (bad <= options.bisection_tolerance) return 0.0;
        good = bad / 2.0;
    }
    while (bad - good > options.bisection_tolerance) {
        const double mid = 0.5 * (good + bad);
        if (holds(mid))
            good = mid;
        else
            bad = mid;
    }
    return good;
}

}  // namespace hjweave
