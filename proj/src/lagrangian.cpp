#include "hjweave/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Objective g(v) and its derivatives for the Newton solves below.
struct ConvexJet {
    double value = 0.0;
    Vec grad;
    Mat hess;
};

std::string format_vec(const Vec& v) {
    std::ostringstream out;
    out << "[";
    for (Eigen::Index k = 0; k < v.size(); ++k) out << (k ? ", " : "") << v(k);
    out << "]";
    return out.str();
}

// Minimizes a strictly convex g by damped Newton. `jet` returns value,
// gradient and Hessian; `value` returns only g. Stops once
// |grad|_inf <= tolerance * (1 + scale).
struct NewtonOutcome {
    Vec v;
    ConvexJet jet;
    int iterations = 0;
};

NewtonOutcome damped_newton(const std::function<ConvexJet(const Vec&)>& jet,
                            const std::function<double(const Vec&)>& value, Vec v,
                            double scale, const NewtonOptions& options, const char* what) {
    const double threshold = options.tolerance * (1.0 + scale);
    ConvexJet current = jet(v);
    for (int iter = 0; iter <= options.max_iterations; ++iter) {
        const double gnorm = current.grad.cwiseAbs().maxCoeff();
        if (gnorm <= threshold) return {v, current, iter};
        if (iter == options.max_iterations) break;

        Eigen::LDLT<Mat> ldlt(current.hess);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            (ldlt.vectorD().array() <= 0.0).any()) {
            std::ostringstream msg;
            msg << what << ": Hessian not positive definite at v = " << format_vec(v);
            throw ConvergenceError(msg.str());
        }
        const Vec step = ldlt.solve(-current.grad);
        const double slope = current.grad.dot(step);

        double alpha = 1.0;
        bool accepted = false;
        Vec trial = v + step;
        // Inside round-off the Armijo test is meaningless; take the full step.
        if (std::abs(slope) <= 1e-14 * (1.0 + std::abs(current.value))) {
            accepted = true;
        } else {
            for (int k = 0; k < 60; ++k) {
                trial = v + alpha * step;
                const double trial_value = value(trial);
                if (std::isfinite(trial_value) &&
                    trial_value <= current.value + 1e-4 * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << what << ": line search failed at v = " << format_vec(v)
                << ", |grad| = " << gnorm;
            throw ConvergenceError(msg.str());
        }
        v = trial;
        current = jet(v);
    }
    std::ostringstream msg;
    msg << what << ": no convergence in " << options.max_iterations
        << " iterations, last iterate v = " << format_vec(v)
        << ", |grad| = " << current.grad.cwiseAbs().maxCoeff();
    throw ConvergenceError(msg.str());
}

Vec zero_vec(int dim) { return Vec::Zero(dim); }

void check_state_dim(int dim) {
    if (dim < 1 || dim > kMaxStateDim) {
        std::ostringstream msg;
        msg << "state dimension must lie in [1, " << kMaxStateDim << "], got " << dim;
        throw InvalidInputError(msg.str());
    }
}

void check_dims(const Lagrangian& l, const Vec& x, const Vec& v) {
    if (x.size() != l.dim() || v.size() != l.dim())
        throw InvalidInputError("lagrangian: argument dimension does not match state dimension");
}

}  // namespace

// ---------------------------------------------------------------------------
// SeparableLagrangian

SeparableLagrangian::SeparableLagrangian(int dim, Kinetic kinetic, Potential potential)
    : dim_(dim), kinetic_(std::move(kinetic)), potential_(std::move(potential)) {
    check_state_dim(dim);
    std::visit(Overloaded{
                   [&](const QuadraticKinetic& k) {
                       if (k.mass.rows() != dim || k.mass.cols() != dim)
                           throw InvalidInputError("quadratic kinetic: mass matrix has wrong shape");
                       if (!k.mass.allFinite() || (k.mass - k.mass.transpose()).cwiseAbs().maxCoeff() >
                                                      1e-12 * (1.0 + k.mass.cwiseAbs().maxCoeff()))
                           throw InvalidInputError("quadratic kinetic: mass matrix must be symmetric");
                       Eigen::SelfAdjointEigenSolver<Mat> eig(k.mass);
                       mass_lambda_min_ = eig.eigenvalues().minCoeff();
                       mass_lambda_max_ = eig.eigenvalues().maxCoeff();
                       if (!(mass_lambda_min_ > 0.0))
                           throw InvalidInputError(
                               "quadratic kinetic: mass matrix must be positive definite");
                   },
                   [&](const QuarticKinetic& k) {
                       if (!(k.epsilon >= 0.0) || !std::isfinite(k.epsilon))
                           throw InvalidInputError("quartic kinetic: epsilon must be >= 0");
                   }},
               kinetic_);
    std::visit(Overloaded{[](const ZeroPotential&) {},
                          [](const HarmonicPotential& p) {
                              if (!std::isfinite(p.stiffness))
                                  throw InvalidInputError("harmonic potential: stiffness not finite");
                          },
                          [&](const CosinePotential& p) {
                              if (p.wavevector.size() != dim)
                                  throw InvalidInputError(
                                      "cosine potential: wavevector has wrong dimension");
                              if (!std::isfinite(p.amplitude) || !p.wavevector.allFinite())
                                  throw InvalidInputError("cosine potential: parameters not finite");
                          }},
               potential_);
}

double SeparableLagrangian::potential_value(const Vec& x) const {
    return std::visit(Overloaded{[](const ZeroPotential&) { return 0.0; },
                                 [&](const HarmonicPotential& p) {
                                     return 0.5 * p.stiffness * x.squaredNorm();
                                 },
                                 [&](const CosinePotential& p) {
                                     return p.amplitude * std::cos(p.wavevector.dot(x));
                                 }},
                      potential_);
}

Vec SeparableLagrangian::potential_gradient(const Vec& x) const {
    return std::visit(Overloaded{[&](const ZeroPotential&) -> Vec { return zero_vec(dim_); },
                                 [&](const HarmonicPotential& p) -> Vec { return p.stiffness * x; },
                                 [&](const CosinePotential& p) -> Vec {
                                     return -p.amplitude * std::sin(p.wavevector.dot(x)) *
                                            p.wavevector;
                                 }},
                      potential_);
}

double SeparableLagrangian::value(const Vec& x, const Vec& v) const {
    check_dims(*this, x, v);
    const double kinetic = std::visit(
        Overloaded{[&](const QuadraticKinetic& k) { return 0.5 * v.dot(k.mass * v); },
                   [&](const QuarticKinetic& k) {
                       const double nu2 = v.squaredNorm();
                       return 0.5 * nu2 + k.epsilon * nu2 * nu2;
                   }},
        kinetic_);
    return kinetic + potential_value(x);
}

LagrangianJet SeparableLagrangian::jet(const Vec& x, const Vec& v) const {
    check_dims(*this, x, v);
    LagrangianJet out;
    std::visit(Overloaded{[&](const QuadraticKinetic& k) {
                              out.grad_v = k.mass * v;
                              out.value = 0.5 * v.dot(out.grad_v);
                              out.hess_vv = k.mass;
                          },
                          [&](const QuarticKinetic& k) {
                              const double nu2 = v.squaredNorm();
                              const double factor = 1.0 + 4.0 * k.epsilon * nu2;
                              out.value = 0.5 * nu2 + k.epsilon * nu2 * nu2;
                              out.grad_v = factor * v;
                              out.hess_vv = factor * Mat::Identity(dim_, dim_) +
                                            8.0 * k.epsilon * v * v.transpose();
                          }},
               kinetic_);
    out.value += potential_value(x);
    out.grad_x = potential_gradient(x);
    out.hess_vx = Mat::Zero(dim_, dim_);
    return out;
}

Certificates SeparableLagrangian::certificates(double radius) const {
    Certificates cert;
    cert.radius = radius;
    auto [v_min, v_max] = std::visit(
        Overloaded{[](const ZeroPotential&) { return std::pair{0.0, 0.0}; },
                   [&](const HarmonicPotential& p) {
                       const double edge = 0.5 * p.stiffness * radius * radius;
                       return std::pair{std::min(0.0, edge), std::max(0.0, edge)};
                   },
                   [](const CosinePotential& p) {
                       return std::pair{-std::abs(p.amplitude), std::abs(p.amplitude)};
                   }},
        potential_);
    cert.c0 = std::max(0.0, -v_min);
    const double v_plus = std::max(0.0, v_max);

    std::visit(Overloaded{[&](const QuadraticKinetic&) {
                              cert.theta0 = {0.0, 0.5 * mass_lambda_min_, 0.0};
                              cert.theta1 = {v_plus, 0.5 * mass_lambda_max_, 0.0};
                              // (V+ + a y) / (1 + b y) is monotone in y: check both ends.
                              cert.c1_growth =
                                  std::max({1.0, v_plus, mass_lambda_max_ / mass_lambda_min_});
                              cert.c2_hess = mass_lambda_max_ / mass_lambda_min_;
                              cert.hessian = {mass_lambda_min_, 0.0, mass_lambda_max_, 0.0};
                          },
                          [&](const QuarticKinetic& k) {
                              cert.theta0 = {0.0, 0.5, k.epsilon};
                              cert.theta1 = {v_plus, 0.5, k.epsilon};
                              cert.c1_growth = std::max(1.0, v_plus);
                              cert.c2_hess = k.epsilon > 0.0 ? 3.0 : 1.0;
                              cert.hessian = {1.0, 4.0 * k.epsilon, 1.0, 12.0 * k.epsilon};
                          }},
               kinetic_);
    return cert;
}

std::string SeparableLagrangian::name() const {
    std::ostringstream out;
    std::visit(Overloaded{[&](const QuadraticKinetic&) { out << "quadratic"; },
                          [&](const QuarticKinetic& k) { out << "quartic(eps=" << k.epsilon << ")"; }},
               kinetic_);
    std::visit(Overloaded{[&](const ZeroPotential&) {},
                          [&](const HarmonicPotential& p) { out << "+harmonic(k=" << p.stiffness << ")"; },
                          [&](const CosinePotential& p) { out << "+cosine(a=" << p.amplitude << ")"; }},
               potential_);
    return out.str();
}

namespace {

// Upper bound of sup_y sum_k num_k y^k / sum_k den_k y^k over y >= 0.
double ratio_bound(std::initializer_list<double> num, std::initializer_list<double> den) {
    double out = 0.0;
    auto d = den.begin();
    for (double n : num) {
        const double dk = *d++;
        if (n == 0.0) continue;
        if (dk <= 0.0) return std::numeric_limits<double>::infinity();
        out = std::max(out, n / dk);
    }
    return out;
}

}  // namespace

SetConstants set_constants(const LagrangianSet& lagrangians, double radius) {
    if (lagrangians.empty()) throw InvalidInputError("set constants: empty Lagrangian set");
    std::vector<Certificates> certs;
    for (const auto& l : lagrangians) certs.push_back(l->certificates(radius));
    GrowthPolynomial theta0 = certs[0].theta0, theta1 = certs[0].theta1;
    SetConstants out;
    for (const auto& c : certs) {
        theta0 = {std::min(theta0.constant, c.theta0.constant), std::min(theta0.quadratic, c.theta0.quadratic),
                  std::min(theta0.quartic, c.theta0.quartic)};
        theta1 = {std::max(theta1.constant, c.theta1.constant), std::max(theta1.quadratic, c.theta1.quadratic),
                  std::max(theta1.quartic, c.theta1.quartic)};
        out.c0 = std::max(out.c0, c.c0);
    }
    out.c1_growth = std::max(1.0, ratio_bound({theta1.constant, theta1.quadratic, theta1.quartic},
                                              {1.0 + theta0.constant, theta0.quadratic, theta0.quartic}));
    for (std::size_t i = 0; i < certs.size(); ++i)
        for (std::size_t j = 0; j < certs.size(); ++j)
            if (i != j)
                out.c2_hess = std::max(out.c2_hess,
                                       ratio_bound({certs[j].hessian.hi_constant, certs[j].hessian.hi_quadratic},
                                                   {certs[i].hessian.lo_constant, certs[i].hessian.lo_quadratic}));
    return out;
}

// ---------------------------------------------------------------------------
// ReversedLagrangian

ReversedLagrangian::ReversedLagrangian(LagrangianPtr base) : base_(std::move(base)) {
    if (!base_) throw InvalidInputError("reversed lagrangian: null base");
}

double ReversedLagrangian::value(const Vec& x, const Vec& v) const { return base_->value(x, -v); }

LagrangianJet ReversedLagrangian::jet(const Vec& x, const Vec& v) const {
    LagrangianJet out = base_->jet(x, -v);
    out.grad_v = -out.grad_v;
    out.hess_vx = -out.hess_vx;
    return out;
}

LagrangianPtr make_quadratic(int dim, double mass, Potential potential) {
    check_state_dim(dim);
    return std::make_shared<SeparableLagrangian>(
        dim, QuadraticKinetic{mass * Mat::Identity(dim, dim)}, std::move(potential));
}

LagrangianPtr make_quadratic(Mat mass, Potential potential) {
    const int dim = static_cast<int>(mass.rows());
    return std::make_shared<SeparableLagrangian>(dim, QuadraticKinetic{std::move(mass)},
                                                 std::move(potential));
}

LagrangianPtr make_quartic(int dim, double epsilon, Potential potential) {
    return std::make_shared<SeparableLagrangian>(dim, QuarticKinetic{epsilon}, std::move(potential));
}

LagrangianPtr reversed(LagrangianPtr base) {
    if (auto rev = std::dynamic_pointer_cast<const ReversedLagrangian>(base)) return rev->base();
    return std::make_shared<ReversedLagrangian>(std::move(base));
}

LagrangianSet reversed(const LagrangianSet& set) {
    LagrangianSet out;
    out.reserve(set.size());
    for (const auto& l : set) out.push_back(reversed(l));
    return out;
}

int common_dimension(const LagrangianSet& set) {
    if (set.empty()) throw InvalidInputError("lagrangian set is empty");
    const int dim = set.front()->dim();
    for (const auto& l : set) {
        if (!l) throw InvalidInputError("lagrangian set contains a null entry");
        if (l->dim() != dim) {
            std::ostringstream msg;
            msg << "lagrangian dimensions differ: " << dim << " vs " << l->dim();
            throw InvalidInputError(msg.str());
        }
    }
    return dim;
}

FamilyConstants family_constants(const LagrangianSet& set, double radius) {
    common_dimension(set);
    FamilyConstants out;
    std::vector<Certificates> certs;
    for (const auto& l : set) certs.push_back(l->certificates(radius));

    out.theta0 = {0.0, kInf, kInf};
    out.theta1 = {0.0, 0.0, 0.0};
    for (const auto& c : certs) {
        out.theta0.quadratic = std::min(out.theta0.quadratic, c.theta0.quadratic);
        out.theta0.quartic = std::min(out.theta0.quartic, c.theta0.quartic);
        out.theta1.constant = std::max(out.theta1.constant, c.theta1.constant);
        out.theta1.quadratic = std::max(out.theta1.quadratic, c.theta1.quadratic);
        out.theta1.quartic = std::max(out.theta1.quartic, c.theta1.quartic);
        out.c0 = std::max(out.c0, c.c0);
    }

    // C1 = sup_y (G + A1 y + B1 y^2) / (1 + A0 y + B0 y^2), y = nu^2.
    const double g = out.theta1.constant;
    const double a1 = out.theta1.quadratic, b1 = out.theta1.quartic;
    const double a0 = out.theta0.quadratic, b0 = out.theta0.quartic;
    if ((b1 > 0.0 && b0 == 0.0) || (a1 > 0.0 && a0 == 0.0 && b0 == 0.0)) {
        out.c1_growth = kInf;
    } else {
        double sup = std::max(1.0, g);
        if (b0 > 0.0)
            sup = std::max(sup, b1 / b0);
        else
            sup = std::max(sup, a1 / a0);
        for (int k = 0; k <= 4000; ++k) {
            const double y = std::pow(10.0, -8.0 + 16.0 * k / 4000.0);
            sup = std::max(sup, (g + y * (a1 + y * b1)) / (1.0 + y * (a0 + y * b0)));
        }
        out.c1_growth = sup;
    }

    // C2 = max_i sup_y (sum_j hi_j(y)) / lo_i(y); linear-fractional, so ends suffice.
    double hc = 0.0, hq = 0.0;
    for (const auto& c : certs) {
        hc += c.hessian.hi_constant;
        hq += c.hessian.hi_quadratic;
    }
    double c2 = 1.0;
    for (const auto& c : certs) {
        c2 = std::max(c2, hc / c.hessian.lo_constant);
        if (c.hessian.lo_quadratic > 0.0)
            c2 = std::max(c2, hq / c.hessian.lo_quadratic);
        else if (hq > 0.0)
            c2 = kInf;
    }
    out.c2_hess = c2;
    return out;
}

// ---------------------------------------------------------------------------
// Legendre transform and Hamiltonians

LegendreResult legendre_transform(const Lagrangian& lagrangian, const Vec& x, const Vec& p,
                                  const NewtonOptions& options) {
    const int dim = lagrangian.dim();
    if (x.size() != dim || p.size() != dim)
        throw InvalidInputError("legendre_transform: argument dimension mismatch");
    auto jet = [&](const Vec& v) {
        const LagrangianJet j = lagrangian.jet(x, v);
        return ConvexJet{j.value - p.dot(v), j.grad_v - p, j.hess_vv};
    };
    auto value = [&](const Vec& v) { return lagrangian.value(x, v) - p.dot(v); };
    Vec start = options.initial ? *options.initial : zero_vec(dim);
    auto outcome = damped_newton(jet, value, std::move(start), p.cwiseAbs().maxCoeff(), options,
                                 "legendre_transform");
    return {-outcome.jet.value, outcome.v, outcome.iterations};
}

HamiltonianDual::HamiltonianDual(LagrangianPtr source, double tolerance, int max_iterations)
    : source_(std::move(source)) {
    if (!source_) throw InvalidInputError("hamiltonian dual: null lagrangian");
    options_.tolerance = tolerance;
    options_.max_iterations = max_iterations;
}

LegendreResult HamiltonianDual::solve(const Vec& x, const Vec& p) const {
    return legendre_transform(*source_, x, p, options_);
}

double HamiltonianDual::value(const Vec& x, const Vec& p) const { return solve(x, p).value; }
Vec HamiltonianDual::grad_p(const Vec& x, const Vec& p) const { return solve(x, p).argmax; }
Vec HamiltonianDual::grad_x(const Vec& x, const Vec& p) const {
    return -source_->jet(x, solve(x, p).argmax).grad_x;
}

QuadraticHamiltonian::QuadraticHamiltonian(const SeparableLagrangian& source, bool reflect_momentum)
    : source_(source), sign_(reflect_momentum ? -1.0 : 1.0) {
    const auto* kinetic = std::get_if<QuadraticKinetic>(&source.kinetic());
    if (!kinetic) throw InvalidInputError("quadratic hamiltonian: source kinetic is not quadratic");
    inverse_mass_ = kinetic->mass.inverse();
}

double QuadraticHamiltonian::value(const Vec& x, const Vec& p) const {
    const Vec q = sign_ * p;
    return 0.5 * q.dot(inverse_mass_ * q) - source_.potential_value(x);
}

Vec QuadraticHamiltonian::grad_p(const Vec& /*x*/, const Vec& p) const { return inverse_mass_ * p; }

Vec QuadraticHamiltonian::grad_x(const Vec& x, const Vec& /*p*/) const {
    return -source_.potential_gradient(x);
}

HamiltonianPtr make_hamiltonian(const LagrangianPtr& lagrangian) {
    if (auto sep = std::dynamic_pointer_cast<const SeparableLagrangian>(lagrangian)) {
        if (std::holds_alternative<QuadraticKinetic>(sep->kinetic()))
            return std::make_shared<QuadraticHamiltonian>(*sep);
    }
    if (auto rev = std::dynamic_pointer_cast<const ReversedLagrangian>(lagrangian)) {
        if (auto sep = std::dynamic_pointer_cast<const SeparableLagrangian>(rev->base())) {
            if (std::holds_alternative<QuadraticKinetic>(sep->kinetic()))
                return std::make_shared<QuadraticHamiltonian>(*sep, true);
        }
    }
    return std::make_shared<HamiltonianDual>(lagrangian);
}

std::vector<HamiltonianPtr> make_hamiltonians(const LagrangianSet& set) {
    std::vector<HamiltonianPtr> out;
    out.reserve(set.size());
    for (const auto& l : set) out.push_back(make_hamiltonian(l));
    return out;
}

// ---------------------------------------------------------------------------
// Weighted Lagrangians and inf-convolution Hamiltonians

WeightedLagrangian::WeightedLagrangian(int index, LagrangianSet lagrangians, Propagator propagator)
    : index_(index), lagrangians_(std::move(lagrangians)), propagator_(std::move(propagator)) {
    common_dimension(lagrangians_);
    if (static_cast<int>(lagrangians_.size()) != propagator_.size())
        throw InvalidInputError("weighted lagrangian: number of lagrangians differs from coupling size");
    if (index_ < 0 || index_ >= propagator_.size())
        throw InvalidInputError("weighted lagrangian: index out of range");
}

Vector WeightedLagrangian::weights(double s) const {
    const double t = horizon();
    const double slack = 1e-12 * t;
    if (!(s >= -slack && s <= t + slack)) {
        std::ostringstream msg;
        msg << "weighted lagrangian: s = " << s << " outside [0, " << t << "]";
        throw DomainError(msg.str());
    }
    return propagator_.d(std::clamp(s, 0.0, t)).row(index_).transpose();
}

LagrangianJet combine_jets(const LagrangianSet& lagrangians, const Vector& weights, const Vec& x,
                           const Vec& v) {
    const int dim = static_cast<int>(x.size());
    LagrangianJet out;
    out.value = 0.0;
    out.grad_x = Vec::Zero(dim);
    out.grad_v = Vec::Zero(dim);
    out.hess_vv = Mat::Zero(dim, dim);
    out.hess_vx = Mat::Zero(dim, dim);
    for (std::size_t j = 0; j < lagrangians.size(); ++j) {
        const double w = weights(static_cast<Eigen::Index>(j));
        if (w == 0.0) continue;
        const LagrangianJet jj = lagrangians[j]->jet(x, v);
        out.value += w * jj.value;
        out.grad_x += w * jj.grad_x;
        out.grad_v += w * jj.grad_v;
        out.hess_vv += w * jj.hess_vv;
        out.hess_vx += w * jj.hess_vx;
    }
    return out;
}

LagrangianJet weighted_value_jet(const WeightedLagrangian& weighted, double s, const Vec& x,
                                 const Vec& v) {
    return combine_jets(weighted.lagrangians(), weighted.weights(s), x, v);
}

InfConvolutionResult inf_convolution(const LagrangianSet& lagrangians, const Vector& weights,
                                     const Vec& x, const Vec& p, const NewtonOptions& options) {
    const int dim = common_dimension(lagrangians);
    if (weights.size() != static_cast<Eigen::Index>(lagrangians.size()))
        throw InvalidInputError("inf_convolution: weight count differs from lagrangian count");
    if (x.size() != dim || p.size() != dim)
        throw InvalidInputError("inf_convolution: argument dimension mismatch");
    bool any = false;
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        if (weights(j) < 0.0) {
            std::ostringstream msg;
            msg << "inf_convolution: weight " << j << " = " << weights(j) << " is negative";
            throw PreconditionError(msg.str());
        }
        any = any || weights(j) > 0.0;
    }
    if (!any) throw PreconditionError("inf_convolution: all weights vanish");

    auto jet = [&](const Vec& v) {
        const LagrangianJet j = combine_jets(lagrangians, weights, x, v);
        return ConvexJet{j.value - p.dot(v), j.grad_v - p, j.hess_vv};
    };
    auto value = [&](const Vec& v) {
        double total = -p.dot(v);
        for (std::size_t j = 0; j < lagrangians.size(); ++j) {
            const double w = weights(static_cast<Eigen::Index>(j));
            if (w != 0.0) total += w * lagrangians[j]->value(x, v);
        }
        return total;
    };
    Vec start = options.initial ? *options.initial : zero_vec(dim);
    auto outcome = damped_newton(jet, value, std::move(start), p.cwiseAbs().maxCoeff(), options,
                                 "inf_convolution_hamiltonian");

    InfConvolutionResult result;
    result.value = -outcome.jet.value;
    result.velocity = outcome.v;
    result.iterations = outcome.iterations;
    result.splits.reserve(lagrangians.size());
    for (std::size_t j = 0; j < lagrangians.size(); ++j) {
        const double w = weights(static_cast<Eigen::Index>(j));
        if (w == 0.0)
            result.splits.push_back(zero_vec(dim));
        else
            result.splits.push_back(w * lagrangians[j]->jet(x, outcome.v).grad_v);
    }
    return result;
}

InfConvolutionResult inf_convolution_hamiltonian(int index, const Propagator& propagator,
                                                 const LagrangianSet& lagrangians, double s,
                                                 const Vec& x, const Vec& p,
                                                 const NewtonOptions& options) {
    const WeightedLagrangian weighted(index, lagrangians, propagator);
    return inf_convolution(lagrangians, weighted.weights(s), x, p, options);
}

}  // namespace hjweave
