#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hjweave/coupling.hpp"
#include "hjweave/types.hpp"

namespace hjweave {

/// Value and derivatives of L at one (x, v).
/// hess_vx(a, b) = d^2 L / dv_a dx_b.
struct LagrangianJet {
    double value = 0.0;
    Vec grad_x;
    Vec grad_v;
    Mat hess_vv;
    Mat hess_vx;
};

/// a + b nu^2 + c nu^4, nonnegative coefficients. Used for the superlinear
/// bounds theta0 / theta1.
struct GrowthPolynomial {
    double constant = 0.0;
    double quadratic = 0.0;
    double quartic = 0.0;

    double operator()(double nu) const {
        const double y = nu * nu;
        return constant + y * (quadratic + y * quartic);
    }
};

/// lo(nu) I <= D^2_v L <= hi(nu) I with lo, hi affine in nu^2.
struct HessianBound {
    double lo_constant = 1.0;
    double lo_quadratic = 0.0;
    double hi_constant = 1.0;
    double hi_quadratic = 0.0;
};

/// Analytic growth and convexity certificates, valid for |x| <= radius.
///   theta1(|v|) >= L(x, v) >= theta0(|v|) - c0,
///   theta1 <= c1_growth (1 + theta0),
///   sup_v lambda_max(D^2_v L) / lambda_min(D^2_v L) <= c2_hess.
struct Certificates {
    GrowthPolynomial theta0;
    GrowthPolynomial theta1;
    double c0 = 0.0;
    double c1_growth = 1.0;
    double c2_hess = 1.0;
    HessianBound hessian;
    double radius = 0.0;
};

/// Constants of the growth and convexity condition for a whole set, from the
/// analytic certificates at `radius`:
///   theta0 = coefficient-wise min, theta1 = coefficient-wise max, c0 = max,
///   c1_growth = sup theta1 / (1 + theta0),
///   c2_hess   = max over i != j of sup_nu hi_j(nu) / lo_i(nu), at least 1,
/// so that D^2_v L^j <= c2_hess D^2_v L^i for every pair. Suprema of
/// polynomial ratios are bounded by the largest coefficient ratio.
struct SetConstants {
    double c0 = 0.0;
    double c1_growth = 1.0;
    double c2_hess = 1.0;
};

/// A Tonelli Lagrangian L(x, v): C^2, strictly convex and superlinear in v.
class Lagrangian {
public:
    virtual ~Lagrangian() = default;

    virtual int dim() const = 0;
    virtual double value(const Vec& x, const Vec& v) const = 0;
    virtual LagrangianJet jet(const Vec& x, const Vec& v) const = 0;
    virtual Certificates certificates(double radius) const = 0;
    virtual std::string name() const = 0;
};

using LagrangianPtr = std::shared_ptr<const Lagrangian>;
using LagrangianSet = std::vector<LagrangianPtr>;

/// 1/2 <v, M v> with M symmetric positive definite.
struct QuadraticKinetic {
    Mat mass;
};

/// 1/2 |v|^2 + epsilon |v|^4, epsilon >= 0.
struct QuarticKinetic {
    double epsilon = 0.0;
};

struct ZeroPotential {};

/// 1/2 stiffness |x|^2; stiffness = omega^2 for the usual harmonic well.
struct HarmonicPotential {
    double stiffness = 1.0;
};

/// amplitude * cos(<wavevector, x>).
struct CosinePotential {
    double amplitude = 0.0;
    Vec wavevector;
};

using Kinetic = std::variant<QuadraticKinetic, QuarticKinetic>;
using Potential = std::variant<ZeroPotential, HarmonicPotential, CosinePotential>;

/// L(x, v) = K(v) + V(x).
class SeparableLagrangian final : public Lagrangian {
public:
    SeparableLagrangian(int dim, Kinetic kinetic, Potential potential);

    int dim() const override { return dim_; }
    double value(const Vec& x, const Vec& v) const override;
    LagrangianJet jet(const Vec& x, const Vec& v) const override;
    Certificates certificates(double radius) const override;
    std::string name() const override;

    const Kinetic& kinetic() const { return kinetic_; }
    const Potential& potential() const { return potential_; }

    double potential_value(const Vec& x) const;
    Vec potential_gradient(const Vec& x) const;

private:
    int dim_;
    Kinetic kinetic_;
    Potential potential_;
    double mass_lambda_min_ = 1.0;
    double mass_lambda_max_ = 1.0;
};

/// L(x, -v).
class ReversedLagrangian final : public Lagrangian {
public:
    explicit ReversedLagrangian(LagrangianPtr base);

    int dim() const override { return base_->dim(); }
    double value(const Vec& x, const Vec& v) const override;
    LagrangianJet jet(const Vec& x, const Vec& v) const override;
    Certificates certificates(double radius) const override { return base_->certificates(radius); }
    std::string name() const override { return "reversed(" + base_->name() + ")"; }

    const LagrangianPtr& base() const { return base_; }

private:
    LagrangianPtr base_;
};

/// Convenience constructors for the built-in families.
LagrangianPtr make_quadratic(int dim, double mass = 1.0, Potential potential = ZeroPotential{});
LagrangianPtr make_quadratic(Mat mass, Potential potential = ZeroPotential{});
LagrangianPtr make_quartic(int dim, double epsilon, Potential potential = ZeroPotential{});
LagrangianPtr reversed(LagrangianPtr base);
LagrangianSet reversed(const LagrangianSet& set);

/// Throws InvalidInputError unless the set is non-empty with one common dimension.
int common_dimension(const LagrangianSet& set);

/// Constants of the whole family: common theta0/theta1 bounds, c0, the growth
/// constant C1 and the Hessian domination constant C2 with
///   sum_j D^2 L^j <= C2 D^2 L^i  for every i.
/// Either constant is +infinity when no finite bound exists (e.g. a quartic
/// member dominated by a quadratic one).
struct FamilyConstants {
    GrowthPolynomial theta0;
    GrowthPolynomial theta1;
    double c0 = 0.0;
    double c1_growth = 1.0;
    double c2_hess = 1.0;
};

FamilyConstants family_constants(const LagrangianSet& set, double radius);

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
    /// Initial velocity; zero when unset.
    std::optional<Vec> initial;
};

struct LegendreResult {
    double value = 0.0;
    Vec argmax;
    int iterations = 0;
};

/// H(x, p) = sup_v { p.v - L(x, v) } by damped Newton (Armijo backtracking)
/// on p = L_v(x, v). Throws ConvergenceError carrying the last iterate.
LegendreResult legendre_transform(const Lagrangian& lagrangian, const Vec& x, const Vec& p,
                                  const NewtonOptions& options = {});

/// Hamiltonian interface consumed by the characteristic flows and the
/// finite-difference oracle.
class Hamiltonian {
public:
    virtual ~Hamiltonian() = default;
    virtual int dim() const = 0;
    virtual double value(const Vec& x, const Vec& p) const = 0;
    virtual Vec grad_p(const Vec& x, const Vec& p) const = 0;
    virtual Vec grad_x(const Vec& x, const Vec& p) const = 0;
};

using HamiltonianPtr = std::shared_ptr<const Hamiltonian>;

/// Legendre dual of a Lagrangian, evaluated numerically.
/// H_p = v*,  H_x = -L_x(x, v*).
class HamiltonianDual final : public Hamiltonian {
public:
    explicit HamiltonianDual(LagrangianPtr source, double tolerance = 1e-10,
                             int max_iterations = 100);

    int dim() const override { return source_->dim(); }
    double value(const Vec& x, const Vec& p) const override;
    Vec grad_p(const Vec& x, const Vec& p) const override;
    Vec grad_x(const Vec& x, const Vec& p) const override;

    LegendreResult solve(const Vec& x, const Vec& p) const;
    const LagrangianPtr& source() const { return source_; }

private:
    LagrangianPtr source_;
    NewtonOptions options_;
};

/// 1/2 <p, M^{-1} p> - V(x), the exact dual of a quadratic-kinetic separable
/// Lagrangian. Optionally evaluated at -p (dual of the reversed Lagrangian).
class QuadraticHamiltonian final : public Hamiltonian {
public:
    QuadraticHamiltonian(const SeparableLagrangian& source, bool reflect_momentum = false);

    int dim() const override { return static_cast<int>(inverse_mass_.rows()); }
    double value(const Vec& x, const Vec& p) const override;
    Vec grad_p(const Vec& x, const Vec& p) const override;
    Vec grad_x(const Vec& x, const Vec& p) const override;

private:
    Mat inverse_mass_;
    SeparableLagrangian source_;
    double sign_;
};

/// H(x, -p).
class ReflectedHamiltonian final : public Hamiltonian {
public:
    explicit ReflectedHamiltonian(HamiltonianPtr base) : base_(std::move(base)) {}
    int dim() const override { return base_->dim(); }
    double value(const Vec& x, const Vec& p) const override { return base_->value(x, -p); }
    Vec grad_p(const Vec& x, const Vec& p) const override { return -base_->grad_p(x, -p); }
    Vec grad_x(const Vec& x, const Vec& p) const override { return base_->grad_x(x, -p); }

private:
    HamiltonianPtr base_;
};

/// Closed form for quadratic-kinetic separable Lagrangians, Newton dual otherwise.
HamiltonianPtr make_hamiltonian(const LagrangianPtr& lagrangian);
std::vector<HamiltonianPtr> make_hamiltonians(const LagrangianSet& set);

/// L^i weighted by row i of d(s) = exp(A (s - t)):  sum_j d_ij(s) L^j(x, v).
class WeightedLagrangian {
public:
    WeightedLagrangian(int index, LagrangianSet lagrangians, Propagator propagator);

    int index() const { return index_; }
    const LagrangianSet& lagrangians() const { return lagrangians_; }
    const Propagator& propagator() const { return propagator_; }
    double horizon() const { return propagator_.horizon(); }

    /// Row i of d(s); DomainError for s outside [0, t].
    Vector weights(double s) const;

private:
    int index_;
    LagrangianSet lagrangians_;
    Propagator propagator_;
};

/// Each output is the d_ij(s)-weighted sum of the component jets.
LagrangianJet weighted_value_jet(const WeightedLagrangian& weighted, double s, const Vec& x,
                                 const Vec& v);

/// Sum of the jets of `lagrangians` with the given weights.
SetConstants set_constants(const LagrangianSet& lagrangians, double radius);

LagrangianJet combine_jets(const LagrangianSet& lagrangians, const Vector& weights, const Vec& x,
                           const Vec& v);

struct InfConvolutionResult {
    double value = 0.0;
    /// q_j = d_ij(s) L^j_v(x, v*); zero for dropped (zero-weight) terms.
    std::vector<Vec> splits;
    /// Common maximizer v* = H^j_p(x, q_j / d_ij(s)) for every kept j.
    Vec velocity;
    int iterations = 0;
};

/// Hamiltonian of the weighted Lagrangian, which is the inf-convolution
///   inf { sum_j d_ij H^j(x, q_j / d_ij) : sum_j q_j = p }.
/// Computed by Newton on p = sum_j d_ij L^j_v(x, v). Weights that are exactly
/// zero are dropped (q_j = 0); a negative weight raises PreconditionError.
InfConvolutionResult inf_convolution_hamiltonian(int index, const Propagator& propagator,
                                                 const LagrangianSet& lagrangians, double s,
                                                 const Vec& x, const Vec& p,
                                                 const NewtonOptions& options = {});

/// Same, with explicit weights instead of a propagator row.
InfConvolutionResult inf_convolution(const LagrangianSet& lagrangians, const Vector& weights,
                                     const Vec& x, const Vec& p,
                                     const NewtonOptions& options = {});

}  // namespace hjweave
