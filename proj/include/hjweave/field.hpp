#pragma once

#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "hjweave/types.hpp"

namespace hjweave {

struct ConstantData {
    double value = 0.0;
};

/// amplitude * exp(-|x - center|^2 / (2 sigma^2)).
struct GaussianData {
    double amplitude = 1.0;
    Vec center;
    double sigma = 1.0;
};

/// amplitude * cos(<wavevector, x>).
struct CosineData {
    double amplitude = 1.0;
    Vec wavevector;
};

/// 1/2 kappa |x|^2. Coercive, so outside the bounded class; closed-form tests only.
struct QuadraticData {
    double kappa = 1.0;
};

using DataFamily = std::variant<ConstantData, GaussianData, CosineData, QuadraticData>;

/// One component phi_i = family + offset.
struct Datum {
    DataFamily family;
    double offset = 0.0;

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    /// Bounded and uniformly continuous on R^d.
    bool bounded_uniformly_continuous() const;
};

struct InitialData {
    std::vector<Datum> components;

    int size() const { return static_cast<int>(components.size()); }
    Vector values(const Vec& x) const;
    bool bounded_uniformly_continuous() const;
    /// -phi, component-wise.
    InitialData negated() const;
    /// phi + c.
    InitialData shifted(const Vector& c) const;
};

/// Uniform Cartesian box; node k has multi-index with axis 0 varying fastest.
class Grid {
public:
    Grid(Vec lo, Vec hi, std::vector<int> points);

    int dim() const { return static_cast<int>(lo_.size()); }
    int size() const { return size_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    const std::vector<int>& points() const { return points_; }
    double spacing(int axis) const;

    Vec node(int k) const;
    std::vector<int> multi_index(int k) const;
    int flat_index(const std::vector<int>& multi) const;
    /// Neighbor of node k shifted by `offset` along `axis`; nullopt off the grid.
    std::optional<int> neighbor(int k, int axis, int offset) const;

    /// Box with the same center and every half-width scaled by `factor`.
    Grid dilated(double factor) const;

private:
    Vec lo_, hi_;
    std::vector<int> points_;
    int size_;
};

/// Values u^i(t, x_k) for every component i and grid node k.
struct ValueField {
    Grid grid;
    double time = 0.0;
    /// m x nodes.
    Matrix values;
    /// Optional minimizing endpoints: endpoints[i] is dim x nodes.
    std::vector<Eigen::MatrixXd> endpoints;
    /// multiple(i, k) != 0 when node k of component i has several minimizers.
    Eigen::MatrixXi multiple;
    /// Largest disagreement between the two formulations on the checked nodes.
    double crosscheck_defect = 0.0;

    int components() const { return static_cast<int>(values.rows()); }
};

/// Header `t,x1..xd,u1..um` followed by `z<i>_<d>` columns when endpoints are set.
void write_field_csv(std::ostream& out, const ValueField& field);
ValueField read_field_csv(std::istream& in);

}  // namespace hjweave
