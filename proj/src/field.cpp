#include "hjweave/field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hjweave/csv.hpp"
#include "hjweave/errors.hpp"

namespace hjweave {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_width(const Vec& v, const Vec& x, const char* what) {
    if (v.size() != x.size()) {
        std::ostringstream msg;
        msg << what << " has dimension " << v.size() << ", point has " << x.size();
        throw InvalidInputError(msg.str());
    }
}

}  // namespace

double Datum::value(const Vec& x) const {
    const double base = std::visit(
        Overloaded{
            [](const ConstantData& d) { return d.value; },
            [&](const GaussianData& d) {
                check_width(d.center, x, "gaussian center");
                return d.amplitude * std::exp(-(x - d.center).squaredNorm() / (2 * d.sigma * d.sigma));
            },
            [&](const CosineData& d) {
                check_width(d.wavevector, x, "cosine wavevector");
                return d.amplitude * std::cos(d.wavevector.dot(x));
            },
            [&](const QuadraticData& d) { return 0.5 * d.kappa * x.squaredNorm(); },
        },
        family);
    return base + offset;
}

Vec Datum::gradient(const Vec& x) const {
    return std::visit(
        Overloaded{
            [&](const ConstantData&) -> Vec { return Vec::Zero(x.size()); },
            [&](const GaussianData& d) -> Vec {
                check_width(d.center, x, "gaussian center");
                const double s2 = d.sigma * d.sigma;
                const double g = d.amplitude * std::exp(-(x - d.center).squaredNorm() / (2 * s2));
                return -g * (x - d.center) / s2;
            },
            [&](const CosineData& d) -> Vec {
                check_width(d.wavevector, x, "cosine wavevector");
                return -d.amplitude * std::sin(d.wavevector.dot(x)) * d.wavevector;
            },
            [&](const QuadraticData& d) -> Vec { return d.kappa * x; },
        },
        family);
}

bool Datum::bounded_uniformly_continuous() const {
    return !std::holds_alternative<QuadraticData>(family) || std::get<QuadraticData>(family).kappa == 0.0;
}

Vector InitialData::values(const Vec& x) const {
    Vector out(size());
    for (int i = 0; i < size(); ++i) out(i) = components[i].value(x);
    return out;
}

bool InitialData::bounded_uniformly_continuous() const {
    return std::all_of(components.begin(), components.end(),
                       [](const Datum& d) { return d.bounded_uniformly_continuous(); });
}

InitialData InitialData::negated() const {
    InitialData out = *this;
    for (Datum& d : out.components) {
        std::visit(Overloaded{
                       [](ConstantData& c) { c.value = -c.value; },
                       [](GaussianData& g) { g.amplitude = -g.amplitude; },
                       [](CosineData& c) { c.amplitude = -c.amplitude; },
                       [](QuadraticData& q) { q.kappa = -q.kappa; },
                   },
                   d.family);
        d.offset = -d.offset;
    }
    return out;
}

InitialData InitialData::shifted(const Vector& c) const {
    if (c.size() != size()) throw InvalidInputError("shift length differs from component count");
    InitialData out = *this;
    for (int i = 0; i < size(); ++i) out.components[i].offset += c(i);
    return out;
}

Grid::Grid(Vec lo, Vec hi, std::vector<int> points)
    : lo_(std::move(lo)), hi_(std::move(hi)), points_(std::move(points)), size_(1) {
    if (lo_.size() == 0 || lo_.size() != hi_.size() ||
        static_cast<Eigen::Index>(points_.size()) != lo_.size())
        throw InvalidInputError("grid: bounds and point counts must share one dimension");
    for (int a = 0; a < dim(); ++a) {
        if (!std::isfinite(lo_(a)) || !std::isfinite(hi_(a)) || !(hi_(a) > lo_(a)))
            throw InvalidInputError("grid: every axis needs finite min < max");
        if (points_[a] < 2) throw InvalidInputError("grid: every axis needs at least two points");
        size_ *= points_[a];
    }
}

double Grid::spacing(int axis) const { return (hi_(axis) - lo_(axis)) / (points_[axis] - 1); }

std::vector<int> Grid::multi_index(int k) const {
    std::vector<int> out(dim());
    for (int a = 0; a < dim(); ++a) {
        out[a] = k % points_[a];
        k /= points_[a];
    }
    return out;
}

int Grid::flat_index(const std::vector<int>& multi) const {
    int k = 0;
    for (int a = dim() - 1; a >= 0; --a) k = k * points_[a] + multi[a];
    return k;
}

Vec Grid::node(int k) const {
    const auto idx = multi_index(k);
    Vec x(dim());
    for (int a = 0; a < dim(); ++a)
        x(a) = idx[a] == points_[a] - 1 ? hi_(a) : lo_(a) + idx[a] * spacing(a);
    return x;
}

std::optional<int> Grid::neighbor(int k, int axis, int offset) const {
    auto idx = multi_index(k);
    idx[axis] += offset;
    if (idx[axis] < 0 || idx[axis] >= points_[axis]) return std::nullopt;
    return flat_index(idx);
}

Grid Grid::dilated(double factor) const {
    const Vec center = 0.5 * (lo_ + hi_);
    const Vec half = 0.5 * (hi_ - lo_) * factor;
    return Grid(center - half, center + half, points_);
}

void write_field_csv(std::ostream& out, const ValueField& field) {
    const int d = field.grid.dim();
    const int m = field.components();
    const bool with_endpoints = !field.endpoints.empty();
    out << "t";
    for (int a = 0; a < d; ++a) out << ",x" << a + 1;
    for (int i = 0; i < m; ++i) out << ",u" << i + 1;
    if (with_endpoints)
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < d; ++a) out << ",z" << i + 1 << "_" << a + 1;
    out << "\n";
    for (int k = 0; k < field.grid.size(); ++k) {
        out << csv::format(field.time);
        const Vec x = field.grid.node(k);
        for (int a = 0; a < d; ++a) out << "," << csv::format(x(a));
        for (int i = 0; i < m; ++i) out << "," << csv::format(field.values(i, k));
        if (with_endpoints)
            for (int i = 0; i < m; ++i)
                for (int a = 0; a < d; ++a) out << "," << csv::format(field.endpoints[i](a, k));
        out << "\n";
    }
}

ValueField read_field_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("field csv: empty input");
    const auto header = csv::split(line);
    if (header.empty() || header[0] != "t") throw InvalidInputError("field csv: header must start with t");
    int d = 0, m = 0, z = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const char kind = header[c].empty() ? '?' : header[c][0];
        if (kind == 'x' && m == 0 && z == 0) ++d;
        else if (kind == 'u' && z == 0) ++m;
        else if (kind == 'z') ++z;
        else throw InvalidInputError("field csv: unexpected column " + std::string(header[c]));
    }
    if (d == 0 || m == 0 || (z != 0 && z != d * m))
        throw InvalidInputError("field csv: header does not describe a value field");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = csv::split(line);
        if (fields.size() != header.size()) throw InvalidInputError("field csv: ragged row");
        std::vector<double> row;
        for (auto f : fields) row.push_back(csv::parse(f));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidInputError("field csv: no data rows");

    Vec lo(d), hi(d);
    std::vector<int> points(d);
    for (int a = 0; a < d; ++a) {
        std::vector<double> coords;
        for (const auto& r : rows) coords.push_back(r[1 + a]);
        std::sort(coords.begin(), coords.end());
        coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        lo(a) = coords.front();
        hi(a) = coords.back();
        points[a] = static_cast<int>(coords.size());
    }
    ValueField field{Grid(lo, hi, points), rows[0][0], Matrix(m, rows.size()), {}, {}, 0.0};
    if (field.grid.size() != static_cast<int>(rows.size()))
        throw InvalidInputError("field csv: rows do not form a full grid");
    field.multiple = Eigen::MatrixXi::Zero(m, field.grid.size());
    if (z) field.endpoints.assign(m, Eigen::MatrixXd(d, field.grid.size()));
    for (int k = 0; k < field.grid.size(); ++k) {
        const auto& r = rows[k];
        const Vec x = field.grid.node(k);
        for (int a = 0; a < d; ++a)
            if (std::abs(r[1 + a] - x(a)) > 1e-9 * (1.0 + std::abs(x(a))))
                throw InvalidInputError("field csv: nodes are not a uniform grid in storage order");
        if (r[0] != field.time) throw InvalidInputError("field csv: mixed times");
        for (int i = 0; i < m; ++i) field.values(i, k) = r[1 + d + i];
        if (z)
            for (int i = 0; i < m; ++i)
                for (int a = 0; a < d; ++a) field.endpoints[i](a, k) = r[1 + d + m + i * d + a];
    }
    if (!field.values.allFinite()) throw InvalidInputError("field csv: non-finite values");
    return field;
}

}  // namespace hjweave
