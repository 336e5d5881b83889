#include "hjweave/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hjweave/errors.hpp"
#include "json.hpp"

namespace hjweave {

namespace {

using nlohmann::json;

// Collects every violation instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

    bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        const std::set<std::string> known(allowed.begin(), allowed.end());
        for (const auto& [key, value] : j.items())
            if (!known.count(key)) fail(path, "unknown field '" + key + "'");
        return true;
    }

    std::optional<double> number(const json& j, const std::string& path) {
        if (!j.is_number()) {
            fail(path, "expected a number");
            return std::nullopt;
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(path, "must be finite");
            return std::nullopt;
        }
        return v;
    }

    double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
        if (!obj.contains(key)) return fallback;
        return number(obj.at(key), path + "." + key).value_or(fallback);
    }

    std::optional<long long> integer(const json& j, const std::string& path) {
        if (!j.is_number_integer()) {
            fail(path, "expected an integer");
            return std::nullopt;
        }
        return j.get<long long>();
    }

    int integer_or(const json& obj, const char* key, const std::string& path, int fallback, int min) {
        if (!obj.contains(key)) return fallback;
        const auto v = integer(obj.at(key), path + "." + key);
        if (!v) return fallback;
        if (*v < min || *v > 100000000) {
            fail(path + "." + key, "must be at least " + std::to_string(min));
            return fallback;
        }
        return static_cast<int>(*v);
    }

    std::optional<std::string> string(const json& j, const std::string& path) {
        if (!j.is_string()) {
            fail(path, "expected a string");
            return std::nullopt;
        }
        return j.get<std::string>();
    }

    std::optional<std::vector<double>> numbers(const json& j, const std::string& path) {
        if (!j.is_array()) {
            fail(path, "expected an array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        bool ok = true;
        for (std::size_t k = 0; k < j.size(); ++k) {
            const auto v = number(j[k], path + "[" + std::to_string(k) + "]");
            ok = ok && v.has_value();
            out.push_back(v.value_or(0.0));
        }
        if (!ok) return std::nullopt;
        return out;
    }

    // A point of the state space; a bare number is accepted in dimension 1.
    std::optional<Vec> point(const json& j, const std::string& path, int dim) {
        std::vector<double> v;
        if (j.is_number()) {
            const auto x = number(j, path);
            if (!x) return std::nullopt;
            v = {*x};
        } else {
            const auto xs = numbers(j, path);
            if (!xs) return std::nullopt;
            v = *xs;
        }
        if (static_cast<int>(v.size()) != dim) {
            fail(path, "has dimension " + std::to_string(v.size()) + " but dimension is " + std::to_string(dim));
            return std::nullopt;
        }
        if (dim > kMaxStateDim) {
            fail(path, "dimension exceeds " + std::to_string(kMaxStateDim));
            return std::nullopt;
        }
        Vec out(dim);
        for (int a = 0; a < dim; ++a) out(a) = v[a];
        return out;
    }

    std::optional<Vector> vector_of(const json& j, const std::string& path, int size, const char* what) {
        const auto xs = numbers(j, path);
        if (!xs) return std::nullopt;
        if (static_cast<int>(xs->size()) != size) {
            fail(path, "has " + std::to_string(xs->size()) + " entries but " + what + " is " + std::to_string(size));
            return std::nullopt;
        }
        return Eigen::Map<const Vector>(xs->data(), size);
    }
};

std::optional<Potential> read_potential(Reader& r, const json& j, const std::string& path, int dim) {
    if (!r.object(j, path, {"family", "stiffness", "amplitude", "wavevector"})) return std::nullopt;
    if (!j.contains("family")) {
        r.fail(path, "missing 'family'");
        return std::nullopt;
    }
    const auto family = r.string(j.at("family"), path + ".family");
    if (!family) return std::nullopt;
    if (*family == "zero") return ZeroPotential{};
    if (*family == "harmonic") return HarmonicPotential{r.number_or(j, "stiffness", path, 1.0)};
    if (*family == "cosine") {
        CosinePotential p{r.number_or(j, "amplitude", path, 0.0), Vec::Zero(dim)};
        if (!j.contains("wavevector")) {
            r.fail(path, "cosine potential needs 'wavevector'");
            return std::nullopt;
        }
        if (const auto w = r.point(j.at("wavevector"), path + ".wavevector", dim)) p.wavevector = *w;
        return p;
    }
    r.fail(path + ".family", "unknown potential family '" + *family + "' (zero, harmonic, cosine)");
    return std::nullopt;
}

LagrangianPtr read_lagrangian(Reader& r, const json& j, const std::string& path, int dim,
                              std::string& name) {
    if (!r.object(j, path, {"family", "mass", "epsilon", "potential"})) return nullptr;
    if (!j.contains("family")) {
        r.fail(path, "missing 'family'");
        return nullptr;
    }
    const auto family = r.string(j.at("family"), path + ".family");
    if (!family) return nullptr;
    Potential potential = ZeroPotential{};
    if (j.contains("potential")) {
        const auto p = read_potential(r, j.at("potential"), path + ".potential", dim);
        if (!p) return nullptr;
        potential = *p;
    }
    name = *family;
    try {
        if (*family == "quadratic") {
            if (j.contains("epsilon")) r.fail(path, "'epsilon' belongs to the quartic family");
            const double mass = r.number_or(j, "mass", path, 1.0);
            if (!(mass > 0.0)) {
                r.fail(path + ".mass", "must be positive");
                return nullptr;
            }
            return make_quadratic(dim, mass, potential);
        }
        if (*family == "quartic") {
            if (j.contains("mass")) r.fail(path, "'mass' belongs to the quadratic family");
            const double epsilon = r.number_or(j, "epsilon", path, 0.0);
            if (!(epsilon >= 0.0)) {
                r.fail(path + ".epsilon", "must be non-negative");
                return nullptr;
            }
            return make_quartic(dim, epsilon, potential);
        }
    } catch (const Error& e) {
        r.fail(path, e.what());
        return nullptr;
    }
    r.fail(path + ".family", "unknown Lagrangian family '" + *family + "' (quadratic, quartic)");
    return nullptr;
}

std::optional<Datum> read_datum(Reader& r, const json& j, const std::string& path, int dim) {
    if (!r.object(j, path, {"family", "value", "amplitude", "center", "sigma", "wavevector", "kappa", "offset"}))
        return std::nullopt;
    if (!j.contains("family")) {
        r.fail(path, "missing 'family'");
        return std::nullopt;
    }
    const auto family = r.string(j.at("family"), path + ".family");
    if (!family) return std::nullopt;
    const auto only = [&](std::initializer_list<const char*> keys) {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, value] : j.items())
            if (key != "family" && key != "offset" && !allowed.count(key))
                r.fail(path, "field '" + key + "' does not belong to the " + *family + " family");
    };
    Datum d;
    d.offset = r.number_or(j, "offset", path, 0.0);
    if (*family == "constant") {
        only({"value"});
        d.family = ConstantData{r.number_or(j, "value", path, 0.0)};
    } else if (*family == "gaussian") {
        only({"amplitude", "center", "sigma"});
        GaussianData g{r.number_or(j, "amplitude", path, 1.0), Vec::Zero(dim), r.number_or(j, "sigma", path, 1.0)};
        if (j.contains("center"))
            if (const auto c = r.point(j.at("center"), path + ".center", dim)) g.center = *c;
        if (!(g.sigma > 0.0)) r.fail(path + ".sigma", "must be positive");
        d.family = g;
    } else if (*family == "cosine") {
        only({"amplitude", "wavevector"});
        CosineData c{r.number_or(j, "amplitude", path, 1.0), Vec::Zero(dim)};
        if (!j.contains("wavevector")) r.fail(path, "cosine data needs 'wavevector'");
        else if (const auto w = r.point(j.at("wavevector"), path + ".wavevector", dim)) c.wavevector = *w;
        d.family = c;
    } else if (*family == "quadratic") {
        only({"kappa"});
        d.family = QuadraticData{r.number_or(j, "kappa", path, 1.0)};
    } else {
        r.fail(path + ".family", "unknown data family '" + *family + "' (constant, gaussian, cosine, quadratic)");
        return std::nullopt;
    }
    return d;
}

std::optional<Grid> read_grid(Reader& r, const json& j, const std::string& path, int dim) {
    if (!r.object(j, path, {"min", "max", "points", "spacing"})) return std::nullopt;
    if (!j.contains("min") || !j.contains("max")) {
        r.fail(path, "needs 'min' and 'max'");
        return std::nullopt;
    }
    const auto lo = r.point(j.at("min"), path + ".min", dim);
    const auto hi = r.point(j.at("max"), path + ".max", dim);
    if (!lo || !hi) return std::nullopt;
    if (j.contains("points") == j.contains("spacing")) {
        r.fail(path, "give exactly one of 'points' and 'spacing'");
        return std::nullopt;
    }
    std::vector<int> points(dim);
    if (j.contains("points")) {
        const json& p = j.at("points");
        for (int a = 0; a < dim; ++a) {
            const json& entry = p.is_array() ? (a < static_cast<int>(p.size()) ? p[a] : json()) : p;
            const auto n = r.integer(entry, path + ".points");
            if (!n) return std::nullopt;
            points[a] = static_cast<int>(*n);
        }
        if (p.is_array() && static_cast<int>(p.size()) != dim) {
            r.fail(path + ".points", "has " + std::to_string(p.size()) + " entries but dimension is " +
                                         std::to_string(dim));
            return std::nullopt;
        }
    } else {
        const auto h = r.point(j.at("spacing"), path + ".spacing", dim);
        if (!h) return std::nullopt;
        for (int a = 0; a < dim; ++a) {
            if (!((*h)(a) > 0.0)) {
                r.fail(path + ".spacing", "must be positive");
                return std::nullopt;
            }
            const double cells = ((*hi)(a) - (*lo)(a)) / (*h)(a);
            const double rounded = std::round(cells);
            if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, rounded) || rounded < 1) {
                r.fail(path + ".spacing", "does not divide max - min into whole cells");
                return std::nullopt;
            }
            points[a] = static_cast<int>(rounded) + 1;
        }
    }
    try {
        return Grid(*lo, *hi, points);
    } catch (const Error& e) {
        r.fail(path, e.what());
        return std::nullopt;
    }
}

std::string entry(int i, int j) {
    std::ostringstream s;
    s << "a_" << i + 1 << j + 1;
    return s.str();
}

}  // namespace

double certificate_radius(const ProblemConfig& config) {
    double radius = 1.0;
    if (config.grid) {
        radius = std::max({radius, config.grid->lo().cwiseAbs().maxCoeff(), config.grid->hi().cwiseAbs().maxCoeff()});
    }
    const auto include = [&](const Vec& x) {
        if (x.size()) radius = std::max(radius, x.cwiseAbs().maxCoeff());
    };
    if (config.minimize) {
        include(config.minimize->from);
        include(config.minimize->to);
    }
    if (config.characteristics) {
        include(config.characteristics->from);
        include(config.characteristics->to);
        for (const Vec& x : config.characteristics->positions) include(x);
    }
    return radius;
}

ProblemConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Reader r;
    ProblemConfig c;
    if (!r.object(doc, "config",
                  {"schema_version", "mode", "dimension", "coupling", "lagrangians", "initial_data", "grid",
                   "horizon", "discretization", "tolerances", "oracle", "value_type", "evolve", "short_time",
                   "minimize", "characteristics", "seed", "threads", "output"}))
        throw ConfigError("config: expected a JSON object");

    if (!doc.contains("schema_version")) {
        r.fail("schema_version", "missing");
    } else if (const auto v = r.integer(doc.at("schema_version"), "schema_version"); v && *v != kSchemaVersion) {
        r.fail("schema_version", "unsupported version " + std::to_string(*v) + " (expected " +
                                     std::to_string(kSchemaVersion) + ")");
    }

    if (doc.contains("mode")) {
        const auto mode = r.string(doc.at("mode"), "mode");
        if (mode == "cooperative") c.mode = CouplingMode::cooperative;
        else if (mode == "short-time") c.mode = CouplingMode::short_time;
        else if (mode == "diagnostic") c.mode = CouplingMode::diagnostic;
        else if (mode) r.fail("mode", "unknown mode '" + *mode + "' (cooperative, short-time, diagnostic)");
    }

    c.dimension = r.integer_or(doc, "dimension", "config", 1, 1);
    if (c.dimension > kMaxStateDim) r.fail("dimension", "exceeds " + std::to_string(kMaxStateDim));
    const int dim = std::min(c.dimension, kMaxStateDim);

    int m = 0;
    bool coupling_ok = false;
    if (!doc.contains("coupling")) {
        r.fail("coupling", "missing");
    } else {
        const json& a = doc.at("coupling");
        if (!a.is_array() || a.empty()) {
            r.fail("coupling", "expected a non-empty array of rows");
        } else {
            m = static_cast<int>(a.size());
            Matrix entries(m, m);
            coupling_ok = true;
            for (int i = 0; i < m; ++i) {
                const auto row = r.numbers(a[i], "coupling[" + std::to_string(i) + "]");
                if (!row || static_cast<int>(row->size()) != m) {
                    if (row)
                        r.fail("coupling[" + std::to_string(i) + "]",
                               "has " + std::to_string(row->size()) + " entries but the matrix has " +
                                   std::to_string(m) + " rows");
                    coupling_ok = false;
                    continue;
                }
                for (int j = 0; j < m; ++j) entries(i, j) = (*row)[j];
            }
            if (coupling_ok) c.coupling = CouplingMatrix(entries);
        }
    }
    if (coupling_ok && c.mode == CouplingMode::cooperative) {
        const auto report = certify(c.coupling);
        for (const auto& [i, j] : report.violations) {
            std::ostringstream msg;
            msg << "cooperative mode requires off-diagonal entries <= 0 (cooperativity condition), but "
                << entry(i, j) << " = " << c.coupling(i, j);
            r.fail("coupling", msg.str());
        }
        if (!report.irreducible)
            r.fail("coupling", "cooperative mode requires an irreducible matrix (irreducibility condition); "
                               "use mode \"diagnostic\" for decoupled systems");
    }

    const auto sized_list = [&](const char* key) -> const json* {
        if (!doc.contains(key)) {
            r.fail(key, "missing");
            return nullptr;
        }
        const json& list = doc.at(key);
        if (!list.is_array()) {
            r.fail(key, "expected an array");
            return nullptr;
        }
        if (m && static_cast<int>(list.size()) != m) {
            r.fail(key, "has " + std::to_string(list.size()) + " entries but coupling has " + std::to_string(m) +
                            " rows");
            return nullptr;
        }
        return &list;
    };
    if (const json* list = sized_list("lagrangians")) {
        for (std::size_t i = 0; i < list->size(); ++i) {
            std::string name;
            auto l = read_lagrangian(r, (*list)[i], "lagrangians[" + std::to_string(i) + "]", dim, name);
            c.lagrangians.push_back(std::move(l));
            c.lagrangian_names.push_back(name);
        }
    }
    if (const json* list = sized_list("initial_data")) {
        for (std::size_t i = 0; i < list->size(); ++i) {
            const auto d = read_datum(r, (*list)[i], "initial_data[" + std::to_string(i) + "]", dim);
            c.data.components.push_back(d.value_or(Datum{ConstantData{0.0}}));
        }
    }

    if (doc.contains("grid")) c.grid = read_grid(r, doc.at("grid"), "grid", dim);

    if (!doc.contains("horizon")) {
        r.fail("horizon", "missing");
    } else if (const auto t = r.number(doc.at("horizon"), "horizon")) {
        if (!(*t > 0.0)) r.fail("horizon", "must be positive");
        c.horizon = c.requested_horizon = *t;
    }

    if (doc.contains("discretization")) {
        const json& d = doc.at("discretization");
        if (r.object(d, "discretization", {"segments", "scan_points"})) {
            c.segments = r.integer_or(d, "segments", "discretization", c.segments, 2);
            c.scan_points = r.integer_or(d, "scan_points", "discretization", c.scan_points, 3);
        }
    }
    if (doc.contains("tolerances")) {
        const json& t = doc.at("tolerances");
        if (r.object(t, "tolerances", {"gradient", "max_iterations"})) {
            c.gradient_tolerance = r.number_or(t, "gradient", "tolerances", c.gradient_tolerance);
            if (!(c.gradient_tolerance > 0.0)) r.fail("tolerances.gradient", "must be positive");
            c.max_iterations = r.integer_or(t, "max_iterations", "tolerances", c.max_iterations, 1);
        }
    }
    if (doc.contains("oracle")) {
        const json& o = doc.at("oracle");
        if (r.object(o, "oracle", {"cfl", "boundary", "alpha"})) {
            c.cfl = r.number_or(o, "cfl", "oracle", c.cfl);
            if (!(c.cfl > 0.0)) r.fail("oracle.cfl", "must be positive");
            if (o.contains("boundary")) {
                const auto b = r.string(o.at("boundary"), "oracle.boundary");
                if (b == "copy") c.boundary = BoundaryTreatment::copy;
                else if (b == "periodic") c.boundary = BoundaryTreatment::periodic;
                else if (b) r.fail("oracle.boundary", "unknown boundary '" + *b + "' (copy, periodic)");
            }
            if (o.contains("alpha"))
                if (const auto al = r.vector_of(o.at("alpha"), "oracle.alpha", m, "the number of equations"))
                    c.alpha.assign(al->data(), al->data() + al->size());
        }
    }
    if (doc.contains("value_type")) {
        const auto v = r.string(doc.at("value_type"), "value_type");
        if (v == "negative") c.value_type = ValueType::negative;
        else if (v == "positive") c.value_type = ValueType::positive;
        else if (v) r.fail("value_type", "unknown value type '" + *v + "' (negative, positive)");
    }
    if (doc.contains("evolve")) {
        const json& e = doc.at("evolve");
        if (r.object(e, "evolve", {"method", "crosscheck_nodes"})) {
            if (e.contains("method")) {
                const auto v = r.string(e.at("method"), "evolve.method");
                if (v == "direct") c.positive_direct = true;
                else if (v && *v != "reversal") r.fail("evolve.method", "unknown method '" + *v + "' (reversal, direct)");
            }
            c.crosscheck_nodes = r.integer_or(e, "crosscheck_nodes", "evolve", c.crosscheck_nodes, 0);
        }
    }
    if (doc.contains("short_time")) {
        const json& s = doc.at("short_time");
        if (r.object(s, "short_time", {"kappa"})) {
            c.kappa = r.number_or(s, "kappa", "short_time", c.kappa);
            if (!(c.kappa > 0.0 && c.kappa < 1.0)) r.fail("short_time.kappa", "must lie in (0, 1)");
        }
    }

    const auto task_endpoints = [&](const json& t, const std::string& path, int& index, Vec& from, Vec& to,
                                    Vector& boundary) {
        const auto idx = t.contains("index") ? r.integer(t.at("index"), path + ".index") : std::optional<long long>(1);
        if (idx && (*idx < 1 || (m && *idx > m)))
            r.fail(path + ".index", "must lie between 1 and the number of equations " + std::to_string(m));
        index = static_cast<int>(idx.value_or(1)) - 1;
        if (t.contains("from")) from = r.point(t.at("from"), path + ".from", dim).value_or(Vec());
        if (t.contains("to")) to = r.point(t.at("to"), path + ".to", dim).value_or(Vec());
        boundary = Vector::Zero(m);
        if (t.contains("boundary"))
            boundary = r.vector_of(t.at("boundary"), path + ".boundary", m, "the number of equations")
                           .value_or(Vector::Zero(m));
    };
    if (doc.contains("minimize")) {
        const json& t = doc.at("minimize");
        if (r.object(t, "minimize", {"index", "from", "to", "boundary"})) {
            MinimizeTask task;
            task_endpoints(t, "minimize", task.index, task.from, task.to, task.boundary);
            if (!t.contains("from") || !t.contains("to")) r.fail("minimize", "needs 'from' and 'to'");
            c.minimize = task;
        }
    }
    if (doc.contains("characteristics")) {
        const json& t = doc.at("characteristics");
        if (r.object(t, "characteristics", {"index", "from", "to", "boundary", "positions", "velocities", "values"})) {
            CharacteristicsTask task;
            task_endpoints(t, "characteristics", task.index, task.from, task.to, task.boundary);
            const bool flow = t.contains("positions") || t.contains("velocities");
            if (flow) {
                if (t.contains("from") || t.contains("to"))
                    r.fail("characteristics", "give either 'from'/'to' or 'positions'/'velocities', not both");
                const auto points = [&](const char* key) {
                    std::vector<Vec> out;
                    const std::string path = std::string("characteristics.") + key;
                    if (!t.contains(key) || !t.at(key).is_array() || static_cast<int>(t.at(key).size()) != m) {
                        r.fail(path, "needs one point per equation (" + std::to_string(m) + ")");
                        return out;
                    }
                    for (std::size_t i = 0; i < t.at(key).size(); ++i)
                        out.push_back(r.point(t.at(key)[i], path + "[" + std::to_string(i) + "]", dim).value_or(Vec::Zero(dim)));
                    return out;
                };
                task.positions = points("positions");
                task.velocities = points("velocities");
                task.values = Matrix::Zero(m, m);
                if (t.contains("values")) {
                    const json& v = t.at("values");
                    if (!v.is_array() || static_cast<int>(v.size()) != m) {
                        r.fail("characteristics.values", "needs an m x m array");
                    } else {
                        for (int i = 0; i < m; ++i)
                            if (const auto row = r.vector_of(v[i], "characteristics.values[" + std::to_string(i) + "]",
                                                             m, "the number of equations"))
                                task.values.row(i) = row->transpose();
                    }
                }
            } else if (!t.contains("from") || !t.contains("to")) {
                r.fail("characteristics", "needs 'from' and 'to', or 'positions' and 'velocities'");
            }
            c.characteristics = task;
        }
    }

    if (doc.contains("seed")) {
        const json& s = doc.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            r.fail("seed", "expected a non-negative integer");
        else
            c.seed = s.get<std::uint64_t>();
    }
    c.threads = r.integer_or(doc, "threads", "config", 0, 0);
    if (doc.contains("output")) c.output_directory = r.string(doc.at("output"), "output").value_or("out");

    if (!r.errors.empty()) {
        std::ostringstream msg;
        msg << "invalid configuration (" << r.errors.size() << (r.errors.size() == 1 ? " problem" : " problems") << ")";
        for (const auto& e : r.errors) msg << "\n  " << e;
        throw ConfigError(msg.str());
    }

    if (c.mode == CouplingMode::short_time) {
        const double radius = certificate_radius(c);
        const SetConstants k = set_constants(c.lagrangians, radius);
        const double c1 = k.c1_growth, c2 = k.c2_hess;
        const double bound = short_horizon(c.coupling, c1, c2, c.kappa);
        if (c.horizon > bound) {
            std::ostringstream msg;
            msg << "horizon " << c.horizon << " clamped to the short horizon " << bound << " (C = " << c1 << ", "
                << c2 << ", kappa = " << c.kappa << ", radius " << radius << ")";
            c.horizon = bound;
            c.warnings.push_back(msg.str());
        }
    }
    return c;
}

ProblemConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str());
}

}  // namespace hjweave
