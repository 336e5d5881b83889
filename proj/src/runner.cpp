#include "hjweave/runner.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "hjweave/characteristics.hpp"
#include "hjweave/errors.hpp"
#include "hjweave/herglotz.hpp"
#include "hjweave/lax_oleinik.hpp"
#include "hjweave/viscosity.hpp"
#include "json.hpp"

namespace hjweave {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr std::pair<Subcommand, const char*> kNames[] = {
    {Subcommand::certify, "certify"},       {Subcommand::minimize, "minimize"},
    {Subcommand::characteristics, "characteristics"}, {Subcommand::evolve, "evolve"},
    {Subcommand::oracle, "oracle"},         {Subcommand::compare, "compare"},
};

MinimizeOptions minimize_options(const ProblemConfig& c) {
    MinimizeOptions o;
    o.optimizer.gradient_tolerance = c.gradient_tolerance;
    o.optimizer.max_iterations = c.max_iterations;
    o.seed = c.seed;
    return o;
}

FundamentalOptions fundamental_options(const ProblemConfig& c) {
    FundamentalOptions o;
    o.segments = c.segments;
    o.minimize = minimize_options(c);
    return o;
}

const Grid& require_grid(const ProblemConfig& c, const char* command) {
    if (!c.grid) throw ConfigError(std::string(command) + " needs a 'grid'");
    return *c.grid;
}

std::ofstream open_artifact(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

ordered_json point_json(const Vec& x) {
    ordered_json out = ordered_json::array();
    for (int a = 0; a < x.size(); ++a) out.push_back(x(a));
    return out;
}

// Certificates, short horizon and the effective horizon.
ordered_json certify_report(const ProblemConfig& c) {
    const CertificationReport report = certify(c.coupling);
    ordered_json out;
    out["cooperative"] = report.cooperative;
    out["irreducible"] = report.irreducible;
    ordered_json violations = ordered_json::array();
    for (const auto& [i, j] : report.violations) violations.push_back({i + 1, j + 1});
    out["violations"] = violations;
    ordered_json components = ordered_json::array();
    for (const auto& comp : report.components) {
        ordered_json members = ordered_json::array();
        for (int i : comp) members.push_back(i + 1);
        components.push_back(members);
    }
    out["components"] = components;

    const double radius = certificate_radius(c);
    const SetConstants k = set_constants(c.lagrangians, radius);
    const double c1 = k.c1_growth, c2 = k.c2_hess;
    const double bound = short_horizon(c.coupling, c1, c2, c.kappa);
    ordered_json horizon;
    horizon["value"] = std::isfinite(bound) ? ordered_json(bound) : ordered_json(nullptr);
    horizon["unbounded"] = !std::isfinite(bound);
    horizon["c1_growth"] = c1;
    horizon["c2_hess"] = c2;
    horizon["kappa"] = c.kappa;
    horizon["radius"] = radius;
    out["short_horizon"] = horizon;
    out["requested_horizon"] = c.requested_horizon;
    out["horizon"] = c.horizon;
    out["warnings"] = c.warnings;
    return out;
}

}  // namespace

std::optional<Subcommand> parse_subcommand(const std::string& name) {
    for (const auto& [command, text] : kNames)
        if (name == text) return command;
    return std::nullopt;
}

const char* subcommand_name(Subcommand command) {
    for (const auto& [c, text] : kNames)
        if (c == command) return text;
    return "?";
}

int exit_code_for(const std::exception& error) {
    if (dynamic_cast<const ConfigError*>(&error)) return kExitConfig;
    if (dynamic_cast<const SearchBoxError*>(&error)) return kExitSearchBox;
    if (dynamic_cast<const StabilityError*>(&error)) return kExitStability;
    if (dynamic_cast<const ConvergenceError*>(&error)) return kExitConvergence;
    return kExitOther;
}

RunResult run(Subcommand command, ProblemConfig c, const RunOverrides& overrides, std::ostream& log) {
    if (overrides.output_directory) c.output_directory = *overrides.output_directory;
    if (overrides.threads) c.threads = *overrides.threads;
    if (overrides.seed) c.seed = *overrides.seed;
    for (const auto& w : c.warnings) log << "warning: " << w << "\n";

    const fs::path dir(c.output_directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

    RunResult result;
    const auto artifact = [&](const char* name) {
        const fs::path path = dir / name;
        result.artifacts.push_back(path.string());
        return open_artifact(path);
    };

    switch (command) {
    case Subcommand::certify: {
        const ordered_json report = certify_report(c);
        artifact("certify.json") << report.dump(2) << "\n";
        log << "cooperative " << report["cooperative"] << ", irreducible " << report["irreducible"] << "\n";
        break;
    }
    case Subcommand::minimize: {
        if (!c.minimize) throw ConfigError("minimize needs a 'minimize' section");
        const MinimizeTask& t = *c.minimize;
        const auto r = minimize_fundamental(t.index, c.horizon, t.from, t.to, t.boundary, c.coupling,
                                            c.lagrangians, fundamental_options(c));
        auto out = artifact("minimize.csv");
        write_minimizer_csv(out, r, t.index);
        log << "value " << r.value << " after " << r.iterations << " iterations, |grad| " << r.gradient_norm
            << (r.multiple_minimizers ? ", several minimizers" : "") << "\n";
        break;
    }
    case Subcommand::characteristics: {
        if (!c.characteristics) throw ConfigError("characteristics needs a 'characteristics' section");
        const CharacteristicsTask& t = *c.characteristics;
        CharacteristicBundle bundle;
        if (!t.velocities.empty()) {
            const auto initial = consistent_initial_data(c.lagrangians, t.positions, t.velocities, t.values);
            FlowOptions flow;
            flow.steps = c.segments;
            bundle = lie_flow(initial, c.horizon, c.coupling, c.lagrangians, flow);
        } else {
            const auto r = minimize_fundamental(t.index, c.horizon, t.from, t.to, t.boundary, c.coupling,
                                                c.lagrangians, fundamental_options(c));
            bundle = bundle_from_minimizer(t.index, r.minimizer, r.state, c.coupling, c.lagrangians);
        }
        auto out = artifact("characteristics.csv");
        write_bundle_csv(out, bundle);
        bool positive_weights = true;
        const Propagator prop = propagator(c.coupling, c.horizon);
        for (double s : bundle.times) positive_weights = positive_weights && (prop.d(s).array() >= 0).all();
        if (positive_weights) {
            const auto residual = dual_arc_check(bundle, prop);
            log << "dual-arc residuals: momentum " << residual.momentum << ", hamiltonian " << residual.hamiltonian
                << "\n";
        } else {
            log << "dual-arc check skipped: some weights d_ij(s) are negative\n";
        }
        log << "velocity defect " << bundle.velocity_defect << "\n";
        break;
    }
    case Subcommand::evolve: {
        const Grid& grid = require_grid(c, "evolve");
        EvolveOptions o;
        o.bolza.segments = c.segments;
        o.bolza.scan_points = c.scan_points;
        o.bolza.minimize = minimize_options(c);
        o.crosscheck_nodes = c.crosscheck_nodes;
        o.threads = c.threads;
        const ValueField field =
            c.value_type == ValueType::negative
                ? evolve_field(c.horizon, c.data, c.coupling, c.lagrangians, grid, o)
                : evolve_field_positive(c.horizon, c.data, c.coupling, c.lagrangians, grid, o,
                                        c.positive_direct ? PositiveMethod::direct : PositiveMethod::reversal);
        auto out = artifact("evolve.csv");
        write_field_csv(out, field);
        log << "evolved " << field.components() << " x " << grid.size() << " values, crosscheck defect "
            << field.crosscheck_defect << ", nodes with several minimizers " << field.multiple.sum() << "\n";
        break;
    }
    case Subcommand::oracle: {
        const Grid& grid = require_grid(c, "oracle");
        if (grid.dim() != 1) throw ConfigError("oracle needs a one-dimensional grid");
        SchemeConfig s;
        s.grid = grid;
        s.cfl = c.cfl;
        s.alpha = c.alpha;
        s.boundary = c.boundary;
        s.final_time = c.horizon;
        SchemeReport report;
        const auto hamiltonians = make_hamiltonians(c.lagrangians);
        const ValueField field = c.value_type == ValueType::negative
                                     ? solve_system(hamiltonians, c.coupling, c.data, s, &report)
                                     : solve_system_positive(hamiltonians, c.coupling, c.data, s, &report);
        auto out = artifact("oracle.csv");
        write_field_csv(out, field);
        log << report.steps << " steps of " << report.dt << (report.alpha_recomputed ? ", alpha recomputed" : "")
            << "\n";
        break;
    }
    case Subcommand::compare: {
        std::vector<std::string> files = overrides.compare_files;
        if (files.empty()) files = {(dir / "evolve.csv").string(), (dir / "oracle.csv").string()};
        if (files.size() != 2) throw ConfigError("compare needs exactly two field files");
        std::vector<ValueField> fields;
        for (const auto& f : files) {
            std::ifstream in(f);
            if (!in) throw Error("cannot read field file " + f);
            fields.push_back(read_field_csv(in));
        }
        const FieldComparison cmp = compare(fields[0], fields[1]);
        ordered_json report;
        report["first"] = files[0];
        report["second"] = files[1];
        report["time"] = fields[0].time;
        report["linf"] = cmp.linf;
        report["l1"] = cmp.l1;
        report["component"] = cmp.component + 1;
        report["node"] = cmp.node;
        report["location"] = point_json(cmp.location);
        artifact("compare.json") << report.dump(2) << "\n";
        log << "linf " << cmp.linf << " at x = " << cmp.location.transpose() << " (component " << cmp.component + 1
            << "), l1 " << cmp.l1 << "\n";
        break;
    }
    }
    return result;
}

}  // namespace hjweave
