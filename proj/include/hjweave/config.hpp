#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hjweave/coupling.hpp"
#include "hjweave/field.hpp"
#include "hjweave/lagrangian.hpp"
#include "hjweave/viscosity.hpp"

namespace hjweave {

inline constexpr int kSchemaVersion = 1;

enum class CouplingMode {
    /// Off-diagonal entries <= 0 and an irreducible off-diagonal graph are required.
    cooperative,
    /// Any A; the horizon is clamped to the certified short horizon.
    short_time,
    /// Any A, no clamping. For decoupled and closed-form experiments.
    diagnostic,
};

enum class ValueType { negative, positive };

struct MinimizeTask {
    int index = 0;
    Vec from;
    Vec to;
    /// u(0); zeros when absent.
    Vector boundary;
};

struct CharacteristicsTask {
    int index = 0;
    Vec from;
    Vec to;
    Vector boundary;
    /// Starting velocities per curve; when set the Lie system is integrated
    /// from `positions` instead of differencing a minimizer.
    std::vector<Vec> positions;
    std::vector<Vec> velocities;
    Matrix values;
};

struct ProblemConfig {
    int schema_version = kSchemaVersion;
    CouplingMode mode = CouplingMode::cooperative;
    int dimension = 1;
    CouplingMatrix coupling = CouplingMatrix::zero(1);
    LagrangianSet lagrangians;
    std::vector<std::string> lagrangian_names;
    InitialData data;
    std::optional<Grid> grid;
    double horizon = 1.0;
    /// Horizon as written, before any short-time clamp.
    double requested_horizon = 1.0;
    /// Curve segments N.
    int segments = 200;
    int scan_points = 33;
    double gradient_tolerance = 1e-8;
    int max_iterations = 500;
    double cfl = 0.4;
    BoundaryTreatment boundary = BoundaryTreatment::copy;
    std::vector<double> alpha;
    ValueType value_type = ValueType::negative;
    bool positive_direct = false;
    int crosscheck_nodes = 5;
    double kappa = 0.1;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string output_directory = "out";
    std::optional<MinimizeTask> minimize;
    std::optional<CharacteristicsTask> characteristics;
    /// Non-fatal notices collected while validating (for example a clamped horizon).
    std::vector<std::string> warnings;
};

/// Certificates radius used for the short-time clamp: the largest |x| on the
/// grid (or on the task endpoints when no grid is given), at least 1.
double certificate_radius(const ProblemConfig& config);

/// Parses and validates a configuration document. Every violation found is
/// collected; ConfigError lists them all.
ProblemConfig parse_config_text(const std::string& text);
ProblemConfig parse_config(const std::string& path);

}  // namespace hjweave
