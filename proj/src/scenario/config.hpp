#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace geoflow::scenario {

enum class ScenarioId {
    tracking_sphere,
    observer_sphere_pendulum,
    so3_filter,
    so3_tracking,
    killing_spd_continuous,
    killing_spd_discrete,
    gradient_flow_contraction,
    jacobi_demo,
    lift_equivalence,
    volume_contraction,
};

const std::vector<ScenarioId>& all_scenarios();
std::string to_string(ScenarioId id);
ScenarioId scenario_from_string(const std::string& name);

struct ScenarioConfig {
    ScenarioId id = ScenarioId::tracking_sphere;
    std::uint64_t seed = 1;
    double h = 1e-3;
    double eps = 1e-5;
    std::pair<double, double> t_span{0.0, 8.0};
    std::map<std::string, double> params;                  // scenario-specific scalars
    std::map<std::string, std::vector<double>> initial;    // optional coordinate arrays
    std::string out_dir = "out";
};

/// Bundled configuration (the one `suite` runs).
ScenarioConfig default_config(ScenarioId id);

/// Parse a TOML config; unknown scenarios, keys or malformed values throw
/// ConfigInvalid (fail-fast).
ScenarioConfig load_config(const std::string& path);

enum class ViolationCode { ConfigInvalid, ConstraintViolation, GainOutOfRange };

struct Violation {
    ViolationCode code;
    std::string message;
};

std::string to_string(ViolationCode code);

/// Static checks: required gains present and in range, initial conditions
/// projectable onto the manifold, spans and steps sane. Empty iff runnable.
std::vector<Violation> validate(const ScenarioConfig& config);

}  // namespace geoflow::scenario
