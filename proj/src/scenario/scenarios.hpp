#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "geoflow/decay.hpp"
#include "scenario/config.hpp"

namespace geoflow::scenario {

enum class CheckKind {
    approx_rel,  // |observed - target| <= tolerance * |target|
    at_most,     // observed <= target
    at_least,    // observed >= target
};

struct CriterionResult {
    std::string name;
    CheckKind kind = CheckKind::approx_rel;
    double observed = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;  // where the target comes from
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    double h = 0.0;
    double eps = 0.0;
    std::vector<CriterionResult> criteria;
    std::vector<std::pair<std::string, DecayFit<double>>> fits;
    double wall_time_s = 0.0;
    std::string csv_path;
    std::string report_path;

    bool pass() const;
};

/// Run one scenario: deterministic for a fixed seed; writes the time-series
/// CSV and a JSON report into config.out_dir.
RunReport run(const ScenarioConfig& config);

struct SuiteResult {
    std::vector<RunReport> reports;
    double wall_time_s = 0.0;
    bool pass = false;
};

/// Run every bundled scenario whose name contains `filter` (all if empty)
/// and print the acceptance table.
SuiteResult run_suite(const std::string& filter, const std::string& out_dir, std::ostream& os);

void print_table(const SuiteResult& result, std::ostream& os);

}  // namespace geoflow::scenario
