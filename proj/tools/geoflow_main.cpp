#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "scenario/scenarios.hpp"

namespace {

std::string output_dir(const std::string& cli_value, const std::string& config_value) {
    if (!cli_value.empty()) return cli_value;
    if (const char* env = std::getenv("GEOFLOW_OUT_DIR"); env && *env) return env;
    return config_value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geoflow: geodesic-flow stability scenarios on Euclidean, sphere, SO(3) and SPD manifolds"};
    app.set_help_flag("--help", "print help");  // keep -h free for the step override
    app.require_subcommand(1);

    std::string config_path, out_dir, filter;
    std::int64_t seed = -1;
    double h = 0.0;

    auto* run_cmd = app.add_subcommand("run", "run one scenario from a TOML config");
    run_cmd->add_option("config", config_path, "scenario config file")->required();
    run_cmd->add_option("--out", out_dir, "output directory (overrides config and GEOFLOW_OUT_DIR)");
    run_cmd->add_option("--seed", seed, "override the RNG seed");
    run_cmd->add_option("--h", h, "override the integration step");

    auto* validate_cmd = app.add_subcommand("validate", "check a config without running it");
    validate_cmd->add_option("config", config_path, "scenario config file")->required();

    auto* suite_cmd = app.add_subcommand("suite", "run all bundled scenarios and print the acceptance table");
    suite_cmd->add_option("--filter", filter, "only run scenarios whose name contains this substring");
    suite_cmd->add_option("--out", out_dir, "output directory");
    suite_cmd->add_option("--seed", seed, "override the RNG seed of every scenario");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            auto cfg = geoflow::scenario::load_config(config_path);
            if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
            if (h > 0.0) cfg.h = h;
            cfg.out_dir = output_dir(out_dir, cfg.out_dir);
            auto report = geoflow::scenario::run(cfg);
            geoflow::scenario::SuiteResult single{{report}, report.wall_time_s, report.pass()};
            geoflow::scenario::print_table(single, std::cout);
            std::cout << "csv:    " << report.csv_path << "\nreport: " << report.report_path << "\n";
            return report.pass() ? 0 : 1;
        }
        if (validate_cmd->parsed()) {
            auto cfg = geoflow::scenario::load_config(config_path);
            auto violations = geoflow::scenario::validate(cfg);
            if (violations.empty()) {
                std::cout << "ok: " << geoflow::scenario::to_string(cfg.id) << " config is runnable\n";
                return 0;
            }
            for (const auto& v : violations)
                std::cout << "[" << geoflow::scenario::to_string(v.code) << "] " << v.message << "\n";
            return 1;
        }
        // suite
        std::string dir = output_dir(out_dir, "out");
        auto result = geoflow::scenario::run_suite(filter, dir, std::cout);
        return result.pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
