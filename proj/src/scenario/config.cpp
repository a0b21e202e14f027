#include "scenario/config.hpp"

#include <algorithm>
#include <set>

#include "geoflow/geometry.hpp"
#include "scenario/toml_lite.hpp"

namespace geoflow::scenario {

namespace {

struct ScenarioSchema {
    // scalar parameters and their bundled defaults
    std::map<std::string, double> params;
    // names of optional coordinate arrays in [initial], with expected length
    std::map<std::string, int> initial;
    std::pair<double, double> t_span{0.0, 8.0};
};

const std::map<ScenarioId, ScenarioSchema>& schemas() {
    static const std::map<ScenarioId, ScenarioSchema> table = {
        {ScenarioId::tracking_sphere,
         {{{"k1", 4.0}, {"k2", 4.0}, {"offset", 0.3}, {"potential_g", 1.0}, {"ref_speed", 0.6}},
          {{"q0", 3}, {"v0", 3}},
          {0.0, 8.0}}},
        {ScenarioId::observer_sphere_pendulum,
         {{{"alpha", 4.0}, {"beta", 4.0}, {"offset", 0.3}, {"potential_g", 1.0}},
          {{"q0", 3}, {"v0", 3}},
          {0.0, 8.0}}},
        {ScenarioId::so3_filter, {{{"k", 2.0}, {"theta0", 0.8}}, {}, {0.0, 6.0}}},
        {ScenarioId::so3_tracking, {{{"k", 4.0}, {"theta0", 0.2}}, {}, {0.0, 8.0}}},
        {ScenarioId::killing_spd_continuous, {{{"k", 1.0}, {"d0", 1.0}}, {{"q0", 4}}, {0.0, 8.0}}},
        {ScenarioId::killing_spd_discrete,
         {{{"k", 1.0}, {"dt", 0.1}, {"d0", 0.5}, {"rot", 0.05}, {"steps", 200.0}}, {{"q0", 4}}, {0.0, 20.0}}},
        {ScenarioId::gradient_flow_contraction,
         {{{"lambda_flow", 1.0},
           {"d_main", 1.0},
           {"d_pair", 0.9},
           {"angle", 0.3},
           {"d_near", 0.02},
           {"d_far", 1.2},
           {"angle_far", 0.1}},
          {},
          {0.0, 3.0}}},
        {ScenarioId::jacobi_demo, {{}, {}, {0.0, 10.0}}},
        {ScenarioId::lift_equivalence,
         {{{"lambda_flow", 1.0}, {"d0", 0.3}, {"neighbor_offset", 0.02}, {"n_neighbors", 20.0}, {"k_so3", 4.0}},
          {},
          {0.0, 4.0}}},
        {ScenarioId::volume_contraction, {{{"lambda_flow", 1.0}, {"d0", 1.0}}, {}, {0.0, 2.0}}},
    };
    return table;
}

const std::map<std::string, ScenarioId>& name_table() {
    static const std::map<std::string, ScenarioId> table = {
        {"tracking_sphere", ScenarioId::tracking_sphere},
        {"observer_sphere_pendulum", ScenarioId::observer_sphere_pendulum},
        {"so3_filter", ScenarioId::so3_filter},
        {"so3_tracking", ScenarioId::so3_tracking},
        {"killing_spd_continuous", ScenarioId::killing_spd_continuous},
        {"killing_spd_discrete", ScenarioId::killing_spd_discrete},
        {"gradient_flow_contraction", ScenarioId::gradient_flow_contraction},
        {"jacobi_demo", ScenarioId::jacobi_demo},
        {"lift_equivalence", ScenarioId::lift_equivalence},
        {"volume_contraction", ScenarioId::volume_contraction},
    };
    return table;
}

double require_number(const toml::Value& v, const std::string& key) {
    if (v.kind != toml::Value::Kind::number)
        throw ConfigInvalid("config key '" + key + "' must be a number");
    return v.number;
}

}  // namespace

const std::vector<ScenarioId>& all_scenarios() {
    static const std::vector<ScenarioId> ids = [] {
        std::vector<ScenarioId> v;
        for (const auto& [name, id] : name_table()) v.push_back(id);
        std::sort(v.begin(), v.end(), [](ScenarioId a, ScenarioId b) { return static_cast<int>(a) < static_cast<int>(b); });
        return v;
    }();
    return ids;
}

std::string to_string(ScenarioId id) {
    for (const auto& [name, sid] : name_table())
        if (sid == id) return name;
    return "?";
}

ScenarioId scenario_from_string(const std::string& name) {
    auto it = name_table().find(name);
    if (it == name_table().end()) throw ConfigInvalid("unknown scenario '" + name + "'");
    return it->second;
}

ScenarioConfig default_config(ScenarioId id) {
    ScenarioConfig c;
    c.id = id;
    const auto& schema = schemas().at(id);
    c.params = schema.params;
    c.t_span = schema.t_span;
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    const toml::Document doc = toml::parse_file(path);
    if (!doc.has("", "scenario")) throw ConfigInvalid("config must set 'scenario'");
    const auto& sv = doc.at("", "scenario");
    if (sv.kind != toml::Value::Kind::string) throw ConfigInvalid("'scenario' must be a string");
    ScenarioConfig c = default_config(scenario_from_string(sv.str));
    const auto& schema = schemas().at(c.id);

    static const std::set<std::string> top_keys = {"scenario", "seed", "h", "eps", "t_span"};
    for (const auto& [key, value] : doc.root) {
        if (!top_keys.count(key)) throw ConfigInvalid("unknown top-level key '" + key + "'");
        if (key == "seed") c.seed = static_cast<std::uint64_t>(require_number(value, key));
        if (key == "h") c.h = require_number(value, key);
        if (key == "eps") c.eps = require_number(value, key);
        if (key == "t_span") {
            if (value.kind != toml::Value::Kind::array || value.array.size() != 2)
                throw ConfigInvalid("'t_span' must be an array [t0, t1]");
            c.t_span = {value.array[0], value.array[1]};
        }
    }
    for (const auto& [table, contents] : doc.tables) {
        if (table == "params") {
            for (const auto& [key, value] : contents) {
                if (!schema.params.count(key))
                    throw ConfigInvalid("unknown [params] key '" + key + "' for scenario " + to_string(c.id));
                c.params[key] = require_number(value, key);
            }
        } else if (table == "initial") {
            for (const auto& [key, value] : contents) {
                auto it = schema.initial.find(key);
                if (it == schema.initial.end())
                    throw ConfigInvalid("unknown [initial] key '" + key + "' for scenario " + to_string(c.id));
                if (value.kind != toml::Value::Kind::array)
                    throw ConfigInvalid("[initial] values must be coordinate arrays");
                c.initial[key] = value.array;
            }
        } else if (table == "output") {
            for (const auto& [key, value] : contents) {
                if (key != "dir") throw ConfigInvalid("unknown [output] key '" + key + "'");
                if (value.kind != toml::Value::Kind::string) throw ConfigInvalid("[output] dir must be a string");
                c.out_dir = value.str;
            }
        } else {
            throw ConfigInvalid("unknown config table [" + table + "]");
        }
    }
    return c;
}

std::string to_string(ViolationCode code) {
    switch (code) {
        case ViolationCode::ConfigInvalid: return "ConfigInvalid";
        case ViolationCode::ConstraintViolation: return "ConstraintViolation";
        case ViolationCode::GainOutOfRange: return "GainOutOfRange";
    }
    return "?";
}

std::vector<Violation> validate(const ScenarioConfig& config) {
    std::vector<Violation> out;
    const auto& schema = schemas().at(config.id);

    if (!(config.h > 0))
        out.push_back({ViolationCode::ConfigInvalid, "step h must be positive"});
    if (!(config.t_span.second > config.t_span.first))
        out.push_back({ViolationCode::ConfigInvalid, "t_span must be increasing"});
    if (!(config.eps >= 1e-6 && config.eps <= 1e-3))
        out.push_back({ViolationCode::ConfigInvalid, "eps must lie in [1e-6, 1e-3]"});

    for (const auto& [key, value] : schema.params) {
        (void)value;
        if (!config.params.count(key))
            out.push_back({ViolationCode::ConfigInvalid, "missing parameter '" + key + "'"});
    }
    static const std::set<std::string> positive = {"k1", "k2", "alpha", "beta", "k", "k_so3", "lambda_flow", "dt"};
    for (const auto& [key, value] : config.params) {
        if (positive.count(key) && !(value > 0))
            out.push_back({ViolationCode::GainOutOfRange, "parameter '" + key + "' must be positive"});
    }
    if (config.id == ScenarioId::killing_spd_discrete) {
        const auto k = config.params.count("k") ? config.params.at("k") : 0.0;
        const auto dt = config.params.count("dt") ? config.params.at("dt") : 0.0;
        if (!(k * dt > 0.0 && k * dt < 1.0))
            out.push_back({ViolationCode::GainOutOfRange, "k*dt must lie in (0,1)"});
    }

    for (const auto& [key, values] : config.initial) {
        auto it = schema.initial.find(key);
        if (it == schema.initial.end()) {
            out.push_back({ViolationCode::ConfigInvalid, "unexpected initial array '" + key + "'"});
            continue;
        }
        if (static_cast<int>(values.size()) != it->second) {
            out.push_back({ViolationCode::ConfigInvalid,
                           "initial array '" + key + "' must have length " + std::to_string(it->second)});
            continue;
        }
        // sphere/spd points must project onto the manifold
        if (key == "q0") {
            try {
                if (config.id == ScenarioId::tracking_sphere || config.id == ScenarioId::observer_sphere_pendulum) {
                    MatX<double> c(3, 1);
                    c << values[0], values[1], values[2];
                    Point<double>::project(Manifold<double>::sphere(2, 1.0), c);
                } else if (config.id == ScenarioId::killing_spd_continuous ||
                           config.id == ScenarioId::killing_spd_discrete) {
                    MatX<double> c(2, 2);
                    c << values[0], values[1], values[2], values[3];
                    Point<double>(Manifold<double>::spd(2), c);
                }
            } catch (const GeoError& e) {
                out.push_back({ViolationCode::ConstraintViolation, std::string("q0: ") + e.what()});
            }
        }
    }
    return out;
}

}  // namespace geoflow::scenario
