#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace geoflow::toml {

// Strict parser for the TOML subset used by scenario configs:
// comments (#), [tables], and key = value with string, boolean, number or
// flat numeric-array values. Anything else (dotted keys, inline tables,
// nested arrays, multi-line strings) is rejected with a line number.

struct Value {
    enum class Kind { string, boolean, number, array };
    Kind kind = Kind::number;
    std::string str;
    bool boolean = false;
    double number = 0.0;
    std::vector<double> array;
};

using Table = std::map<std::string, Value>;

struct Document {
    Table root;
    std::map<std::string, Table> tables;

    bool has(const std::string& table, const std::string& key) const;
    const Value& at(const std::string& table, const std::string& key) const;
};

Document parse(std::string_view text);
Document parse_file(const std::string& path);

}  // namespace geoflow::toml
