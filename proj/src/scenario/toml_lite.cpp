#include "scenario/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "geoflow/errors.hpp"

namespace geoflow::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
    throw ConfigInvalid("config line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// strip a trailing comment that is not inside a string literal
std::string_view strip_comment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

bool valid_key(std::string_view k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    return true;
}

double parse_number(std::string_view tok, int line) {
    std::string buf(tok);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(buf, &used);
    } catch (const std::exception&) {
        fail(line, "expected a number, got '" + buf + "'");
    }
    if (used != buf.size()) fail(line, "trailing characters after number '" + buf + "'");
    return v;
}

Value parse_value(std::string_view tok, int line) {
    Value v;
    tok = trim(tok);
    if (tok.empty()) fail(line, "missing value");
    if (tok.front() == '"') {
        if (tok.size() < 2 || tok.back() != '"') fail(line, "unterminated string");
        v.kind = Value::Kind::string;
        v.str = std::string(tok.substr(1, tok.size() - 2));
        if (v.str.find('"') != std::string::npos) fail(line, "nested quotes are not supported");
        return v;
    }
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = (tok == "true");
        return v;
    }
    if (tok.front() == '[') {
        if (tok.back() != ']') fail(line, "unterminated array");
        v.kind = Value::Kind::array;
        std::string inner(tok.substr(1, tok.size() - 2));
        std::stringstream ss(inner);
        std::string item;
        while (std::getline(ss, item, ',')) {
            auto it = trim(item);
            if (it.empty()) fail(line, "empty array element");
            v.array.push_back(parse_number(it, line));
        }
        return v;
    }
    v.kind = Value::Kind::number;
    v.number = parse_number(tok, line);
    return v;
}

}  // namespace

bool Document::has(const std::string& table, const std::string& key) const {
    const Table* t = table.empty() ? &root : nullptr;
    if (!t) {
        auto it = tables.find(table);
        if (it == tables.end()) return false;
        t = &it->second;
    }
    return t->count(key) > 0;
}

const Value& Document::at(const std::string& table, const std::string& key) const {
    const Table* t = table.empty() ? &root : nullptr;
    if (!t) {
        auto it = tables.find(table);
        if (it == tables.end()) throw ConfigInvalid("missing config table [" + table + "]");
        t = &it->second;
    }
    auto it = t->find(key);
    if (it == t->end()) throw ConfigInvalid("missing config key '" + key + "' in [" + table + "]");
    return it->second;
}

Document parse(std::string_view text) {
    Document doc;
    Table* current = &doc.root;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated table header");
            auto name = trim(line.substr(1, line.size() - 2));
            if (!valid_key(name)) fail(line_no, "invalid table name");
            std::string key(name);
            if (doc.tables.count(key)) fail(line_no, "duplicate table [" + key + "]");
            current = &doc.tables[key];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected key = value");
        auto key = trim(line.substr(0, eq));
        if (!valid_key(key)) fail(line_no, "invalid key '" + std::string(key) + "'");
        std::string k(key);
        if (current->count(k)) fail(line_no, "duplicate key '" + k + "'");
        (*current)[k] = parse_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

Document parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

}  // namespace geoflow::toml
