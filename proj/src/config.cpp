#include "fsd/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fsd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(lineno));
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key=value at line " + std::to_string(lineno));
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
        cfg.values_[section.empty() ? key : section + "." + key] = val;
    }
    return cfg;
}

std::string Config::get_str(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not a number: " + it->second);
    }
}

int Config::get_int(const std::string& key, int def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not an integer: " + it->second);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' is not an unsigned integer: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "' is not a boolean: " + v);
}

void Config::set(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    values_[key] = buf;
}

void Config::set(const std::string& key, int value) { values_[key] = std::to_string(value); }
void Config::set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
void Config::set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

std::string Config::dump() const {
    // std::map keeps "section.key" sorted, so sections come out grouped.
    std::string out;
    std::string cur_section;
    bool first = true;
    for (const auto& [full_key, value] : values_) {
        const auto dot = full_key.find('.');
        const std::string section = dot == std::string::npos ? "" : full_key.substr(0, dot);
        const std::string key = dot == std::string::npos ? full_key : full_key.substr(dot + 1);
        if (section != cur_section || first) {
            if (!first) out += "\n";
            if (!section.empty()) out += "[" + section + "]\n";
            cur_section = section;
            first = false;
        }
        out += key + " = " + value + "\n";
    }
    return out;
}

}  // namespace fsd
