#include "hexcast/config.hpp"

#include <fstream>
#include <sstream>

namespace hexcast::config {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& raw) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(raw, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + raw);
    }
    if (used != raw.size())
        throw ConfigError("config: bad number for " + key + ": " + raw);
    return value;
}

int64_t parse_int64(const std::string& key, const std::string& raw) {
    std::size_t used = 0;
    int64_t value = 0;
    try {
        value = std::stoll(raw, &used);
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + raw);
    }
    if (used != raw.size())
        throw ConfigError("config: bad integer for " + key + ": " + raw);
    return value;
}

}  // namespace

bool Settings::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

void Settings::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

std::string Settings::get(const std::string& key,
                          const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double Settings::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_double(key, it->second);
}

int Settings::get_int(const std::string& key, int fallback) const {
    const int64_t v = get_int64(key, fallback);
    if (v < INT32_MIN || v > INT32_MAX)
        throw ConfigError("config: integer out of range for " + key);
    return static_cast<int>(v);
}

int64_t Settings::get_int64(const std::string& key, int64_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_int64(key, it->second);
}

bool Settings::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& raw = it->second;
    if (raw == "true" || raw == "1" || raw == "yes" || raw == "on")
        return true;
    if (raw == "false" || raw == "0" || raw == "no" || raw == "off")
        return false;
    throw ConfigError("config: bad boolean for " + key + ": " + raw);
}

std::vector<double> Settings::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<double> out;
    for (const auto& item : split_commas(it->second))
        out.push_back(parse_double(key, item));
    return out;
}

std::vector<int> Settings::get_ints(const std::string& key,
                                    const std::vector<int>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::vector<int> out;
    for (const auto& item : split_commas(it->second)) {
        const int64_t v = parse_int64(key, item);
        if (v < INT32_MIN || v > INT32_MAX)
            throw ConfigError("config: integer out of range for " + key);
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::vector<std::string> Settings::get_strings(
    const std::string& key, const std::vector<std::string>& fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return split_commas(it->second);
}

Settings parse_settings(std::istream& in) {
    Settings s;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' on line " +
                              std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key on line " +
                              std::to_string(line_no));
        s.set(key, value);
    }
    return s;
}

Settings load_settings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("config: cannot open " + path);
    return parse_settings(in);
}

void apply_override(Settings& s, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("config: override needs key=value: " + assignment);
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);
    // Reuse the trimming rules of the file parser.
    std::stringstream ss(key + " = " + value);
    const Settings parsed = parse_settings(ss);
    for (const auto& [k, v] : parsed.entries()) s.set(k, v);
}

}  // namespace hexcast::config
