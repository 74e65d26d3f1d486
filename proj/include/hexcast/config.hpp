#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hexcast/common.hpp"

namespace hexcast::config {

// Flat `section.key = value` settings. Later assignments win, so command
// line overrides are merged on top of file contents.
class Settings {
  public:
    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get(const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    int64_t get_int64(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Comma-separated values.
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<int> get_ints(const std::string& key,
                              const std::vector<int>& fallback) const;
    std::vector<std::string> get_strings(
        const std::string& key,
        const std::vector<std::string>& fallback) const;

    const std::map<std::string, std::string>& entries() const {
        return entries_;
    }

  private:
    std::map<std::string, std::string> entries_;
};

// `key = value` per line; '#' starts a comment; blank lines are ignored.
Settings parse_settings(std::istream& in);
Settings load_settings(const std::string& path);

// Applies a `key=value` override string.
void apply_override(Settings& s, const std::string& assignment);

}  // namespace hexcast::config
