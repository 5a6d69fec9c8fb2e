#pragma once

// Flat `key = value` configuration with dotted keys, a fixed schema and defaults.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msf/scheme.hpp"

namespace msf {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kArtifactVersion = "1.0.0";

class Config {
public:
    /// Lines of `key = value`; `#` starts a comment. Unknown keys throw ConfigError.
    static Config parse(std::string_view text);

    /// A `.json` path is read as a run manifest (its "config" object); anything else as text.
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    /// Explicit value or the schema default.
    std::string get(const std::string& key) const;
    double number(const std::string& key) const;
    int integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;

    int species() const { return integer("n"); }

    /// Every key of the schema (profiles for the configured n) with defaults materialized.
    std::vector<std::pair<std::string, std::string>> resolved() const;
    std::string to_text() const;

    /// Checks types and cross-key constraints; throws ConfigError with the key path.
    void validate() const;

private:
    std::map<std::string, std::string> values_;
};

/// Value of a profile ("constant value=..", "gaussian base=.. amp=.. center=.. width=..",
/// "step left=.. right=.. at=..") at x.
double profile_value(const std::string& spec, double x, const std::string& key);

Grid1D make_grid(const Config& cfg);
SchemeConfig make_scheme_config(const Config& cfg);
MixtureState make_initial_state(const Config& cfg);

}  // namespace msf
