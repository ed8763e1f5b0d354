#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pimnet {

/// Flat `key = value` configuration file. Lines starting with '#' and blank
/// lines are ignored; keys are unique. All accessors throw ConfigError with
/// the source location on malformed values.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    /// true/false/1/0
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::int64_t> get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) const;

    std::optional<std::string> raw(const std::string& key) const;

    /// Throws if any key is not in `known`.
    void reject_unknown(const std::set<std::string>& known) const;

    const std::string& origin() const { return origin_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string where(const std::string& key) const;

    std::map<std::string, Entry> entries_;
    std::string origin_ = "<string>";
};

} // namespace pimnet
