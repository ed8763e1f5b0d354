#include "pimnet/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pimnet/errors.hpp"

namespace pimnet {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_double(const std::string& s, double& out)
{
    if (s == "-inf") {
        out = -INFINITY;
        return true;
    }
    if (s == "inf") {
        out = INFINITY;
        return true;
    }
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_int(const std::string& s, std::int64_t& out)
{
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

} // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin)
{
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (cfg.entries_.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        cfg.entries_[key] = Entry{value, lineno};
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, 0}; }

std::string KeyValueConfig::where(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.line == 0) return origin_ + ": key '" + key + "'";
    return origin_ + ":" + std::to_string(it->second.line) + ": key '" + key + "'";
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const
{
    return raw(key).value_or(fallback);
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const
{
    auto v = raw(key);
    if (!v) return fallback;
    std::int64_t out = 0;
    if (!parse_int(*v, out)) throw ConfigError(where(key) + ": expected an integer, got '" + *v + "'");
    return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const
{
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError(where(key) + ": expected true or false, got '" + *v + "'");
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
    auto v = raw(key);
    if (!v) return fallback;
    double out = 0;
    if (!parse_double(*v, out)) throw ConfigError(where(key) + ": expected a number, got '" + *v + "'");
    return out;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const
{
    auto v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) {
        double d = 0;
        if (!parse_double(item, d)) throw ConfigError(where(key) + ": bad number '" + item + "' in list");
        out.push_back(d);
    }
    return out;
}

std::vector<std::int64_t> KeyValueConfig::get_ints(const std::string& key,
                                                   const std::vector<std::int64_t>& fallback) const
{
    auto v = raw(key);
    if (!v) return fallback;
    std::vector<std::int64_t> out;
    for (const auto& item : split_list(*v)) {
        std::int64_t d = 0;
        if (!parse_int(item, d)) throw ConfigError(where(key) + ": bad integer '" + item + "' in list");
        out.push_back(d);
    }
    return out;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const
{
    for (const auto& [key, entry] : entries_)
        if (!known.count(key)) throw ConfigError(where(key) + ": unknown configuration key");
}

} // namespace pimnet
