#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/rng.hpp"
#include "pimnet/scenario.hpp"

namespace pimnet::sim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCouplingStream = 0x636f75706c;
constexpr std::uint64_t kTapStream = 0x746170;
constexpr std::uint64_t kDriftStream = 0x6472696674;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;

std::string drift_name(DriftKind k)
{
    switch (k) {
    case DriftKind::none: return "none";
    case DriftKind::sinusoidal: return "sinusoidal";
    case DriftKind::random_walk: return "random_walk";
    }
    return "?";
}

DriftKind drift_from_name(const std::string& s)
{
    for (auto k : {DriftKind::none, DriftKind::sinusoidal, DriftKind::random_walk})
        if (drift_name(k) == s) return k;
    throw ConfigError("unknown drift kind '" + s + "' (none | sinusoidal | random_walk)");
}

json complex_json(std::complex<double> c) { return json::array({c.real(), c.imag()}); }

std::complex<double> complex_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

} // namespace

void PimScenario::validate() const
{
    if (tx_antennas == 0 || rx_antennas == 0) throw ConfigError("scenario: antenna counts must be positive");
    if (coupling.size() != tx_antennas * rx_antennas)
        throw ConfigError("scenario: coupling has " + std::to_string(coupling.size()) + " entries, expected rx*tx = " +
                          std::to_string(rx_antennas * tx_antennas));
    if (taps.empty()) throw ConfigError("scenario: at least one tap is required");
    for (std::size_t i = 1; i < taps.size(); ++i)
        if (taps[i].delay <= taps[i - 1].delay) throw ConfigError("scenario: tap delays must be strictly increasing");
    for (const auto& t : taps)
        if (!std::isfinite(t.a3.real()) || !std::isfinite(t.a3.imag()))
            throw ConfigError("scenario: tap coefficient is not finite");
    if (drift.kind == DriftKind::sinusoidal && !(drift.period > 0.0))
        throw ConfigError("scenario: sinusoidal drift needs a positive period");
    if (drift.kind == DriftKind::random_walk && !(drift.step_sigma >= 0.0))
        throw ConfigError("scenario: random-walk drift needs step_sigma >= 0");
    if (std::isnan(noise_floor_db) || noise_floor_db == INFINITY)
        throw ConfigError("scenario: noise_floor_db must be a number or -inf");
}

std::string PimScenario::to_json() const
{
    json j;
    j["tx_antennas"] = tx_antennas;
    j["rx_antennas"] = rx_antennas;
    json c = json::array();
    for (auto v : coupling) c.push_back(complex_json(v));
    j["coupling"] = c;
    json taps_j = json::array();
    for (const auto& t : taps) taps_j.push_back({{"delay", t.delay}, {"a3", complex_json(t.a3)}});
    j["taps"] = taps_j;
    j["drift"] = {{"kind", drift_name(drift.kind)}, {"period", drift.period},       {"depth", drift.depth},
                  {"phase_depth", drift.phase_depth}, {"phase_offset", drift.phase_offset},
                  {"step_sigma", drift.step_sigma},   {"seed", drift.seed}};
    // JSON has no infinities: a disabled noise floor is stored as null.
    j["noise_floor_db"] = std::isfinite(noise_floor_db) ? json(noise_floor_db) : json(nullptr);
    j["seed"] = seed;
    return j.dump();
}

PimScenario PimScenario::from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        PimScenario s;
        s.tx_antennas = j.at("tx_antennas").get<std::size_t>();
        s.rx_antennas = j.at("rx_antennas").get<std::size_t>();
        for (const auto& c : j.at("coupling")) s.coupling.push_back(complex_from(c));
        for (const auto& t : j.at("taps")) s.taps.push_back({t.at("delay").get<std::size_t>(), complex_from(t.at("a3"))});
        const json& d = j.at("drift");
        s.drift.kind = drift_from_name(d.at("kind").get<std::string>());
        s.drift.period = d.at("period").get<double>();
        s.drift.depth = d.at("depth").get<double>();
        s.drift.phase_depth = d.at("phase_depth").get<double>();
        s.drift.phase_offset = d.at("phase_offset").get<double>();
        s.drift.step_sigma = d.at("step_sigma").get<double>();
        s.drift.seed = d.at("seed").get<std::uint64_t>();
        s.noise_floor_db = j.at("noise_floor_db").is_null() ? -INFINITY : j.at("noise_floor_db").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario JSON: ") + e.what());
    }
}

std::string PimScenario::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : to_json()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PimScenario make_scenario(std::size_t tx, std::size_t rx, const std::vector<std::size_t>& delays,
                          const std::vector<double>& gains_db, Drift drift, double noise_floor_db,
                          std::uint64_t seed)
{
    if (delays.size() != gains_db.size())
        throw ConfigError("scenario: tap_delays and tap_gains_db must have the same length");
    PimScenario s;
    s.tx_antennas = tx;
    s.rx_antennas = rx;
    s.seed = seed;
    s.noise_floor_db = noise_floor_db;
    s.drift = drift;

    Rng crng(derive_seed(seed, kCouplingStream));
    const double sd = std::sqrt(0.5 / static_cast<double>(tx));
    s.coupling.resize(tx * rx);
    for (auto& c : s.coupling) {
        const double re = sd * crng.normal();
        const double im = sd * crng.normal();
        c = {re, im};
    }
    Rng trng(derive_seed(seed, kTapStream));
    for (std::size_t i = 0; i < delays.size(); ++i) {
        const double mag = std::pow(10.0, gains_db[i] / 20.0);
        const double phase = trng.uniform(-std::numbers::pi, std::numbers::pi);
        s.taps.push_back({delays[i], std::polar(mag, phase)});
    }
    s.validate();
    return s;
}

PimScenario default_scenario(std::uint64_t seed)
{
    return make_scenario(4, 2, {0, 3, 7}, {0.0, -6.0, -12.0}, Drift{}, -40.0, seed);
}

PimScenario dynamic_scenario(std::uint64_t seed)
{
    Drift d;
    d.kind = DriftKind::sinusoidal;
    d.period = 8192.0;
    d.depth = 0.3;
    d.phase_depth = 0.3;
    d.seed = derive_seed(seed, kDriftStream);
    d.phase_offset = Rng(d.seed).uniform(0.0, 2.0 * std::numbers::pi);
    return make_scenario(4, 2, {0, 3, 7}, {0.0, -6.0, -12.0}, d, -40.0, seed);
}

std::vector<std::complex<double>> drift_factors(const Drift& drift, std::size_t t0, std::size_t length)
{
    std::vector<std::complex<double>> g(length, {1.0, 0.0});
    switch (drift.kind) {
    case DriftKind::none: break;
    case DriftKind::sinusoidal:
        for (std::size_t n = 0; n < length; ++n) {
            const double t = static_cast<double>(t0 + n);
            const double s = std::sin(2.0 * std::numbers::pi * t / drift.period + drift.phase_offset);
            g[n] = std::polar(1.0 + drift.depth * s, drift.phase_depth * s);
        }
        break;
    case DriftKind::random_walk: {
        // the walk always starts at absolute time 0 so any window is reproducible
        Rng rng(drift.seed);
        double wm = 0.0, wp = 0.0;
        for (std::size_t t = 0; t < t0 + length; ++t) {
            if (t >= t0) g[t - t0] = std::polar(1.0 + wm, wp);
            wm += drift.step_sigma * rng.normal();
            wp += drift.step_sigma * rng.normal();
        }
        break;
    }
    }
    return g;
}

ComplexSignal apply_pim(const ComplexSignal& x, const PimScenario& s, std::size_t t0)
{
    s.validate();
    if (x.antennas != s.tx_antennas)
        throw ConfigError("apply_pim: signal has " + std::to_string(x.antennas) + " antennas, scenario expects " +
                          std::to_string(s.tx_antennas));
    const std::size_t L = x.length;
    for (const auto& t : s.taps)
        if (t.delay >= L)
            throw ConfigError("apply_pim: tap delay " + std::to_string(t.delay) + " >= signal length " +
                              std::to_string(L));

    const auto g = drift_factors(s.drift, t0, L);
    ComplexSignal z = ComplexSignal::zeros(s.rx_antennas, L);
    std::vector<std::complex<double>> cubic(L);
    Rng noise(derive_seed(derive_seed(s.seed, kNoiseStream), t0));
    for (std::size_t r = 0; r < s.rx_antennas; ++r) {
        for (std::size_t n = 0; n < L; ++n) {
            std::complex<double> u{};
            for (std::size_t t = 0; t < s.tx_antennas; ++t) u += s.coupling_at(r, t) * x.at(t, n);
            cubic[n] = u * std::norm(u);
        }
        double power = 0.0;
        for (std::size_t n = 0; n < L; ++n) {
            std::complex<double> acc{};
            for (const auto& tap : s.taps)
                if (n >= tap.delay) acc += tap.a3 * cubic[n - tap.delay];
            acc *= g[n];
            z.set(r, n, acc);
            power += std::norm(acc);
        }
        if (std::isfinite(s.noise_floor_db)) {
            power /= static_cast<double>(L);
            const double sd = std::sqrt(power * std::pow(10.0, s.noise_floor_db / 10.0) / 2.0);
            for (std::size_t n = 0; n < L; ++n) {
                const double re = sd * noise.normal();
                const double im = sd * noise.normal();
                z.set(r, n, z.at(r, n) + std::complex<double>(re, im));
            }
        }
    }
    return z;
}

const std::vector<std::string>& scenario_config_keys()
{
    static const std::vector<std::string> keys{
        "carriers",         "tx_antennas",   "rx_antennas",     "tap_delays",         "tap_gains_db",
        "drift",            "drift_period",  "drift_depth",     "drift_phase_depth",  "drift_phase_offset",
        "drift_step_sigma", "noise_floor_db", "scenario_seed"};
    return keys;
}

CarrierPlan plan_from_config(const KeyValueConfig& cfg)
{
    auto raw = cfg.raw("carriers");
    if (!raw) return default_plan();
    CarrierPlan p;
    std::istringstream is(*raw);
    std::string item;
    while (std::getline(is, item, ',')) {
        double off = 0, bw = 0;
        long long sc = 0;
        char c1 = 0, c2 = 0;
        std::istringstream it(item);
        if (!(it >> off >> c1 >> bw >> c2 >> sc) || c1 != ':' || c2 != ':' || sc <= 0)
            throw ConfigError(cfg.origin() + ": carriers entry '" + item +
                              "' must be offset:bandwidth:subcarriers");
        p.carriers.push_back({off, bw, static_cast<std::size_t>(sc)});
    }
    p.validate();
    return p;
}

PimScenario scenario_from_config(const KeyValueConfig& cfg)
{
    const auto seed = static_cast<std::uint64_t>(cfg.get_int("scenario_seed", 1));
    const auto tx = cfg.get_int("tx_antennas", 4);
    const auto rx = cfg.get_int("rx_antennas", 2);
    if (tx <= 0 || rx <= 0) throw ConfigError(cfg.origin() + ": antenna counts must be positive");
    std::vector<std::size_t> delays;
    for (auto d : cfg.get_ints("tap_delays", {0, 3, 7})) {
        if (d < 0) throw ConfigError(cfg.origin() + ": tap delays must be >= 0");
        delays.push_back(static_cast<std::size_t>(d));
    }
    const auto gains = cfg.get_doubles("tap_gains_db", {0.0, -6.0, -12.0});

    Drift d;
    d.kind = drift_from_name(cfg.get_string("drift", "none"));
    d.period = cfg.get_double("drift_period", d.period);
    d.depth = cfg.get_double("drift_depth", d.depth);
    d.phase_depth = cfg.get_double("drift_phase_depth", d.phase_depth);
    d.step_sigma = cfg.get_double("drift_step_sigma", d.step_sigma);
    d.seed = derive_seed(seed, kDriftStream);
    d.phase_offset = cfg.get_double("drift_phase_offset", Rng(d.seed).uniform(0.0, 2.0 * std::numbers::pi));
    if (d.kind == DriftKind::none) d = Drift{};

    return make_scenario(static_cast<std::size_t>(tx), static_cast<std::size_t>(rx), delays, gains, d,
                         cfg.get_double("noise_floor_db", -40.0), seed);
}

} // namespace pimnet::sim
