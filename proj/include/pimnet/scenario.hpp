#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pimnet/keyvalue.hpp"
#include "pimnet/signal.hpp"

namespace pimnet::sim {

/// OFDM symbol / periodogram frame length. Subcarriers sit on bins of this grid.
inline constexpr std::size_t kOfdmSize = 1024;

struct Carrier {
    double center_offset = 0.0;  ///< normalised frequency in (-0.5, 0.5)
    double bandwidth = 0.05;     ///< normalised
    std::size_t subcarriers = 48;
};

struct CarrierPlan {
    std::vector<Carrier> carriers;

    /// Throws ConfigError on overlapping bands, out-of-Nyquist bands, or more
    /// subcarriers than the band has bins.
    void validate() const;
    /// Occupied bins (0..kOfdmSize-1) of carrier `i`.
    std::vector<std::size_t> bins(std::size_t i) const;
};

/// Two 48-subcarrier carriers at -0.1 and +0.05 (bandwidth 0.05); IM3 lands at -0.25 and +0.2.
CarrierPlan default_plan();

/// Per antenna: random QPSK on every occupied bin of each 1024-sample OFDM
/// symbol, then scaled to unit mean power. Requires length >= 1024.
ComplexSignal generate_tx(const CarrierPlan& plan, std::size_t antennas, std::size_t length, std::uint64_t seed);

enum class DriftKind { none, sinusoidal, random_walk };

/// Time variation g(n) multiplying every third-order coefficient.
///   sinusoidal: s = sin(2 pi n / period + phase_offset), g = (1 + depth s) exp(j phase_depth s)
///   random_walk: g = (1 + w_m(n)) exp(j w_p(n)), w_* Gaussian walks with step_sigma, seeded
struct Drift {
    DriftKind kind = DriftKind::none;
    double period = 8192.0;
    double depth = 0.3;
    double phase_depth = 0.3;
    double phase_offset = 0.0;
    double step_sigma = 1e-3;
    std::uint64_t seed = 0;
};

struct Tap {
    std::size_t delay = 0;
    std::complex<double> a3;
};

/// Ground-truth PIM oracle:
///   u = coupling * x,  z[r, n] = sum_taps a3 g(n + t0) u[r, n-d] |u[r, n-d]|^2 + noise.
struct PimScenario {
    std::size_t tx_antennas = 4;
    std::size_t rx_antennas = 2;
    std::vector<std::complex<double>> coupling;  ///< [rx x tx], row-major
    std::vector<Tap> taps;
    Drift drift;
    double noise_floor_db = -40.0;  ///< noise power relative to each channel's PIM power; -inf disables
    std::uint64_t seed = 0;

    void validate() const;
    bool is_static() const { return drift.kind == DriftKind::none; }
    std::complex<double> coupling_at(std::size_t r, std::size_t t) const { return coupling[r * tx_antennas + t]; }

    /// Canonical JSON (sorted keys, no whitespace).
    std::string to_json() const;
    static PimScenario from_json(const std::string& json);
    /// 16 hex digits, FNV-1a over the canonical JSON.
    std::string hash() const;
};

/// Draws coupling ~ CN(0, 1/tx) and tap phases from `seed`; magnitudes come from
/// `gains_db` (20 log10 |a3|).
PimScenario make_scenario(std::size_t tx, std::size_t rx, const std::vector<std::size_t>& delays,
                          const std::vector<double>& gains_db, Drift drift, double noise_floor_db,
                          std::uint64_t seed);

/// 4 tx x 2 rx, taps at {0, 3, 7} with 0/-6/-12 dB, static, -40 dB noise.
PimScenario default_scenario(std::uint64_t seed);
/// Sinusoidal drift: period 8192, 30% magnitude and 0.3 rad phase depth; phase offset from `seed`.
PimScenario dynamic_scenario(std::uint64_t seed);

/// Drift factor at absolute sample time n (used by apply_pim).
std::vector<std::complex<double>> drift_factors(const Drift& drift, std::size_t t0, std::size_t length);

ComplexSignal apply_pim(const ComplexSignal& x, const PimScenario& s, std::size_t t0 = 0);

/// Config keys understood by plan_from_config / scenario_from_config.
const std::vector<std::string>& scenario_config_keys();
CarrierPlan plan_from_config(const KeyValueConfig& cfg);
PimScenario scenario_from_config(const KeyValueConfig& cfg);

std::string plan_to_json(const CarrierPlan& plan);
CarrierPlan plan_from_json(const std::string& json);

} // namespace pimnet::sim
