#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/fft.hpp"
#include "pimnet/rng.hpp"
#include "pimnet/scenario.hpp"

namespace pimnet::sim {

namespace {

std::string describe(const Carrier& c)
{
    std::ostringstream os;
    os << "carrier(offset=" << c.center_offset << ", bandwidth=" << c.bandwidth << ", subcarriers=" << c.subcarriers
       << ")";
    return os.str();
}

} // namespace

CarrierPlan default_plan()
{
    CarrierPlan p;
    p.carriers.push_back({-0.1, 0.05, 48});
    p.carriers.push_back({0.05, 0.05, 48});
    return p;
}

std::vector<std::size_t> CarrierPlan::bins(std::size_t i) const
{
    const Carrier& c = carriers.at(i);
    const double lo = c.center_offset - c.bandwidth / 2.0;
    const double spacing = c.bandwidth / static_cast<double>(c.subcarriers);
    std::vector<std::size_t> out;
    out.reserve(c.subcarriers);
    const auto n = static_cast<long long>(kOfdmSize);
    for (std::size_t k = 0; k < c.subcarriers; ++k) {
        const double f = lo + (static_cast<double>(k) + 0.5) * spacing;
        long long b = std::llround(f * static_cast<double>(kOfdmSize));
        b = ((b % n) + n) % n;
        out.push_back(static_cast<std::size_t>(b));
    }
    return out;
}

void CarrierPlan::validate() const
{
    if (carriers.empty()) throw ConfigError("carrier plan has no carriers");
    std::vector<std::pair<double, double>> bands;
    std::set<std::size_t> used;
    for (std::size_t i = 0; i < carriers.size(); ++i) {
        const Carrier& c = carriers[i];
        if (!(c.bandwidth > 0.0) || c.subcarriers == 0) throw ConfigError(describe(c) + ": empty band");
        const double lo = c.center_offset - c.bandwidth / 2.0, hi = c.center_offset + c.bandwidth / 2.0;
        if (!(lo > -0.5) || !(hi < 0.5)) throw ConfigError(describe(c) + ": band exceeds Nyquist (-0.5, 0.5)");
        const auto b = bins(i);
        std::set<std::size_t> mine(b.begin(), b.end());
        if (mine.size() != b.size()) throw ConfigError(describe(c) + ": more subcarriers than bins in the band");
        for (auto bin : mine)
            if (used.count(bin)) throw ConfigError(describe(c) + ": overlaps another carrier");
        used.insert(mine.begin(), mine.end());
        bands.emplace_back(lo, hi);
    }
    std::sort(bands.begin(), bands.end());
    for (std::size_t i = 1; i < bands.size(); ++i)
        if (bands[i].first < bands[i - 1].second) throw ConfigError("carrier plan: carrier bands overlap");
}

ComplexSignal generate_tx(const CarrierPlan& plan, std::size_t antennas, std::size_t length, std::uint64_t seed)
{
    plan.validate();
    if (antennas == 0) throw ConfigError("generate_tx: antenna count must be positive");
    if (length < kOfdmSize)
        throw ConfigError("generate_tx: length " + std::to_string(length) + " below minimum " +
                          std::to_string(kOfdmSize));

    std::vector<std::size_t> occupied;
    for (std::size_t i = 0; i < plan.carriers.size(); ++i) {
        auto b = plan.bins(i);
        occupied.insert(occupied.end(), b.begin(), b.end());
    }

    const double h = 1.0 / std::sqrt(2.0);
    ComplexSignal x = ComplexSignal::zeros(antennas, length);
    std::vector<std::complex<double>> sym(kOfdmSize);
    for (std::size_t a = 0; a < antennas; ++a) {
        Rng rng(derive_seed(seed, a));
        for (std::size_t start = 0; start < length; start += kOfdmSize) {
            std::fill(sym.begin(), sym.end(), std::complex<double>{});
            for (auto bin : occupied) {
                const auto bits = rng.below(4);
                sym[bin] = {(bits & 1) ? h : -h, (bits & 2) ? h : -h};
            }
            fft_inplace(sym, true);
            const std::size_t n_copy = std::min(kOfdmSize, length - start);
            for (std::size_t n = 0; n < n_copy; ++n) x.set(a, start + n, sym[n]);
        }
        const double p = x.mean_power(a);
        const double g = 1.0 / std::sqrt(p);
        double* row = x.data.data() + a * length * 2;
        for (std::size_t i = 0; i < length * 2; ++i) row[i] *= g;
    }
    return x;
}

std::string plan_to_json(const CarrierPlan& plan)
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : plan.carriers)
        j.push_back({{"center_offset", c.center_offset}, {"bandwidth", c.bandwidth}, {"subcarriers", c.subcarriers}});
    return nlohmann::json{{"carriers", j}}.dump();
}

CarrierPlan plan_from_json(const std::string& text)
{
    try {
        const auto j = nlohmann::json::parse(text);
        CarrierPlan p;
        for (const auto& c : j.at("carriers"))
            p.carriers.push_back({c.at("center_offset").get<double>(), c.at("bandwidth").get<double>(),
                                  c.at("subcarriers").get<std::size_t>()});
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("carrier plan JSON: ") + e.what());
    }
}

} // namespace pimnet::sim
