#include "pimnet/presets.hpp"

#include "pimnet/errors.hpp"

namespace pimnet::models {

namespace {

ModelSpec make(Variant v, std::size_t tx, std::size_t rx, std::vector<std::size_t> widths,
               std::vector<std::size_t> k, std::vector<std::size_t> r)
{
    ModelSpec s;
    s.variant = v;
    s.tx_antennas = tx;
    s.rx_antennas = rx;
    s.widths = std::move(widths);
    s.kernel_sizes = std::move(k);
    s.dilations = std::move(r);
    return s;
}

std::vector<Preset> make_presets()
{
    std::vector<Preset> out;
    // Full-scale presets: 32 tx x 16 rx, convs k=5 with dilations (1,2 | 2,1).
    out.push_back({"paper-light", "lightweight CNN + 2xFC(sigmoid) + CNN, <= 12k parameters",
                   make(Variant::lightweight_fc2, 32, 16, {32, 32, 52, 52, 32}, {5, 5, 5, 5}, {1, 2, 2, 1}),
                   12000});
    out.push_back({"paper-large", "wider lightweight skeleton, 25k-26k parameters",
                   make(Variant::lightweight_fc2, 32, 16, {48, 48, 90, 90, 48}, {5, 5, 5, 5}, {1, 2, 2, 1}),
                   26000});
    {
        ModelSpec s = make(Variant::static_lut, 32, 16, {76, 76, 76}, {5, 5, 5, 5}, {1, 2, 2, 1});
        s.lut.q = 64;
        out.push_back({"paper-static", "CNN + LUT + ReLU + CNN, 25k-26k parameters", s, 26000});
    }
    out.push_back({"paper-dynamic", "CNN + 3xFC(sigmoid) + CNN, 25k-26k parameters",
                   make(Variant::dynamic_fc3, 32, 16, {48, 48, 70, 70, 70, 48}, {5, 5, 5, 5}, {1, 2, 2, 1}),
                   26000});
    // Small models for unit tests and gradient checks.
    out.push_back({"desk", "small lightweight model for tests",
                   make(Variant::lightweight_fc2, 4, 2, {8, 8, 12, 12, 8}, {3, 3, 3, 3}, {1, 2, 2, 1}), 2000});
    {
        ModelSpec s = make(Variant::static_lut, 4, 2, {8, 8, 8}, {3, 3, 3, 3}, {1, 2, 2, 1});
        s.lut.q = 16;
        out.push_back({"desk-static", "small static LUT model for tests", s, 2000});
    }
    out.push_back({"desk-dynamic", "small three-FC model for tests",
                   make(Variant::dynamic_fc3, 4, 2, {8, 8, 12, 12, 12, 8}, {3, 3, 3, 3}, {1, 2, 2, 1}), 2000});
    return out;
}

} // namespace

const std::vector<Preset>& presets()
{
    static const std::vector<Preset> table = make_presets();
    return table;
}

const Preset& find_preset(const std::string& name)
{
    for (const auto& p : presets())
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

ModelSpec preset_spec(const std::string& name) { return find_preset(name).spec; }

ModelSpec preset_spec(const std::string& name, std::size_t tx_antennas, std::size_t rx_antennas)
{
    ModelSpec s = find_preset(name).spec;
    s.tx_antennas = tx_antennas;
    s.rx_antennas = rx_antennas;
    s.validate();
    return s;
}

} // namespace pimnet::models
