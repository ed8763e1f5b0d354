#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pimnet/model.hpp"

namespace pimnet::models {

/// Bumped whenever any preset's widths, kernels or dilations change.
inline constexpr int kPresetVersion = 1;

struct Preset {
    std::string name;
    std::string description;
    ModelSpec spec;            ///< at the preset's default antenna counts
    std::size_t budget = 0;    ///< param_count(spec) must not exceed this
};

const std::vector<Preset>& presets();
const Preset& find_preset(const std::string& name);

/// Preset architecture at its default antenna counts.
ModelSpec preset_spec(const std::string& name);
/// Same widths/kernels/dilations re-targeted to other antenna counts.
ModelSpec preset_spec(const std::string& name, std::size_t tx_antennas, std::size_t rx_antennas);

} // namespace pimnet::models
