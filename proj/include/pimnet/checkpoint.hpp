#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pimnet/model.hpp"

namespace pimnet::models {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Optimizer-state appendix stored after the model tensors.
struct CheckpointAppendix {
    std::string meta_json;             ///< free-form canonical JSON (step counter etc.)
    std::vector<NamedTensor> tensors;  ///< same encoding as model tensors
};

struct Checkpoint {
    ModelSpec spec;
    ModelParams params;
    std::optional<CheckpointAppendix> appendix;
};

/// "PIMM" container:
///   magic "PIMM" | u32 version | u32 len + canonical spec JSON |
///   u32 tensor count | per tensor: u32 len + name, u32 rank, u64 dims[rank], f64 data[] |
///   optional: magic "OPTS" | u32 len + meta JSON | u32 count | tensors as above.
/// All integers and reals little-endian.
std::string encode_checkpoint(const ModelSpec& spec, const ModelParams& params,
                              const CheckpointAppendix* appendix = nullptr);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::string& path, const ModelSpec& spec, const ModelParams& params,
                     const CheckpointAppendix* appendix = nullptr);
Checkpoint load_checkpoint(const std::string& path);

} // namespace pimnet::models
