#pragma once

#include <cstdint>
#include <filesystem>

#include "sogr/training.hpp"

namespace sogr {

// Binary checkpoint layout (all integers little-endian):
//   magic "SOGR" | version u32 | config-block length u32 | "key=value\n"
//   lines in fixed order | tensor count u32 | records.
// Each record: name length u16, name bytes, rank u8, dims u32 each, payload
// as 32-bit LE floats. Parameter tensors come first (t_s2o, t_o2s, d_opt,
// d_sar in layer order), then optimizer slots as adam/<path>/m, /v pairs.
// save -> load -> save is byte-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
    ReciprocalModel model;
    TrainConfig config;
};

void save_checkpoint(const ReciprocalModel& model, const TrainConfig& cfg,
                     const std::filesystem::path& path);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sogr
