#pragma once

#include "l3x/trainer.hpp"

#include <filesystem>

namespace l3x {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Versioned container: "L3XC", version, JSON header, then every parameter tensor with its Adam
// moments as little-endian float32, then the densification statistics. Written atomically.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace l3x
