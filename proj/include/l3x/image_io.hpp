#pragma once

#include "l3x/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>

namespace l3x {

// 8-bit PNG. Color images load as 3 channels in [0, 1]; gray images are replicated.
FeatureMap<float> read_png_rgb(const std::filesystem::path& path);
// Writes 1 (gray) or 3 (RGB) channels, clamped to [0, 1].
void write_png(const FeatureMap<float>& image, const std::filesystem::path& path);

// Nonzero pixels are inside.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const Mask& mask, const std::filesystem::path& path);

// Raw little-endian float32 plane stack, interleaved per pixel (HWC), plus a JSON sidecar
// "<path>.json" holding height, width and channels.
void write_raw_map(const FeatureMap<float>& map, const std::filesystem::path& path);
FeatureMap<float> read_raw_map(const std::filesystem::path& path);

std::array<std::uint8_t, 3> viridis(double t);
// Single-channel map in [0, 1] rendered through the viridis colormap.
void write_heatmap_png(const FeatureMap<float>& scores, const std::filesystem::path& path);

}  // namespace l3x
