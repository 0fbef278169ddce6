#pragma once

#include "l3x/query.hpp"
#include "l3x/scene.hpp"
#include "l3x/semantic_encoder.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace l3x {

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr int kGaussianRecordFloats = 14;

// Inference artifact: Gaussians with their bottleneck features, the decoder, cameras, and the
// prompt dictionary with negatives. Training-only modules are not included.
struct SceneBundle {
  GaussianModel<float> gaussians;
  SemanticEncoder<float> encoder;
  std::vector<Camera> cameras;
  PromptDictionary prompts;
  MatX<float> negatives;  // clip_dim x count
  std::vector<std::string> negative_names;

  const Camera& camera(int id) const;
};

// Layout: "L3XB", u32 version, u32 manifest length, UTF-8 JSON manifest, then tagged chunks
// (4-byte tag, u64 byte length, payload), all little-endian.
void export_bundle(const SceneBundle& bundle, const std::filesystem::path& path);
SceneBundle load_bundle(const std::filesystem::path& path);

}  // namespace l3x
