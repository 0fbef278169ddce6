#pragma once

#include "l3x/common.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace l3x {

// Square crop in image pixels.
struct CropRect {
  int x = 0;
  int y = 0;
  int size = 0;
};

struct ImageView {
  int image_id = 0;
  const FeatureMap<float>* rgb = nullptr;  // may be null for providers that do not read pixels
  int height = 0;
  int width = 0;
};

// Source of 2D supervision features.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int clip_dim() const = 0;
  virtual int dino_dim() const = 0;
  // Unit-norm CLIP-space embedding of a crop.
  virtual VecX<float> clip_embed(const ImageView& image, const CropRect& crop) const = 0;
  // Dense DINO-space feature grid of the whole image.
  virtual FeatureMap<float> dino_map(const ImageView& image) const = 0;
  // Unit-norm text embedding, when the provider knows the phrase.
  virtual std::optional<VecX<float>> text_embed(const std::string& text) const = 0;
};

// Mixes fixed per-class embeddings by the class coverage of each crop. Coverage maps come from
// rendering the labeled ground-truth scene, so crops that straddle classes produce blended targets.
class SyntheticOracle : public FeatureProvider {
 public:
  // coverage[image_id]: (classes + 1) x pixels map, last channel = background, columns sum to 1.
  SyntheticOracle(MatX<double> clip_classes, VecX<double> clip_background, MatX<double> dino_classes,
                  VecX<double> dino_background, int dino_cell = 4);

  void set_coverage(int image_id, FeatureMap<float> coverage);
  const FeatureMap<float>& coverage(int image_id) const;
  void add_text(const std::string& text, VecX<double> embedding);

  int clip_dim() const override { return int(clip_classes_.rows()); }
  int dino_dim() const override { return int(dino_classes_.rows()); }
  int dino_cell() const { return dino_cell_; }
  VecX<float> clip_embed(const ImageView& image, const CropRect& crop) const override;
  FeatureMap<float> dino_map(const ImageView& image) const override;
  std::optional<VecX<float>> text_embed(const std::string& text) const override;

 private:
  MatX<double> clip_table_;  // clip_dim x (classes + 1)
  MatX<double> dino_table_;
  MatX<double> clip_classes_, dino_classes_;
  int dino_cell_;
  std::map<int, FeatureMap<float>> coverage_;
  std::map<std::string, VecX<double>> text_;
};

// One precomputed pyramid level as stored on disk.
struct ClipGridFile {
  int image_id = 0;
  double scale_m = 0;
  int window_px = 0;
  int stride = 0;
  int rows = 0;
  int cols = 0;
  MatX<float> embeddings;  // clip_dim x (rows * cols), row-major cells
};

// Reads features precomputed by an external model: a manifest.json plus raw little-endian float32 arrays.
class FileProvider : public FeatureProvider {
 public:
  explicit FileProvider(const std::filesystem::path& dir);

  int clip_dim() const override { return clip_dim_; }
  int dino_dim() const override { return dino_dim_; }
  VecX<float> clip_embed(const ImageView& image, const CropRect& crop) const override;
  FeatureMap<float> dino_map(const ImageView& image) const override;
  std::optional<VecX<float>> text_embed(const std::string& text) const override;

  const std::vector<ClipGridFile>& clip_grids() const { return grids_; }

 private:
  int clip_dim_ = 0;
  int dino_dim_ = 0;
  std::vector<ClipGridFile> grids_;
  std::map<int, FeatureMap<float>> dino_;
  std::map<std::string, VecX<float>> text_;
};

// Writes the layout FileProvider reads.
struct FeatureCache {
  int clip_dim = 0;
  int dino_dim = 0;
  std::vector<ClipGridFile> grids;
  std::map<int, FeatureMap<float>> dino;
  std::map<std::string, VecX<float>> text;
};
void write_feature_cache(const FeatureCache& cache, const std::filesystem::path& dir);

}  // namespace l3x
