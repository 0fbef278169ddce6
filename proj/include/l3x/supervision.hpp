#pragma once

#include "l3x/common.hpp"
#include "l3x/downsampler.hpp"
#include "l3x/providers.hpp"
#include "l3x/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace l3x {

inline constexpr int kMinWindowPx = 8;

struct PyramidGeometry {
  int window_px = 0;
  int stride = 0;
  int rows = 0;
  int cols = 0;
};

// Crop layout for one physical scale; nullopt when the window falls outside [8, min(H, W)] pixels.
std::optional<PyramidGeometry> pyramid_geometry(double scale_m, double pixel_size_m, int height, int width);

struct PyramidLevel {
  double scale_m = 0;
  PyramidGeometry geometry;
  MatX<float> embeddings;  // clip_dim x (rows * cols), row-major cells

  // Image-space center of crop (row, col).
  double center_y(int row) const { return row * geometry.stride + geometry.window_px * 0.5; }
  double center_x(int col) const { return col * geometry.stride + geometry.window_px * 0.5; }
  // Part of a map_h x map_w prediction (covering an image_h x image_w image) that the grid
  // partitions: one stride-sized cell around each crop center.
  SourceRegion region(int map_h, int map_w, int image_h, int image_w) const;
};

struct ClipPyramid {
  int image_id = 0;
  int height = 0;
  int width = 0;
  std::vector<PyramidLevel> levels;
};

// Embeds every crop of every valid scale. Scales whose window is out of range are skipped and
// reported through `warnings`.
ClipPyramid build_pyramid(const ImageView& image, const Camera& cam, const FeatureProvider& provider,
                          const std::vector<double>& scales_m, std::vector<std::string>* warnings = nullptr);

std::vector<ClipGridFile> pyramid_to_files(const ClipPyramid& pyramid);
ClipPyramid pyramid_from_files(const std::vector<ClipGridFile>& grids, int image_id, int height, int width);

// `count` log-spaced scales from `smallest_m` to `largest_m`.
std::vector<double> log_spaced_scales(double smallest_m, double largest_m, int count);

struct MaskSet {
  Mask building;
  std::vector<Mask> objects;

  void validate(int height, int width) const;
};

// Image mask sampled at each crop center of a level.
Mask level_mask(const PyramidLevel& level, const Mask& image_mask);

// Mean absolute error over masked pixels and all channels; 0 for an empty mask.
template <class S>
S masked_l1(const FeatureMap<S>& pred, const FeatureMap<S>& target, const Mask& mask, FeatureMap<S>* grad = nullptr);

enum class DownsampleMode { Attenuated, Bilinear };

template <class S>
struct ClipScaleTerm {
  SourceRegion region;
  DownsampleResult<S> down;  // down.output is F_d; owner/softmax are empty in bilinear mode
  Mask mask;
  S loss = 0;
};

template <class S>
struct ClipLoss {
  S value = 0;
  DownsampleMode mode = DownsampleMode::Attenuated;
  std::vector<ClipScaleTerm<S>> scales;
};

// Per scale: downsample the decoded CLIP map to the grid, masked L1 against the targets. Averaged
// over scales. `weights` (H x W x 1) is required in attenuated mode.
template <class S>
ClipLoss<S> loss_clip_forward(const FeatureMap<S>& clip_map, const FeatureMap<S>* weights, const ClipPyramid& pyramid,
                              const Mask& building_mask, DownsampleMode mode = DownsampleMode::Attenuated);

// Backpropagates d_value plus optional extra upstream gradients on each scale's F_d.
template <class S>
void loss_clip_backward(const FeatureMap<S>& clip_map, const ClipPyramid& pyramid, const ClipLoss<S>& forward,
                        S d_value, const std::vector<FeatureMap<S>>* d_fd, FeatureMap<S>& d_clip_map,
                        FeatureMap<S>* d_weights);

// Convenience: full attenuated CLIP loss with the downsampler's predicted weights.
template <class S>
S loss_clip(const FeatureMap<S>& clip_map, const AttenuatedDownsampler<S>& ad, const ClipPyramid& pyramid,
            const Mask& building_mask);

// Decoded map is bilinearly resized to the ground-truth grid; building mask is resampled (nearest).
template <class S>
S loss_dino(const FeatureMap<S>& decoded, const FeatureMap<S>& target, const Mask& building_mask,
            FeatureMap<S>* d_decoded = nullptr);

// Sum over masks of the channel-mean population variance of the masked features.
// Masks must already match the map resolution; masks with fewer than 2 pixels add 0.
template <class S>
S loss_sam(const FeatureMap<S>& features, const std::vector<Mask>& masks, FeatureMap<S>* grad = nullptr);

struct LossWeights {
  double clip = 1.0;
  double dino = 0.5;
  double sam = 0.005;
  double dssim = 0.5;
};

struct LossTerms {
  double l1 = 0;
  double dssim = 0;
  double rec = 0;
  double clip = 0;
  double dino = 0;
  double sam = 0;
  double total = 0;
};

class NonFiniteLossError : public Error {
 public:
  using Error::Error;
};

// rec = (1 - w.dssim) l1 + w.dssim dssim, total = rec + weighted semantic terms. Fills both fields
// and throws NonFiniteLossError naming every offending term.
double total_loss(LossTerms& terms, const LossWeights& weights);

}  // namespace l3x
