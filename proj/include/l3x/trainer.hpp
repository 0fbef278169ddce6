#pragma once

#include "l3x/appearance.hpp"
#include "l3x/common.hpp"
#include "l3x/downsampler.hpp"
#include "l3x/optimizer.hpp"
#include "l3x/rasterizer.hpp"
#include "l3x/scene.hpp"
#include "l3x/semantic_encoder.hpp"
#include "l3x/supervision.hpp"

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace l3x {

struct TrainConfig {
  int iterations = 70000;
  std::uint64_t seed = 0;

  double lr_position_init = 1.6e-5;
  double lr_position_final = 1.6e-7;
  double lr_color = 2.5e-4;
  double lr_opacity = 0.05;
  double lr_scale = 0.005;
  double lr_rotation = 0.001;
  double lr_feature = 1e-3;
  double lr_encoder = 5e-4;
  double lr_downsampler = 5e-4;
  double lr_appearance_net = 5e-4;
  double lr_appearance_embedding = 1e-3;
  double mlp_weight_decay = 1e-5;

  int densify_from = 500;
  int densify_interval = 2000;
  int densify_until = 15000;
  double densify_grad_threshold = 2e-4;
  double percent_dense = 0.2;
  double prune_opacity = 0.005;
  int opacity_reset_interval = 100000;
  int max_gaussians = 0;  // 0 = unbounded

  int feat_size_min = 80;
  int feat_size_max = 120;
  LossWeights weights;
  bool appearance = true;
  DownsampleMode downsample = DownsampleMode::Attenuated;
  int threads = 1;

  void validate() const;
  // 128 px renders, at most 2000 Gaussians, 2000 iterations.
  static TrainConfig desk();
};

// Everything cached for one training image.
struct TrainingView {
  Camera camera;
  int appearance_index = 0;
  FeatureMap<float> rgb;
  ClipPyramid pyramid;
  FeatureMap<float> dino;
  MaskSet masks;
  std::vector<std::vector<Mask>> level_objects;  // object masks sampled on each pyramid level

  // Fills level_objects from masks and pyramid.
  void prepare_masks();
};

struct TrainState {
  int step = 0;
  double scene_extent = 1;
  GaussianModel<float> gaussians;
  SemanticEncoder<float> encoder;
  AttenuatedDownsampler<float> downsampler;
  AppearanceModel<float> appearance;
  std::map<std::string, AdamMoments<float>> moments;
  VecX<float> grad_accum;  // per Gaussian, summed view-space gradient norms
  VecX<float> grad_count;
};

// A named trainable tensor (or its gradient), viewed as a column-major rows x cols block.
struct TensorRef {
  std::string name;
  float* data = nullptr;
  Index rows = 0;
  Index cols = 0;

  Eigen::Map<MatX<float>> map() const { return {data, rows, cols}; }
};

struct TrainGradients {
  GaussianGradients<float> gaussians;
  SemanticEncoder<float>::Gradients encoder;
  AttenuatedDownsampler<float>::Gradients downsampler;
  AppearanceModel<float>::Gradients appearance;
};

// Every trainable tensor, in a fixed order; gradient_refs lists the matching gradients.
std::vector<TensorRef> parameter_refs(TrainState& state);
std::vector<TensorRef> gradient_refs(TrainGradients& grads);
TrainGradients zero_gradients(const TrainState& state);

// Maximum distance from a camera center to the centroid of all camera centers.
double scene_extent(const std::vector<Camera>& cameras);

TrainState initialize_state(const GaussianModel<double>& seeds, const EncoderConfig& encoder,
                            const AppearanceConfig& appearance, int appearance_images, double extent,
                            std::uint64_t seed);

// View index used at a given step: seeded permutation per epoch.
int view_for_step(std::uint64_t seed, int step, int views);
// Square-ish feature render size drawn for a step.
std::pair<int, int> feature_size_for_step(const TrainConfig& config, int step, int height, int width);

struct StepDiagnostics {
  LossTerms terms;
  int feat_height = 0;
  int feat_width = 0;
};

// Forward and backward for one view; gradients are accumulated into `grads` and densification
// statistics into `state`.
StepDiagnostics compute_gradients(TrainState& state, const TrainingView& view, const TrainConfig& config,
                                  int feat_height, int feat_width, TrainGradients& grads,
                                  bool accumulate_stats = true);

double learning_rate(const std::string& name, const TrainConfig& config, int step, double extent);

// One full iteration: gradients, Adam update of every group, density control. Increments state.step.
StepDiagnostics train_step(TrainState& state, const std::vector<TrainingView>& views, const TrainConfig& config);

struct DensifyStats {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
};
DensifyStats densify_and_prune(TrainState& state, const TrainConfig& config, std::uint64_t seed);
void reset_opacity(TrainState& state);

// One JSON object per line.
void write_log_record(std::ostream& os, const TrainState& state, const TrainConfig& config,
                      const StepDiagnostics& diag);

}  // namespace l3x
