#pragma once

#include "l3x/common.hpp"
#include "l3x/scene.hpp"

#include <optional>
#include <vector>

namespace l3x {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovarianceDilation = 0.3;  // px^2 added to the projected covariance
inline constexpr double kMaxSplatAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kCutoffPower = 4.5;  // contributions stop at the 3-sigma ellipse

// A Gaussian after projection into one raster.
template <class S>
struct Splat2D {
  Vec2<S> mean2d;
  Mat2<S> cov2d;
  Mat2<S> conic;  // cov2d^-1
  S depth = 0;
  S radius = 0;  // 3-sigma pixel radius along the major axis
  Index gaussian_index = 0;
  Vec3<S> cam_point;  // camera-space center
  Mat3<S> cov3d;
};

template <class S>
std::optional<Splat2D<S>> project(const Gaussian<S>& g, const Camera& cam, Index index = 0);

// Every visible Gaussian, ordered front to back by depth with index as tie-break.
template <class S>
std::vector<Splat2D<S>> project_all(const GaussianModel<S>& model, const Camera& cam);

// Per-Gaussian RGB and opacity offsets applied to the color pass only.
template <class S>
struct ColorOpacityShift {
  Mat3X<S> color;
  VecX<S> opacity;
};

struct CompositeOptions {
  int tile = 16;
  int threads = 1;
  bool normalize = false;  // divide the composite by accumulated alpha
};

// One compositing pass at one resolution, with everything needed to run it backwards.
template <class S>
struct RenderPass {
  Camera camera;
  std::vector<Splat2D<S>> splats;
  MatX<S> values;     // C x N, by Gaussian index
  VecX<S> opacities;  // N
  FeatureMap<S> image;
  FeatureMap<S> alpha;
  CompositeOptions options;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> tile_splats;  // per tile, indices into splats, depth order
};

template <class S>
RenderPass<S> composite(const GaussianModel<S>& model, const Camera& cam, const MatX<S>& values,
                        const VecX<S>& opacities, const CompositeOptions& options = {});

// Gradients of one pass with respect to its direct inputs.
template <class S>
struct PassGradients {
  MatX<S> values;      // C x N
  VecX<S> opacities;   // N
  MatX<S> mean2d;      // 2 x N, pixel units
  MatX<S> conic;       // 3 x N, (a, b, c) of 0.5 a dx^2 + b dx dy + 0.5 c dy^2
};

template <class S>
PassGradients<S> composite_backward(const RenderPass<S>& pass, const FeatureMap<S>& d_image,
                                    const FeatureMap<S>* d_alpha = nullptr);

// Gradients with respect to every Gaussian parameter.
template <class S>
struct GaussianGradients {
  Mat3X<S> means;
  Mat3X<S> log_scales;
  Mat4X<S> rotations;
  VecX<S> opacity_logits;
  Mat3X<S> colors;
  MatX<S> features;

  GaussianGradients() = default;
  GaussianGradients(int feature_dim, Index n) { reset(feature_dim, n); }
  void reset(int feature_dim, Index n);
};

// Chains mean2d/conic gradients of a pass through the projection into means, scales and rotations.
template <class S>
void projection_backward(const RenderPass<S>& pass, const GaussianModel<S>& model, const PassGradients<S>& grads,
                         GaussianGradients<S>& out);

struct RenderOptions {
  int rgb_width = 0;  // 0 means the camera's own size
  int rgb_height = 0;
  int feat_width = 0;
  int feat_height = 0;
  bool render_rgb = true;
  bool render_features = true;
  bool normalize_features = false;
  int threads = 1;
  int tile = 16;
};

template <class S>
struct RenderedMaps {
  FeatureMap<S> rgb;
  FeatureMap<S> alpha;
  FeatureMap<S> feat;
  FeatureMap<S> feat_alpha;
};

// Effective per-Gaussian inputs of the color pass.
template <class S>
void color_pass_inputs(const GaussianModel<S>& model, const ColorOpacityShift<S>* shift, MatX<S>& colors,
                       VecX<S>& opacities);

template <class S>
RenderedMaps<S> render(const GaussianModel<S>& model, const Camera& cam, const RenderOptions& options = {},
                       const ColorOpacityShift<S>* appearance = nullptr);

}  // namespace l3x
