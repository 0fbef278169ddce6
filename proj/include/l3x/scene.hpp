#pragma once

#include "l3x/common.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace l3x {

// One splat. Scale is stored as log-extent and opacity as a logit so that any real
// parameter vector is a valid Gaussian.
template <class S>
struct Gaussian {
  Vec3<S> mean = Vec3<S>::Zero();
  Vec3<S> log_scale = Vec3<S>::Zero();
  Vec4<S> rotation = Vec4<S>(1, 0, 0, 0);  // w, x, y, z
  S opacity_logit = 0;
  Vec3<S> color = Vec3<S>::Constant(S(0.5));
  VecX<S> feature;  // semantic bottleneck, d' entries

  S opacity() const { return sigmoid(opacity_logit); }
};

// Structure-of-arrays storage for N Gaussians; column i is Gaussian i.
template <class S>
struct GaussianModel {
  Mat3X<S> means;
  Mat3X<S> log_scales;
  Mat4X<S> rotations;
  VecX<S> opacity_logits;
  Mat3X<S> colors;
  MatX<S> features;  // d' x N

  GaussianModel() = default;
  explicit GaussianModel(int feature_dim, Index n = 0) { resize(feature_dim, n); }

  Index size() const { return means.cols(); }
  int feature_dim() const { return int(features.rows()); }
  void resize(int feature_dim, Index n);

  Gaussian<S> gaussian(Index i) const;
  void set(Index i, const Gaussian<S>& g);
  void append(const Gaussian<S>& g);
  // Keeps the columns listed in `keep`, in that order (indices may repeat).
  GaussianModel<S> select(const std::vector<Index>& keep) const;
  void normalize_rotations();

  template <class T>
  GaussianModel<T> cast() const {
    GaussianModel<T> out;
    out.means = means.template cast<T>();
    out.log_scales = log_scales.template cast<T>();
    out.rotations = rotations.template cast<T>();
    out.opacity_logits = opacity_logits.template cast<T>();
    out.colors = colors.template cast<T>();
    out.features = features.template cast<T>();
    return out;
  }
};

// Unit quaternion (w, x, y, z) to rotation matrix; the input is normalized first.
template <class S>
Mat3<S> quaternion_to_rotation(const Vec4<S>& q);

// 2D keypoint of an image as listed in images.txt.
struct Observation {
  double x = 0;
  double y = 0;
  std::int64_t point3d_id = -1;
};

enum class CameraModel { Pinhole, SimplePinhole };

// A registered image: pinhole intrinsics plus world-to-camera pose.
struct Camera {
  int id = 0;
  std::string name;
  Vec4<double> qvec = Vec4<double>(1, 0, 0, 0);  // world-to-camera rotation, w x y z
  Mat3<double> R = Mat3<double>::Identity();
  Vec3<double> t = Vec3<double>::Zero();
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;
  int appearance_index = 0;
  double pixel_size_m = 0;  // 0 until computed

  int intrinsics_id = 1;
  CameraModel model = CameraModel::Pinhole;
  std::vector<Observation> observations;

  Vec3<double> center() const { return -R.transpose() * t; }
  Vec3<double> to_camera(const Vec3<double>& world) const { return R * world + t; }
  // Same pose, intrinsics rescaled to a different raster size.
  Camera resized(int new_width, int new_height) const;
  void set_rotation(const Vec4<double>& q);
  void validate() const;
};

// Camera looking from `eye` at `target`; +y of the image points along -up.
Camera look_at(const Vec3<double>& eye, const Vec3<double>& target, const Vec3<double>& up, double fx, double fy,
               int width, int height);

struct TrackElement {
  int image_id = 0;
  int point2d_index = 0;
};

struct Point3D {
  std::int64_t id = 0;
  Vec3<double> xyz = Vec3<double>::Zero();
  std::array<std::uint8_t, 3> rgb{128, 128, 128};
  double error = 0;
  std::vector<TrackElement> track;
};

struct Scene {
  GaussianModel<double> gaussians;
  std::vector<Camera> cameras;
  std::vector<Point3D> points;
  std::vector<int> labels;      // per-Gaussian class id, synthetic scenes only
  std::vector<int> object_ids;  // per-Gaussian object id, synthetic scenes only

  const Camera& camera_by_id(int id) const;
  // Points whose track references the given image id.
  std::vector<Vec3<double>> visible_points(int image_id) const;
  void validate() const;
};

// ---------------------------------------------------------------------------------
// COLMAP text I/O.

struct ColmapOptions {
  int feature_dim = 3;
};

Scene ingest_colmap(const std::filesystem::path& cameras_path, const std::filesystem::path& images_path,
                    const std::filesystem::path& points_path, const ColmapOptions& options = {});
Scene ingest_colmap_dir(const std::filesystem::path& dir, const ColmapOptions& options = {});
void write_colmap(const Scene& scene, const std::filesystem::path& dir);

// Gaussians centered at the sparse points: isotropic scale = mean distance to the three
// nearest points, opacity logit 0, identity rotation, zero bottleneck feature.
GaussianModel<double> seed_gaussians(const std::vector<Point3D>& points, int feature_dim);

// ---------------------------------------------------------------------------------
// Physical pixel size.

class NoPointsError : public Error {
 public:
  using Error::Error;
};

struct PixelSizeOptions {
  double edge_margin = 0.05;  // fraction of each image dimension excluded at the borders
};

// Metric footprint of one pixel at the distance of the visible points' centroid.
double pixel_physical_size(const Camera& cam, const std::vector<Vec3<double>>& visible_points,
                           const PixelSizeOptions& options = {});

// Width and height estimates for a known scene distance.
double pixel_width_at_distance(double distance, int image_width, double fx);
double pixel_height_at_distance(double distance, int image_height, double fy);

// Computes pixel_size_m for every camera; falls back to the unfiltered point set (and
// appends a warning) when every point lies in the border band.
void compute_pixel_sizes(Scene& scene, std::vector<std::string>* warnings = nullptr,
                         const PixelSizeOptions& options = {});

// ---------------------------------------------------------------------------------
// Synthetic labeled scenes.

struct SyntheticSpec {
  int classes = 2;
  int gaussians_per_class = 50;
  int images = 20;
  int val_images = 0;
  int resolution = 128;
  std::uint64_t seed = 7;
  int clip_dim = 512;
  int dino_dim = 384;
  int feature_dim = 3;
  int stripes_per_class = 3;  // thin interleaved strips per class in the shared region

  void validate() const;
};

struct SyntheticScene {
  Scene scene;
  std::vector<std::string> class_names;
  MatX<double> clip_classes;  // clip_dim x classes, unit columns
  MatX<double> dino_classes;  // dino_dim x classes, unit columns
  VecX<double> clip_background;
  VecX<double> dino_background;
  MatX<double> clip_negatives;  // clip_dim x 2 extra fixed negatives
  std::vector<int> train_cameras;  // indices into scene.cameras
  std::vector<int> val_cameras;
  int object_count = 0;
  double scene_width_m = 0;
  double smallest_structure_m = 0;
};

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec);

}  // namespace l3x
