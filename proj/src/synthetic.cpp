#include "l3x/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace l3x {

namespace {

const char* kClassNames[] = {"towers", "windows", "portals", "domes", "columns", "arches", "roofs", "spires"};

const double kPalette[][3] = {{0.80, 0.35, 0.25}, {0.25, 0.45, 0.80}, {0.30, 0.70, 0.35}, {0.85, 0.75, 0.30},
                              {0.60, 0.35, 0.70}, {0.30, 0.70, 0.70}, {0.55, 0.55, 0.55}, {0.90, 0.55, 0.70}};

constexpr double kHeight = 2.4;        // facade height, meters
constexpr double kPureWidth = 1.1;     // width of a single-class block
constexpr double kStripeWidth = 0.3;   // width of one interleaved strip
constexpr double kSlabDepth = 0.03;    // half-thickness of the facade slab

// Unit vectors with pairwise cosine below `max_cos`, drawn by rejection.
MatX<double> draw_embeddings(Rng& rng, int dim, int count, double max_cos) {
  MatX<double> out(dim, count);
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw Error("could not draw well-separated embeddings");
      VecX<double> v(dim);
      for (int i = 0; i < dim; ++i) v(i) = rng.normal();
      v.normalize();
      bool ok = true;
      for (int j = 0; j < k && ok; ++j) ok = v.dot(out.col(j)) < max_cos;
      if (ok) {
        out.col(k) = v;
        break;
      }
    }
  }
  return out;
}

struct Region {
  double x0, x1;
  int label;
  int object_id;
};

}  // namespace

void SyntheticSpec::validate() const {
  if (classes < 2) throw Error("synthetic scene needs at least 2 classes");
  if (resolution < 32) throw Error("synthetic resolution must be at least 32 pixels (got " + std::to_string(resolution) + ")");
  if (gaussians_per_class < 2) throw Error("synthetic scene needs at least 2 Gaussians per class");
  if (images < 1) throw Error("synthetic scene needs at least one image");
  if (val_images < 0 || stripes_per_class < 1) throw Error("invalid synthetic scene layout");
  if (feature_dim < 1) throw Error("feature dimension must be positive");
}

SyntheticScene generate_synthetic_scene(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticScene out;
  const int K = spec.classes;

  for (int k = 0; k < K; ++k) out.class_names.push_back(k < 8 ? kClassNames[k] : "class_" + std::to_string(k));

  // Classes, then background, then the two fixed negatives share one rejection pool.
  MatX<double> clip = draw_embeddings(rng, spec.clip_dim, K + 3, 0.3);
  out.clip_classes = clip.leftCols(K);
  out.clip_background = clip.col(K);
  out.clip_negatives = clip.rightCols(2);
  MatX<double> dino = draw_embeddings(rng, spec.dino_dim, K + 1, 0.3);
  out.dino_classes = dino.leftCols(K);
  out.dino_background = dino.col(K);

  // Layout along x: first half of the pure blocks, the striped band, then the rest.
  std::vector<Region> regions;
  int object_id = 0;
  double x = 0;
  auto add_pure = [&](int k) {
    regions.push_back({x, x + kPureWidth, k, object_id++});
    x += kPureWidth;
  };
  int first_half = (K + 1) / 2;
  for (int k = 0; k < first_half; ++k) add_pure(k);
  std::vector<Region> stripes;
  for (int s = 0; s < spec.stripes_per_class; ++s) {
    for (int k = 0; k < K; ++k) {
      stripes.push_back({x, x + kStripeWidth, k, object_id++});
      x += kStripeWidth;
    }
  }
  for (int k = first_half; k < K; ++k) add_pure(k);
  regions.insert(regions.end(), stripes.begin(), stripes.end());
  const double total_width = x;
  for (auto& r : regions) {
    r.x0 -= total_width / 2;
    r.x1 -= total_width / 2;
  }
  out.object_count = object_id;
  out.scene_width_m = total_width;
  out.smallest_structure_m = kStripeWidth;

  // Half of each class's Gaussians fill its pure block, the rest its strips.
  GaussianModel<double> model(spec.feature_dim);
  Scene& scene = out.scene;
  for (int k = 0; k < K; ++k) {
    std::vector<const Region*> own_stripes;
    const Region* pure = nullptr;
    for (const auto& r : regions) {
      if (r.label != k) continue;
      if (r.x1 - r.x0 > kStripeWidth * 1.5) pure = &r;
      else own_stripes.push_back(&r);
    }
    int n_pure = spec.gaussians_per_class - spec.gaussians_per_class / 2;
    int n_strip = spec.gaussians_per_class - n_pure;
    auto place = [&](const Region& r, int count) {
      double area = (r.x1 - r.x0) * kHeight;
      double sigma = 0.55 * std::sqrt(area / std::max(count, 1));
      for (int i = 0; i < count; ++i) {
        Gaussian<double> g;
        g.mean = Vec3<double>(rng.uniform(r.x0, r.x1), rng.uniform(-kHeight / 2, kHeight / 2),
                              rng.uniform(-kSlabDepth, kSlabDepth));
        double s = sigma * std::exp(0.2 * rng.normal());
        double aniso = std::exp(0.25 * rng.normal());
        g.log_scale = Vec3<double>(std::log(s * aniso), std::log(s / aniso), std::log(0.3 * s));
        double angle = rng.uniform(0, std::numbers::pi);
        g.rotation = Vec4<double>(std::cos(angle / 2), 0, 0, std::sin(angle / 2));
        g.opacity_logit = 2.0;
        for (int c = 0; c < 3; ++c) g.color(c) = std::clamp(kPalette[k % 8][c] + 0.04 * rng.normal(), 0.0, 1.0);
        g.feature = VecX<double>::Zero(spec.feature_dim);
        model.append(g);
        scene.labels.push_back(k);
        scene.object_ids.push_back(r.object_id);
      }
    };
    place(*pure, n_pure);
    for (std::size_t s = 0; s < own_stripes.size(); ++s) {
      int count = n_strip / int(own_stripes.size()) + (int(s) < n_strip % int(own_stripes.size()) ? 1 : 0);
      place(*own_stripes[s], count);
    }
  }
  scene.gaussians = std::move(model);

  // Cameras on a frontal arc at varying distance, so pixel footprints differ per view.
  const int total_images = spec.images + spec.val_images;
  const double f = spec.resolution * 1.0;
  for (int i = 0; i < total_images; ++i) {
    bool val = false;
    double u;
    if (spec.val_images > 0 && total_images > 1) {
      // Validation views sit between training views on the same arc.
      int stride = std::max(1, total_images / std::max(spec.val_images, 1));
      val = (i % stride == stride / 2) && int(out.val_cameras.size()) < spec.val_images;
    }
    u = total_images > 1 ? double(i) / (total_images - 1) : 0.5;
    double azimuth = (-35.0 + 70.0 * u) * std::numbers::pi / 180.0;
    double elevation = ((i % 3) - 1) * 8.0 * std::numbers::pi / 180.0;
    double radius = 5.3 + 0.7 * std::sin(2.0 * std::numbers::pi * u * 1.5);
    Vec3<double> eye(radius * std::sin(azimuth) * std::cos(elevation), radius * std::sin(elevation),
                     radius * std::cos(azimuth) * std::cos(elevation));
    Camera cam = look_at(eye, Vec3<double>::Zero(), Vec3<double>(0, 1, 0), f, f, spec.resolution, spec.resolution);
    cam.id = i + 1;
    cam.intrinsics_id = 1;
    cam.name = "view_" + std::to_string(i + 1) + ".png";
    cam.appearance_index = i;
    (val ? out.val_cameras : out.train_cameras).push_back(int(scene.cameras.size()));
    scene.cameras.push_back(cam);
  }

  // Sparse points: the true centers, tracked in every view they project into.
  for (Index g = 0; g < scene.gaussians.size(); ++g) {
    Point3D p;
    p.id = g + 1;
    p.xyz = scene.gaussians.means.col(g);
    for (int c = 0; c < 3; ++c) p.rgb[c] = std::uint8_t(std::lround(scene.gaussians.colors(c, g) * 255.0));
    for (auto& cam : scene.cameras) {
      Vec3<double> pc = cam.to_camera(p.xyz);
      if (pc.z() <= 0) continue;
      double px = cam.fx * pc.x() / pc.z() + cam.cx;
      double py = cam.fy * pc.y() / pc.z() + cam.cy;
      if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
      p.track.push_back({cam.id, int(cam.observations.size())});
      cam.observations.push_back({px, py, p.id});
    }
    scene.points.push_back(std::move(p));
  }
  scene.validate();
  return out;
}

}  // namespace l3x
