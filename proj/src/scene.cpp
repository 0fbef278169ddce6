#include "l3x/scene.hpp"

#include <algorithm>
#include <cmath>

namespace l3x {

template <class S>
void GaussianModel<S>::resize(int feature_dim, Index n) {
  means.setZero(3, n);
  log_scales.setZero(3, n);
  rotations.setZero(4, n);
  rotations.row(0).setOnes();
  opacity_logits.setZero(n);
  colors.setConstant(3, n, S(0.5));
  features.setZero(feature_dim, n);
}

template <class S>
Gaussian<S> GaussianModel<S>::gaussian(Index i) const {
  Gaussian<S> g;
  g.mean = means.col(i);
  g.log_scale = log_scales.col(i);
  g.rotation = rotations.col(i);
  g.opacity_logit = opacity_logits(i);
  g.color = colors.col(i);
  g.feature = features.col(i);
  return g;
}

template <class S>
void GaussianModel<S>::set(Index i, const Gaussian<S>& g) {
  if (g.feature.size() != features.rows()) throw Error("Gaussian feature has wrong dimension");
  means.col(i) = g.mean;
  log_scales.col(i) = g.log_scale;
  rotations.col(i) = g.rotation;
  opacity_logits(i) = g.opacity_logit;
  colors.col(i) = g.color;
  features.col(i) = g.feature;
}

template <class S>
void GaussianModel<S>::append(const Gaussian<S>& g) {
  Index n = size();
  means.conservativeResize(3, n + 1);
  log_scales.conservativeResize(3, n + 1);
  rotations.conservativeResize(4, n + 1);
  opacity_logits.conservativeResize(n + 1);
  colors.conservativeResize(3, n + 1);
  features.conservativeResize(features.rows(), n + 1);
  set(n, g);
}

template <class S>
GaussianModel<S> GaussianModel<S>::select(const std::vector<Index>& keep) const {
  GaussianModel<S> out(feature_dim(), Index(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Index i = keep[k];
    out.means.col(k) = means.col(i);
    out.log_scales.col(k) = log_scales.col(i);
    out.rotations.col(k) = rotations.col(i);
    out.opacity_logits(k) = opacity_logits(i);
    out.colors.col(k) = colors.col(i);
    out.features.col(k) = features.col(i);
  }
  return out;
}

template <class S>
void GaussianModel<S>::normalize_rotations() {
  for (Index i = 0; i < size(); ++i) {
    S n = rotations.col(i).norm();
    if (n > S(0)) {
      rotations.col(i) /= n;
    } else {
      rotations.col(i) = Vec4<S>(1, 0, 0, 0);
    }
  }
}

template struct GaussianModel<float>;
template struct GaussianModel<double>;

template <class S>
Mat3<S> quaternion_to_rotation(const Vec4<S>& q_in) {
  Vec4<S> q = q_in / q_in.norm();
  S w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3<S> R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

template Mat3<float> quaternion_to_rotation(const Vec4<float>&);
template Mat3<double> quaternion_to_rotation(const Vec4<double>&);

Camera Camera::resized(int new_width, int new_height) const {
  Camera c = *this;
  double sx = double(new_width) / width;
  double sy = double(new_height) / height;
  c.fx = fx * sx;
  c.cx = cx * sx;
  c.fy = fy * sy;
  c.cy = cy * sy;
  c.width = new_width;
  c.height = new_height;
  c.observations.clear();
  return c;
}

void Camera::set_rotation(const Vec4<double>& q) {
  qvec = q;
  R = quaternion_to_rotation(q);
}

void Camera::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw Error("camera " + std::to_string(id) + ": focal lengths must be positive");
  if (width < 1 || height < 1) throw Error("camera " + std::to_string(id) + ": image size must be positive");
}

Camera look_at(const Vec3<double>& eye, const Vec3<double>& target, const Vec3<double>& up, double fx, double fy,
               int width, int height) {
  Vec3<double> z = (target - eye).normalized();
  Vec3<double> x = z.cross(up).normalized();
  // Image y grows downward, so camera y = z × x points along -up.
  Vec3<double> y = z.cross(x);
  Mat3<double> R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  Eigen::Quaterniond q(R);
  q.normalize();
  Camera cam;
  cam.set_rotation(Vec4<double>(q.w(), q.x(), q.y(), q.z()));
  cam.t = -cam.R * eye;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = width * 0.5;
  cam.cy = height * 0.5;
  cam.width = width;
  cam.height = height;
  return cam;
}

const Camera& Scene::camera_by_id(int id) const {
  for (const auto& c : cameras)
    if (c.id == id) return c;
  throw Error("no camera with id " + std::to_string(id));
}

std::vector<Vec3<double>> Scene::visible_points(int image_id) const {
  std::vector<Vec3<double>> out;
  for (const auto& p : points) {
    for (const auto& t : p.track) {
      if (t.image_id == image_id) {
        out.push_back(p.xyz);
        break;
      }
    }
  }
  return out;
}

void Scene::validate() const {
  for (const auto& c : cameras) c.validate();
  for (const auto& p : points) {
    for (const auto& t : p.track) {
      bool found = std::any_of(cameras.begin(), cameras.end(), [&](const Camera& c) { return c.id == t.image_id; });
      if (!found)
        throw Error("point " + std::to_string(p.id) + " references unknown image " + std::to_string(t.image_id));
    }
  }
  if (!labels.empty() && Index(labels.size()) != gaussians.size())
    throw Error("labeled scene must carry one label per Gaussian");
}

GaussianModel<double> seed_gaussians(const std::vector<Point3D>& points, int feature_dim) {
  const Index n = Index(points.size());
  GaussianModel<double> model(feature_dim, n);
  for (Index i = 0; i < n; ++i) {
    // Three smallest squared distances, brute force.
    std::array<double, 3> best{INFINITY, INFINITY, INFINITY};
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = (points[i].xyz - points[j].xyz).squaredNorm();
      if (d2 < best[2]) {
        best[2] = d2;
        std::sort(best.begin(), best.end());
      }
    }
    double sum = 0;
    int count = 0;
    for (double d2 : best) {
      if (std::isfinite(d2)) {
        sum += std::sqrt(std::max(d2, 1e-7));
        ++count;
      }
    }
    double scale = count > 0 ? sum / count : 0.01;
    model.means.col(i) = points[i].xyz;
    model.log_scales.col(i).setConstant(std::log(scale));
    for (int c = 0; c < 3; ++c) model.colors(c, i) = points[i].rgb[c] / 255.0;
  }
  return model;
}

double pixel_width_at_distance(double distance, int image_width, double fx) {
  double ifov = std::atan(double(image_width) / fx) / double(image_width);
  return 2.0 * distance * std::tan(ifov);
}

double pixel_height_at_distance(double distance, int image_height, double fy) {
  return pixel_width_at_distance(distance, image_height, fy);
}

double pixel_physical_size(const Camera& cam, const std::vector<Vec3<double>>& visible_points,
                           const PixelSizeOptions& options) {
  const double mx = options.edge_margin * cam.width;
  const double my = options.edge_margin * cam.height;
  Vec3<double> sum = Vec3<double>::Zero();
  std::size_t kept = 0;
  for (const auto& p : visible_points) {
    Vec3<double> pc = cam.to_camera(p);
    if (pc.z() <= 0) continue;
    double u = cam.fx * pc.x() / pc.z() + cam.cx;
    double v = cam.fy * pc.y() / pc.z() + cam.cy;
    if (u < mx || u > cam.width - mx || v < my || v > cam.height - my) continue;
    sum += p;
    ++kept;
  }
  if (kept == 0) throw NoPointsError("camera " + std::to_string(cam.id) + ": no visible points away from the image edges");
  double d = (cam.center() - sum / double(kept)).norm();
  return 0.5 * (pixel_width_at_distance(d, cam.width, cam.fx) + pixel_height_at_distance(d, cam.height, cam.fy));
}

void compute_pixel_sizes(Scene& scene, std::vector<std::string>* warnings, const PixelSizeOptions& options) {
  for (auto& cam : scene.cameras) {
    auto pts = scene.visible_points(cam.id);
    try {
      cam.pixel_size_m = pixel_physical_size(cam, pts, options);
    } catch (const NoPointsError& e) {
      if (pts.empty()) throw;
      if (warnings) warnings->push_back(std::string(e.what()) + "; using all visible points");
      cam.pixel_size_m = pixel_physical_size(cam, pts, PixelSizeOptions{-1e9});
    }
  }
}

}  // namespace l3x
