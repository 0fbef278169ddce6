#pragma once

#include "l3x/common.hpp"
#include "l3x/scene.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

namespace l3x::test {

// Relative error of two gradient vectors, ||a - b|| / max(||a||, ||b||, floor).
template <class A, class B>
double rel_error(const A& a, const B& b, double floor = 1e-12) {
  const double scale = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / scale;
}

// Central differences of f with respect to every entry of x (x is restored afterwards).
template <class M>
MatX<double> numeric_gradient(M& x, const std::function<double()>& f, double h = 1e-5) {
  MatX<double> g(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      const double keep = x(i, j);
      x(i, j) = keep + h;
      const double up = f();
      x(i, j) = keep - h;
      const double down = f();
      x(i, j) = keep;
      g(i, j) = (up - down) / (2 * h);
    }
  return g;
}

// Camera at distance `dist` on +z looking at the origin.
inline Camera test_camera(int width, int height, double dist = 4.0, double f = 0) {
  if (f == 0) f = 1.1 * width;
  Camera c = look_at(Vec3<double>(0.15, -0.1, dist), Vec3<double>::Zero(), Vec3<double>(0, 1, 0), f, f, width, height);
  c.id = 1;
  return c;
}

// Random Gaussians in a unit-ish cube around the origin.
inline GaussianModel<double> random_model(Rng& rng, int n, int feature_dim, double opacity_logit_lo = -1.5,
                                          double opacity_logit_hi = 1.5, double size = 0.12) {
  GaussianModel<double> m(feature_dim);
  for (int i = 0; i < n; ++i) {
    Gaussian<double> g;
    g.mean = Vec3<double>(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.6, 0.6));
    for (int k = 0; k < 3; ++k) g.log_scale(k) = std::log(size * std::exp(0.4 * rng.normal()));
    g.rotation = Vec4<double>(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
    g.opacity_logit = rng.uniform(opacity_logit_lo, opacity_logit_hi);
    for (int k = 0; k < 3; ++k) g.color(k) = rng.uniform();
    g.feature = VecX<double>(feature_dim);
    for (int k = 0; k < feature_dim; ++k) g.feature(k) = rng.normal();
    m.append(g);
  }
  return m;
}

template <class S>
FeatureMap<S> random_map(Rng& rng, int channels, int h, int w, double lo = -1, double hi = 1) {
  FeatureMap<S> m(channels, h, w);
  for (Index j = 0; j < m.data.cols(); ++j)
    for (Index i = 0; i < m.data.rows(); ++i) m.data(i, j) = S(rng.uniform(lo, hi));
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^ std::uint64_t(std::chrono::steady_clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() / ("l3x_" + tag + "_" + std::to_string(rng.next() % 1000000000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace l3x::test
