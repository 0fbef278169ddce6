#include "doctest.h"

#include "checks.hpp"
#include "support.hpp"

#include "l3x/rasterizer.hpp"

using namespace l3x;

namespace {

Camera axis_camera(double f = 100, int size = 32, double c = 15.5) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = cam.cy = c;
  cam.width = cam.height = size;
  return cam;
}

Gaussian<double> splat_at(const Vec3<double>& mean, double sigma, int feature_dim = 1) {
  Gaussian<double> g;
  g.mean = mean;
  g.log_scale.setConstant(std::log(sigma));
  g.feature = VecX<double>::Zero(feature_dim);
  return g;
}

}  // namespace

TEST_CASE("projection on the optical axis") {
  const Camera cam = axis_camera(100, 32, 16);
  const auto sp = project(splat_at({0, 0, 1}, 0.01), cam);
  REQUIRE(sp);
  CHECK(sp->mean2d == Vec2<double>(16, 16));
  CHECK(sp->depth == 1);
}

TEST_CASE("isotropic covariance projects to a scaled identity plus the dilation") {
  const double f = 120, sigma = 0.05, z = 3;
  const auto sp = project(splat_at({0, 0, z}, sigma), axis_camera(f));
  REQUIRE(sp);
  const double s = f * sigma / z;
  CHECK(sp->cov2d(0, 0) == doctest::Approx(s * s + 0.3).epsilon(1e-12));
  CHECK(sp->cov2d(1, 1) == doctest::Approx(s * s + 0.3).epsilon(1e-12));
  CHECK(std::abs(sp->cov2d(0, 1)) < 1e-15);
  CHECK((sp->conic * sp->cov2d - Mat2<double>::Identity()).norm() < 1e-12);
}

TEST_CASE("culling") {
  const Camera cam = axis_camera();
  CHECK_FALSE(project(splat_at({0, 0, -1}, 0.1), cam));
  CHECK_FALSE(project(splat_at({0, 0, 0.005}, 0.1), cam));
  CHECK_FALSE(project(splat_at({50, 0, 1}, 0.01), cam));  // footprint far off screen
  CHECK(project(splat_at({0.17, 0, 1}, 0.01), cam));      // center off screen, footprint overlaps
}

TEST_CASE("depth order with index tie-break") {
  GaussianModel<double> m(1);
  m.append(splat_at({0, 0, 3}, 0.1));
  m.append(splat_at({0.1, 0, 2}, 0.1));
  m.append(splat_at({-0.1, 0, 2}, 0.1));
  const auto list = project_all(m, axis_camera());
  REQUIRE(list.size() == 3);
  CHECK(list[0].gaussian_index == 1);
  CHECK(list[1].gaussian_index == 2);
  CHECK(list[2].gaussian_index == 0);
}

TEST_CASE("two coincident half-opaque splats") {
  GaussianModel<double> m(1);
  auto front = splat_at({0, 0, 1}, 0.01);
  front.feature(0) = 1;
  auto back = splat_at({0, 0, 2}, 0.02);
  m.append(front);
  m.append(back);
  const Camera cam = axis_camera();
  const auto pass = composite(m, cam, m.features, VecX<double>(VecX<double>::Constant(2, 0.5)));
  CHECK(pass.image.at(0, 15, 15) == 0.5);
  CHECK(pass.alpha.at(0, 15, 15) == 0.75);
}

TEST_CASE("a single opaque splat reproduces its feature at the center") {
  GaussianModel<double> m(2);
  auto g = splat_at({0, 0, 1}, 0.01, 2);
  g.feature << 0.7, -2;
  m.append(g);
  const Camera cam = axis_camera();
  const auto raw = composite(m, cam, m.features, VecX<double>(VecX<double>::Ones(1)));
  // Opacity is capped below one, so the raw composite carries the cap.
  CHECK(raw.alpha.at(0, 15, 15) == doctest::Approx(kMaxSplatAlpha));
  CHECK(raw.image.at(0, 15, 15) == doctest::Approx(0.99 * 0.7));
  CompositeOptions opt;
  opt.normalize = true;
  const auto norm = composite(m, cam, m.features, VecX<double>(VecX<double>::Ones(1)), opt);
  CHECK(norm.image.at(0, 15, 15) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(norm.image.at(1, 15, 15) == doctest::Approx(-2).epsilon(1e-15));
}

TEST_CASE("empty scenes render zero maps") {
  GaussianModel<float> m(3);
  RenderOptions opt;
  opt.feat_width = 10;
  opt.feat_height = 8;
  const auto maps = render(m, axis_camera(), opt);
  CHECK(maps.rgb.channels() == 3);
  CHECK(maps.rgb.data.isZero());
  CHECK(maps.alpha.data.isZero());
  CHECK(maps.feat.height == 8);
  CHECK(maps.feat.width == 10);
  CHECK(maps.feat.data.isZero());
}

TEST_CASE("alpha is monotone in each opacity logit") {
  Rng rng(21);
  auto m = l3x::test::random_model(rng, 30, 3, -2, 2, 0.15);
  const Camera cam = l3x::test::test_camera(24, 24);
  auto alpha = [&] {
    VecX<double> op = m.opacity_logits.unaryExpr([](double v) { return sigmoid(v); });
    return composite(m, cam, m.features, op).alpha.data;
  };
  for (int i = 0; i < 30; i += 3) {
    const MatX<double> before = alpha();
    m.opacity_logits(i) += 0.7;
    const MatX<double> after = alpha();
    CHECK((after.array() >= before.array() - 1e-15).all());
  }
}

TEST_CASE("render sizes and float path") {
  Rng rng(22);
  const auto m = l3x::test::random_model(rng, 40, 3).cast<float>();
  const Camera cam = l3x::test::test_camera(40, 30);
  RenderOptions opt;
  opt.feat_width = 20;
  opt.feat_height = 15;
  const auto maps = render(m, cam, opt);
  CHECK(maps.rgb.height == 30);
  CHECK(maps.rgb.width == 40);
  CHECK(maps.feat.height == 15);
  CHECK(maps.feat_alpha.width == 20);
  CHECK(maps.alpha.data.maxCoeff() <= 1.0f);
  CHECK(maps.alpha.data.minCoeff() >= 0.0f);
  CHECK(maps.alpha.data.maxCoeff() > 0.1f);

  // Single and double precision agree to float rounding.
  const auto md = m.cast<double>();
  const auto ref = render(md, cam, opt);
  CHECK((ref.rgb.data.cast<float>() - maps.rgb.data).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("brute-force oracle agrees with tiles of any size") {
  Rng rng(23);
  const auto m = l3x::test::random_model(rng, 50, 3, -1, 3, 0.1);
  const Camera cam = l3x::test::test_camera(32, 32);
  const VecX<double> op = m.opacity_logits.unaryExpr([](double v) { return sigmoid(v); });
  const auto ref = l3x::test::oracle_composite(m, cam, m.features, op);
  for (int tile : {1, 5, 16, 64}) {
    CompositeOptions opt;
    opt.tile = tile;
    CHECK((composite(m, cam, m.features, op, opt).image.data - ref.image).cwiseAbs().maxCoeff() < 1e-12);
  }
}
