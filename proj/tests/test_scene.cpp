#include "doctest.h"

#include "support.hpp"

#include "l3x/binary_io.hpp"
#include "l3x/scene.hpp"

#include <fstream>

using namespace l3x;
using l3x::test::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

// Three images of one camera; point 1 is seen by images 1 and 2 only.
void write_model(const TempDir& dir, const std::string& cameras) {
  write_text(dir / "cameras.txt", "# comment\n" + cameras);
  write_text(dir / "images.txt",
             "1 1 0 0 0 0 0 5 1 a.png\n10 20 1 15 25 2\n"
             "2 1 0 0 0 0.5 0 5 1 b.png\n12 22 1\n"
             "3 1 0 0 0 -0.5 0 5 1 c.png\n\n");
  write_text(dir / "points3D.txt",
             "1 0 0 0 200 100 50 0.5 1 0 2 0\n"
             "2 0.1 0.2 0.3 10 20 30 0.1 1 1\n");
}

}  // namespace

TEST_CASE("SIMPLE_PINHOLE sets both focal lengths") {
  TempDir dir("colmap");
  write_model(dir, "1 SIMPLE_PINHOLE 640 480 500 320 240\n");
  Scene s = ingest_colmap_dir(dir.path());
  REQUIRE(s.cameras.size() == 3);
  CHECK(s.cameras[0].fx == 500);
  CHECK(s.cameras[0].fy == 500);
  CHECK(s.cameras[0].model == CameraModel::SimplePinhole);
  CHECK(s.cameras[2].observations.empty());
}

TEST_CASE("visibility lists come from tracks") {
  TempDir dir("colmap");
  write_model(dir, "1 PINHOLE 640 480 500 510 320 240\n");
  Scene s = ingest_colmap_dir(dir.path());
  REQUIRE(s.points.size() == 2);
  CHECK(s.points[0].track.size() == 2);
  CHECK(s.visible_points(1).size() == 2);
  CHECK(s.visible_points(2).size() == 1);
  CHECK(s.visible_points(3).empty());
  CHECK(s.cameras[0].fy == 510);
  CHECK(s.points[0].rgb[0] == 200);
}

TEST_CASE("unsupported camera models and malformed lines are rejected") {
  TempDir dir("colmap");
  write_model(dir, "1 OPENCV 640 480 500 500 320 240 0 0 0 0\n");
  CHECK_THROWS_AS(ingest_colmap_dir(dir.path()), UnsupportedModelError);

  write_model(dir, "1 PINHOLE 640 480 500 500 320 240\n2 PINHOLE 640 x 1 1 1 1\n");
  try {
    ingest_colmap_dir(dir.path());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("COLMAP text round trip") {
  TempDir dir("colmap");
  write_model(dir, "1 PINHOLE 640 480 500 510 320 240\n");
  Scene a = ingest_colmap_dir(dir.path());
  TempDir out("colmap_out");
  write_colmap(a, out.path());
  Scene b = ingest_colmap_dir(out.path());
  REQUIRE(b.cameras.size() == a.cameras.size());
  for (std::size_t i = 0; i < a.cameras.size(); ++i) {
    CHECK(b.cameras[i].R.isApprox(a.cameras[i].R, 1e-15));
    CHECK(b.cameras[i].t == a.cameras[i].t);
    CHECK(b.cameras[i].observations.size() == a.cameras[i].observations.size());
  }
  CHECK(b.points[1].xyz == a.points[1].xyz);
}

TEST_CASE("pixel size at a known distance") {
  // 1000 px, f = 1000, distance 10: 2 * 10 * tan(atan(1) / 1000).
  CHECK(pixel_width_at_distance(10, 1000, 1000) == doctest::Approx(0.0157079664977702506).epsilon(1e-14));

  Camera cam = look_at({0, 0, 10}, {0, 0, 0}, {0, 1, 0}, 1000, 1000, 1000, 1000);
  const double got = pixel_physical_size(cam, {{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}});
  CHECK(got == doctest::Approx(0.0157079664977702506).epsilon(1e-12));

  // Points in the border band only.
  CHECK_THROWS_AS(pixel_physical_size(cam, {{4.9, 0, 0}}), NoPointsError);
  CHECK_THROWS_AS(pixel_physical_size(cam, {}), NoPointsError);
}

TEST_CASE("seeded Gaussians use the mean distance to three neighbours") {
  std::vector<Point3D> pts(4);
  pts[0].xyz = {0, 0, 0};
  pts[1].xyz = {1, 0, 0};
  pts[2].xyz = {0, 2, 0};
  pts[3].xyz = {0, 0, 3};
  const auto g = seed_gaussians(pts, 3);
  CHECK(std::exp(g.log_scales(0, 0)) == doctest::Approx(2.0));
  CHECK(g.opacity_logits(0) == 0);
  CHECK(g.rotations.col(0) == Vec4<double>(1, 0, 0, 0));
  CHECK(g.features.isZero());
}

TEST_CASE("quaternions map to rotations") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Vec4<double> q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    const Mat3<double> R = quaternion_to_rotation<double>(q);
    CHECK((R * R.transpose() - Mat3<double>::Identity()).norm() < 1e-12);
    CHECK(R.determinant() == doctest::Approx(1.0));
    CHECK((quaternion_to_rotation<double>(-2.0 * q) - R).norm() < 1e-12);
  }
}

TEST_CASE("model selection and casting") {
  Rng rng(4);
  auto m = l3x::test::random_model(rng, 5, 3);
  auto s = m.select({4, 0, 0});
  CHECK(s.size() == 3);
  CHECK(s.means.col(0) == m.means.col(4));
  CHECK(s.features.col(2) == m.features.col(0));
  auto f = m.cast<float>();
  CHECK(f.feature_dim() == 3);
}

TEST_CASE("synthetic scenes are deterministic") {
  SyntheticSpec spec;
  spec.gaussians_per_class = 20;
  spec.images = 4;
  spec.val_images = 1;
  spec.resolution = 32;
  const auto a = generate_synthetic_scene(spec);
  const auto b = generate_synthetic_scene(spec);
  CHECK(a.scene.gaussians.means == b.scene.gaussians.means);
  CHECK(a.scene.cameras.size() == 5);
  CHECK(a.train_cameras.size() == 4);
  CHECK(a.val_cameras.size() == 1);
  CHECK(a.class_names.size() == 2);
  CHECK(a.clip_classes.colwise().norm().isOnes(1e-12));
  spec.seed = 8;
  CHECK(generate_synthetic_scene(spec).scene.gaussians.means != a.scene.gaussians.means);
}

TEST_CASE("rng streams are keyed") {
  Rng a = Rng::keyed(1, 2, 3), b = Rng::keyed(1, 2, 3), c = Rng::keyed(1, 3, 2);
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0 && u < 1));
  }
}

TEST_CASE("mask resampling keeps masks binary") {
  Mask m(4, 4);
  m(1, 1) = 255;
  const Mask up = resample_nearest(m, 8, 8);
  CHECK(up.count() == 4);
  CHECK(up(2, 2) == 255);
}
