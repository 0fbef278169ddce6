#include "checks.hpp"

#include "support.hpp"

#include "l3x/appearance.hpp"
#include "l3x/decoder_mlp.hpp"
#include "l3x/downsampler.hpp"
#include "l3x/hash_grid.hpp"
#include "l3x/rasterizer.hpp"
#include "l3x/supervision.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace l3x::test {
namespace {

template <class M>
double dot_loss(const FeatureMap<double>& weights, const M& values) {
  return weights.data.cwiseProduct(values).sum();
}

// Accumulates the worst relative error over named tensors.
struct Worst {
  double value = 0;
  std::ostringstream detail;
  template <class A, class B>
  void add(const char* name, const A& analytic, const B& numeric, double floor = 1e-12) {
    const double e = rel_error(analytic, numeric, floor);
    detail << name << "=" << e << " ";
    value = std::max(value, e);
  }
  CheckResult result(double tol) const { return {value < tol, value, detail.str()}; }
};

}  // namespace

// ---------------------------------------------------------------------------------

OracleImage oracle_composite(const GaussianModel<double>& model, const Camera& cam, const MatX<double>& values,
                             const VecX<double>& opacities) {
  struct Proj {
    double depth;
    Index index;
    Eigen::Vector2d mean;
    Eigen::Matrix2d conic;
  };
  std::vector<Proj> list;
  for (Index i = 0; i < model.size(); ++i) {
    const Eigen::Vector3d p = cam.R * model.means.col(i) + cam.t;
    if (p.z() <= kNearPlane) continue;
    const Vec4<double> q = model.rotations.col(i);
    const Eigen::Matrix3d rot = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();
    const Eigen::Vector3d s = model.log_scales.col(i).array().exp();
    const Eigen::Matrix3d sigma = rot * s.array().square().matrix().asDiagonal() * rot.transpose();
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / p.z(), 0, -cam.fx * p.x() / (p.z() * p.z()), 0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
    Eigen::Matrix2d cov = J * cam.R * sigma * cam.R.transpose() * J.transpose();
    cov += kCovarianceDilation * Eigen::Matrix2d::Identity();
    cov(1, 0) = cov(0, 1);
    if (cov.determinant() <= 0) continue;
    list.push_back({p.z(), i, Eigen::Vector2d(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy),
                    cov.inverse()});
  }
  std::sort(list.begin(), list.end(),
            [](const Proj& a, const Proj& b) { return a.depth != b.depth ? a.depth < b.depth : a.index < b.index; });

  OracleImage out;
  out.image.setZero(values.rows(), Index(cam.width) * cam.height);
  out.alpha.setZero(Index(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Index pix = Index(y) * cam.width + x;
      const Eigen::Vector2d px(x + 0.5, y + 0.5);
      double T = 1;
      for (const Proj& g : list) {
        const Eigen::Vector2d d = px - g.mean;
        const double power = 0.5 * d.dot(g.conic * d);
        if (power > kCutoffPower) continue;
        const double a = std::min(kMaxSplatAlpha, opacities(g.index) * std::exp(-power));
        out.image.col(pix) += a * T * values.col(g.index);
        T *= 1 - a;
        if (T < kMinTransmittance) break;
      }
      out.alpha(pix) = 1 - T;
    }
  return out;
}

CheckResult check_compositing_oracle(int scenes, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (int s = 0; s < scenes; ++s) {
    const int n = rng.integer(1, 100);
    GaussianModel<double> m = random_model(rng, n, 3, -2.0, 3.0, rng.uniform(0.04, 0.25));
    const Camera cam = test_camera(32, 32, rng.uniform(2.0, 5.0));
    VecX<double> op(n);
    for (int i = 0; i < n; ++i) op(i) = sigmoid(m.opacity_logits(i));
    for (const MatX<double>& v : {MatX<double>(m.colors), m.features}) {
      const auto pass = composite(m, cam, v, op);
      const auto ref = oracle_composite(m, cam, v, op);
      worst = std::max(worst, (pass.image.data - ref.image).cwiseAbs().maxCoeff());
      worst = std::max(worst, (pass.alpha.data.row(0).transpose() - ref.alpha).cwiseAbs().maxCoeff());
    }
  }
  return {worst < 1e-10, worst, std::to_string(scenes) + " scenes"};
}

// ---------------------------------------------------------------------------------

CheckResult check_rasterizer_gradients(std::uint64_t seed) {
  Rng rng(seed);
  const Camera cam = test_camera(20, 18, 4.0);
  GaussianModel<double> m = random_model(rng, 6, 3, -1.0, 1.0, 0.18);
  const auto r_rgb = random_map<double>(rng, 3, cam.height, cam.width);
  const auto r_alpha = random_map<double>(rng, 1, cam.height, cam.width);
  const auto r_feat = random_map<double>(rng, 3, cam.height, cam.width);

  auto opacities = [&] { return VecX<double>(m.opacity_logits.unaryExpr([](double v) { return sigmoid(v); })); };
  auto loss = [&]() -> double {
    const VecX<double> op = opacities();
    const auto p1 = composite(m, cam, MatX<double>(m.colors), op);
    const auto p2 = composite(m, cam, m.features, op);
    return dot_loss(r_rgb, p1.image.data) + dot_loss(r_alpha, p1.alpha.data) + dot_loss(r_feat, p2.image.data);
  };

  GaussianGradients<double> g(3, m.size());
  const VecX<double> op = opacities();
  const auto p1 = composite(m, cam, MatX<double>(m.colors), op);
  const auto g1 = composite_backward(p1, r_rgb, &r_alpha);
  const auto p2 = composite(m, cam, m.features, op);
  const auto g2 = composite_backward(p2, r_feat);
  g.colors += g1.values;
  g.features += g2.values;
  projection_backward(p1, m, g1, g);
  projection_backward(p2, m, g2, g);
  g.opacity_logits += (g1.opacities + g2.opacities).cwiseProduct(op.cwiseProduct((1 - op.array()).matrix()));

  Worst w;
  w.add("means", g.means, numeric_gradient(m.means, loss));
  w.add("log_scales", g.log_scales, numeric_gradient(m.log_scales, loss));
  w.add("rotations", g.rotations, numeric_gradient(m.rotations, loss));
  w.add("opacity", g.opacity_logits, numeric_gradient(m.opacity_logits, loss));
  w.add("colors", g.colors, numeric_gradient(m.colors, loss));
  w.add("features", g.features, numeric_gradient(m.features, loss));
  return w.result(1e-4);
}

namespace {

// Rejects inputs whose lattice position sits within `margin` of a cell face at any level.
bool away_from_faces(const HashGridConfig& c, const MatX<double>& m, double margin) {
  for (int l = 0; l < c.levels; ++l)
    for (Index j = 0; j < m.cols(); ++j)
      for (Index d = 0; d < m.rows(); ++d) {
        const double pos = sigmoid(m(d, j)) * c.resolution(l);
        const double frac = pos - std::floor(pos);
        if (frac < margin || frac > 1 - margin) return false;
      }
  return true;
}

double hash_grid_case(const HashGridConfig& config, Rng& rng, Worst& w, const char* tag) {
  HashGrid<double> grid(config);
  grid.initialize(rng, 1.0);
  MatX<double> m(config.bottleneck_dim, 3);
  do {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index d = 0; d < m.rows(); ++d) m(d, j) = rng.uniform(-2, 2);
  } while (!away_from_faces(config, m, 1e-3));
  MatX<double> r(config.output_dim(), m.cols());
  for (Index j = 0; j < r.cols(); ++j)
    for (Index i = 0; i < r.rows(); ++i) r(i, j) = rng.uniform(-1, 1);

  auto loss = [&] { return r.cwiseProduct(grid.encode(m)).sum(); };
  MatX<double> d_table, d_m;
  grid.backward(m, r, d_table, d_m);
  const std::string name = tag;
  w.add((name + ".table").c_str(), d_table, numeric_gradient(grid.table(), loss));
  w.add((name + ".input").c_str(), d_m, numeric_gradient(m, loss, 1e-6));
  return w.value;
}

}  // namespace

CheckResult check_hash_grid_gradients(std::uint64_t seed) {
  Rng rng(seed);
  Worst w;
  hash_grid_case(HashGridConfig{}, rng, w, "d3");
  HashGridConfig other;
  other.levels = 5;
  other.log2_table_size = 6;
  other.features_per_entry = 3;
  other.n_min = 4;
  other.n_max = 300;
  other.passes = 4;
  other.bottleneck_dim = 2;
  hash_grid_case(other, rng, w, "d2");
  return w.result(1e-4);
}

CheckResult check_decoder_gradients(std::uint64_t seed) {
  Rng rng(seed);
  DecoderMLP<double> mlp(6, 5, 4);
  mlp.initialize(rng);
  MatX<double> x = MatX<double>::NullaryExpr(6, 4, [&] { return rng.normal(); });
  const MatX<double> r = MatX<double>::NullaryExpr(9, 4, [&] { return rng.uniform(-1, 1); });
  auto loss = [&] { return r.cwiseProduct(mlp.forward(x)).sum(); };

  DecoderMLP<double>::Cache cache;
  mlp.forward(x, &cache);
  auto grads = mlp.zero_gradients();
  const MatX<double> dx = mlp.backward(cache, r, grads);

  Worst w;
  for (int k = 0; k < 4; ++k) {
    const std::string n = "layer" + std::to_string(k);
    w.add((n + ".weight").c_str(), grads.weight[k], numeric_gradient(mlp.layers()[k].weight, loss));
    w.add((n + ".bias").c_str(), grads.bias[k], numeric_gradient(mlp.layers()[k].bias, loss));
  }
  w.add("input", dx, numeric_gradient(x, loss));

  // Staged path with the head split into its two row blocks.
  auto grads2 = mlp.zero_gradients();
  DecoderMLP<double>::Cache c2;
  const MatX<double> h = mlp.hidden(x, &c2);
  MatX<double> d_r = mlp.head_backward(h, r.topRows(5), 0, grads2);
  d_r += mlp.head_backward(h, r.bottomRows(4), 5, grads2);
  const MatX<double> dx2 = mlp.hidden_backward(c2, d_r, grads2);
  w.add("staged.input", dx2, dx);
  for (int k = 0; k < 4; ++k) w.add("staged.weight", grads2.weight[k], grads.weight[k]);
  return w.result(1e-4);
}

CheckResult check_downsampler_gradients(std::uint64_t seed) {
  Rng rng(seed);
  AttenuatedDownsampler<double> ds(4, 3);
  ds.initialize(rng);
  auto f = random_map<double>(rng, 4, 9, 9);
  const auto r = random_map<double>(rng, 4, 4, 4);
  const SourceRegion region{0.5, 0.25, 8.0, 8.5};
  auto loss = [&] {
    const auto w = ds.predict_weights(f);
    return dot_loss(r, attenuated_downsample(f, w, 4, 4, region).output.data);
  };

  AttenuatedDownsampler<double>::Cache cache;
  const auto w = ds.predict_weights(f, &cache);
  const auto res = attenuated_downsample(f, w, 4, 4, region);
  FeatureMap<double> d_f(4, 9, 9), d_w(1, 9, 9);
  attenuated_downsample_backward(f, res, r, d_f, d_w);
  auto grads = ds.zero_gradients();
  d_f.data += ds.backward(cache, d_w, grads).data;

  Worst wst;
  wst.add("features", d_f.data, numeric_gradient(f.data, loss));
  for (int k = 0; k < 3; ++k) {
    wst.add("weight", grads.weight[k], numeric_gradient(ds.layers()[k].weight, loss));
    // The last bias shifts every weight of a window equally, so its true gradient is zero.
    wst.add("bias", grads.bias[k], numeric_gradient(ds.layers()[k].bias, loss), k == 2 ? 1e-6 : 1e-12);
  }
  return wst.result(1e-4);
}

CheckResult check_appearance_gradients(std::uint64_t seed) {
  Rng rng(seed);
  AppearanceModel<double> app(AppearanceConfig{4, 2, 6}, 3);
  app.initialize(rng);
  // The last layer and embeddings start at zero; randomize them so every path carries gradient.
  app.layers()[2] = make_linear<double>(6, 4, rng);
  app.embeddings() = MatX<double>::NullaryExpr(4, 3, [&] { return 0.5 * rng.normal(); });
  GaussianModel<double> m = random_model(rng, 5, 3);
  const Mat3X<double> rc = Mat3X<double>::NullaryExpr(3, 5, [&] { return rng.uniform(-1, 1); });
  const VecX<double> ro = VecX<double>::NullaryExpr(5, [&] { return rng.uniform(-1, 1); });
  auto loss = [&] {
    const auto s = app.shift(m, 1);
    return rc.cwiseProduct(s.color).sum() + ro.dot(s.opacity);
  };

  AppearanceModel<double>::Cache cache;
  app.shift(m, 1, &cache);
  auto grads = app.zero_gradients();
  GaussianGradients<double> dm(3, m.size());
  app.backward(cache, m, ColorOpacityShift<double>{rc, ro}, grads, &dm);

  Worst w;
  w.add("embeddings", grads.embeddings, numeric_gradient(app.embeddings(), loss));
  for (int k = 0; k < 3; ++k) {
    w.add("weight", grads.weight[k], numeric_gradient(app.layers()[k].weight, loss));
    w.add("bias", grads.bias[k], numeric_gradient(app.layers()[k].bias, loss));
  }
  w.add("colors", dm.colors, numeric_gradient(m.colors, loss));
  w.add("means", dm.means, numeric_gradient(m.means, loss));
  return w.result(1e-4);
}

// ---------------------------------------------------------------------------------

namespace {

// Owner cell of every source pixel, by exact integer arithmetic: floor((2y + 1) * out / (2 * in)).
std::vector<int> integer_owners(int H, int W, int h, int w) {
  std::vector<int> owner(std::size_t(H) * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      owner[std::size_t(y) * W + x] = int((2L * y + 1) * h / (2L * H)) * w + int((2L * x + 1) * w / (2L * W));
  return owner;
}

}  // namespace

CheckResult check_uniform_weights_average_pool(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  bool owners_match = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int H = rng.integer(4, 40), W = rng.integer(4, 40);
    const int h = rng.integer(1, H), w = rng.integer(1, W);
    const auto f = random_map<double>(rng, 3, H, W);
    FeatureMap<double> weights(1, H, W);
    weights.data.setConstant(rng.uniform(-5, 5));
    const auto res = attenuated_downsample(f, weights, h, w);

    const auto owner = integer_owners(H, W, h, w);
    owners_match = owners_match && owner == res.owner;
    MatX<double> sum = MatX<double>::Zero(3, Index(h) * w);
    VecX<double> count = VecX<double>::Zero(Index(h) * w);
    for (std::size_t p = 0; p < owner.size(); ++p) {
      sum.col(owner[p]) += f.data.col(Index(p));
      count(owner[p]) += 1;
    }
    for (Index o = 0; o < sum.cols(); ++o) sum.col(o) /= count(o);
    worst = std::max(worst, (sum - res.output.data).cwiseAbs().maxCoeff());
  }
  return {owners_match && worst < 1e-12, worst, owners_match ? "" : "cell ownership differs"};
}

CheckResult check_softmax_shift_invariance(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int H = rng.integer(4, 32), W = rng.integer(4, 32);
    const int h = rng.integer(1, H), w = rng.integer(1, W);
    const auto f = random_map<double>(rng, 3, H, W);
    // Weights on a 1/64 grid so that adding the constant is exact.
    FeatureMap<double> weights(1, H, W);
    for (Index p = 0; p < weights.pixels(); ++p) weights.data(0, p) = rng.integer(-256, 256) / 64.0;
    FeatureMap<double> shifted = weights;
    const double c = rng.integer(-16, 16);
    shifted.data.array() += c;
    const auto a = attenuated_downsample(f, weights, h, w);
    const auto b = attenuated_downsample(f, shifted, h, w);
    worst = std::max(worst, (a.output.data - b.output.data).cwiseAbs().maxCoeff());
  }
  return {worst == 0, worst, "bitwise"};
}

CheckResult check_convex_hull(int windows, std::uint64_t seed) {
  Rng rng(seed);
  int checked = 0, violations = 0;
  double worst = 0;
  while (checked < windows) {
    const int H = rng.integer(6, 48), W = rng.integer(6, 48);
    const int h = rng.integer(1, std::min(H, 8)), w = rng.integer(1, std::min(W, 8));
    const auto f = random_map<double>(rng, 4, H, W, -3, 3);
    FeatureMap<double> weights(1, H, W);
    for (Index p = 0; p < weights.pixels(); ++p) weights.data(0, p) = 4 * rng.normal();
    const auto res = attenuated_downsample(f, weights, h, w);
    MatX<double> lo = MatX<double>::Constant(4, Index(h) * w, 1e300), hi = -lo;
    for (std::size_t p = 0; p < res.owner.size(); ++p) {
      const int o = res.owner[p];
      lo.col(o) = lo.col(o).cwiseMin(f.data.col(Index(p)));
      hi.col(o) = hi.col(o).cwiseMax(f.data.col(Index(p)));
    }
    for (Index o = 0; o < lo.cols() && checked < windows; ++o, ++checked)
      for (int c = 0; c < 4; ++c) {
        const double v = res.output.data(c, o);
        const double excess = std::max(lo(c, o) - v, v - hi(c, o));
        worst = std::max(worst, excess);
        if (excess > 1e-12) ++violations;
      }
  }
  return {violations == 0, worst, std::to_string(checked) + " windows, " + std::to_string(violations) + " outside"};
}

// ---------------------------------------------------------------------------------

CheckResult check_sam_identities(std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream detail;
  bool pass = true;

  // Constant features under every mask.
  FeatureMap<double> f(3, 6, 7);
  for (int c = 0; c < 3; ++c) f.data.row(c).setConstant(0.25 * (c + 1));
  std::vector<Mask> masks;
  for (int k = 0; k < 3; ++k) {
    Mask m(6, 7);
    for (auto& v : m.data) v = rng.uniform() < 0.5;
    masks.push_back(m);
  }
  const double constant = loss_sam(f, masks);
  detail << "constant=" << constant << " ";
  pass = pass && constant == 0;

  // Single channel {1, 1, 3, 3}: population variance 1.
  FeatureMap<double> g(1, 2, 2);
  g.data << 1, 1, 3, 3;
  const double four = loss_sam(g, {Mask(2, 2, 1)});
  detail << "variance=" << four << " ";
  pass = pass && four == 1.0;

  // Invariance to a constant offset of every feature.
  const auto r = random_map<double>(rng, 5, 12, 10);
  FeatureMap<double> shifted = r;
  shifted.data.array() += 3.7;
  std::vector<Mask> rm;
  for (int k = 0; k < 4; ++k) {
    Mask m(12, 10);
    for (auto& v : m.data) v = rng.uniform() < 0.4;
    rm.push_back(m);
  }
  const double diff = std::abs(loss_sam(r, rm) - loss_sam(shifted, rm));
  detail << "shift=" << diff;
  pass = pass && diff < 1e-12;
  return {pass, diff, detail.str()};
}

// ---------------------------------------------------------------------------------

CheckResult check_pixel_size_oracle(int fixtures, std::uint64_t seed) {
  using LD = long double;
  Rng rng(seed);
  double worst = 0;
  for (int k = 0; k < fixtures; ++k) {
    const int W = rng.integer(64, 4000), H = rng.integer(64, 4000);
    const double f = rng.uniform(0.4, 3.0) * W;
    const double rho = rng.uniform(10, 60), theta = rng.uniform(0, 6.283);
    const Vec3<double> eye(rho * std::cos(theta), rho * std::sin(theta), rng.uniform(5, 80));
    const Vec3<double> target(rng.uniform(-5, 5), rng.uniform(-5, 5), 0);
    Camera cam = look_at(eye, target, Vec3<double>(0, 0, 1), f, f * rng.uniform(0.9, 1.1), W, H);

    // Points back-projected from pixels well inside the margin band, plus a few inside the band.
    std::vector<Vec3<double>> pts;
    const int n = rng.integer(3, 40);
    for (int i = 0; i < n; ++i) {
      const bool border = i % 5 == 4;
      const double u = border ? rng.uniform(0, 0.04) * W : rng.uniform(0.07, 0.93) * W;
      const double v = border ? rng.uniform(0, 1) * H : rng.uniform(0.07, 0.93) * H;
      const double z = rng.uniform(2, 200);
      const Vec3<double> pc((u - cam.cx) * z / cam.fx, (v - cam.cy) * z / cam.fy, z);
      pts.push_back(cam.R.transpose() * (pc - cam.t));
    }
    const double got = pixel_physical_size(cam, pts);

    Eigen::Matrix<LD, 3, 3> R = cam.R.cast<LD>();
    Eigen::Matrix<LD, 3, 1> t = cam.t.cast<LD>(), sum = Eigen::Matrix<LD, 3, 1>::Zero();
    int kept = 0;
    for (const auto& p : pts) {
      const Eigen::Matrix<LD, 3, 1> pc = R * p.cast<LD>() + t;
      const LD u = LD(cam.fx) * pc.x() / pc.z() + LD(cam.cx), v = LD(cam.fy) * pc.y() / pc.z() + LD(cam.cy);
      if (u < 0.05L * W || u > 0.95L * W || v < 0.05L * H || v > 0.95L * H) continue;
      sum += p.cast<LD>();
      ++kept;
    }
    const Eigen::Matrix<LD, 3, 1> center = -R.transpose() * t;
    const LD d = (center - sum / LD(kept)).norm();
    const LD pw = 2 * d * std::tan(std::atan(LD(W) / LD(cam.fx)) / LD(W));
    const LD ph = 2 * d * std::tan(std::atan(LD(H) / LD(cam.fy)) / LD(H));
    const LD want = (pw + ph) / 2;
    worst = std::max(worst, double(std::abs((LD(got) - want) / want)));
  }
  return {worst < 1e-9, worst, std::to_string(fixtures) + " fixtures"};
}

CheckResult check_pixel_size_linearity(std::uint64_t seed) {
  Rng rng(seed);
  bool pass = pixel_width_at_distance(0, 640, 500) == 0 && pixel_height_at_distance(0, 480, 500) == 0;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const int W = rng.integer(16, 8000);
    const double f = rng.uniform(0.3, 4.0) * W;
    const double d = rng.uniform(0.01, 1000);
    const double k = std::ldexp(1.0, rng.integer(-8, 8));
    const double a = pixel_width_at_distance(k * d, W, f), b = k * pixel_width_at_distance(d, W, f);
    worst = std::max(worst, std::abs(a - b));
    // Arbitrary factors stay linear to rounding.
    const double s = rng.uniform(0.1, 10);
    const double e = std::abs(pixel_width_at_distance(s * d, W, f) - s * pixel_width_at_distance(d, W, f)) /
                     pixel_width_at_distance(s * d, W, f);
    pass = pass && e < 1e-14;
  }
  return {pass && worst == 0, worst, "power-of-two scale factors exact"};
}

// ---------------------------------------------------------------------------------

CheckResult check_parallel_bitwise(std::uint64_t seed, int threads) {
  Rng rng(seed);
  GaussianModel<double> m = random_model(rng, 80, 3, -1.0, 3.0, 0.15);
  const Camera cam = test_camera(53, 41, 3.0);
  const VecX<double> op = m.opacity_logits.unaryExpr([](double v) { return sigmoid(v); });
  const auto r = random_map<double>(rng, 3, cam.height, cam.width);
  const auto ra = random_map<double>(rng, 1, cam.height, cam.width);

  bool same = true;
  for (int tile : {16, 8}) {
    CompositeOptions one{tile, 1}, many{tile, threads};
    const auto a = composite(m, cam, m.features, op, one);
    const auto b = composite(m, cam, m.features, op, many);
    same = same && a.image.data == b.image.data && a.alpha.data == b.alpha.data;
    const auto ga = composite_backward(a, r, &ra);
    const auto gb = composite_backward(b, r, &ra);
    same = same && ga.values == gb.values && ga.opacities == gb.opacities && ga.mean2d == gb.mean2d &&
           ga.conic == gb.conic;
    GaussianGradients<double> pa(3, m.size()), pb(3, m.size());
    projection_backward(a, m, ga, pa);
    projection_backward(b, m, gb, pb);
    same = same && pa.means == pb.means && pa.log_scales == pb.log_scales && pa.rotations == pb.rotations;
  }
  return {same, same ? 0.0 : 1.0, std::to_string(threads) + " threads"};
}

SyntheticPrepareOptions synthetic_fixture() {
  SyntheticPrepareOptions o;
  o.spec.classes = 2;
  o.spec.gaussians_per_class = 500;
  o.spec.images = 20;
  o.spec.val_images = 5;
  o.spec.resolution = 128;
  o.scale_count = 3;
  return o;
}

}  // namespace l3x::test
