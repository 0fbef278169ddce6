#include "l3x/rasterizer.hpp"

#include <algorithm>
#include <cmath>

namespace l3x {

template <class S>
std::optional<Splat2D<S>> project(const Gaussian<S>& g, const Camera& cam, Index index) {
  const Mat3<S> Rc = cam.R.cast<S>();
  const Vec3<S> p = Rc * g.mean + cam.t.cast<S>();
  if (!(p.z() > S(kNearPlane))) return std::nullopt;

  const S fx = S(cam.fx), fy = S(cam.fy);
  const S z = p.z(), z2 = z * z;
  Splat2D<S> sp;
  sp.gaussian_index = index;
  sp.cam_point = p;
  sp.depth = z;
  sp.mean2d = Vec2<S>(fx * p.x() / z + S(cam.cx), fy * p.y() / z + S(cam.cy));

  Mat3<S> M = quaternion_to_rotation<S>(g.rotation) * g.log_scale.array().exp().matrix().asDiagonal();
  sp.cov3d = M * M.transpose();
  Eigen::Matrix<S, 2, 3> J;
  J << fx / z, 0, -fx * p.x() / z2,
       0, fy / z, -fy * p.y() / z2;
  Eigen::Matrix<S, 2, 3> T = J * Rc;
  sp.cov2d = T * sp.cov3d * T.transpose();
  sp.cov2d(0, 0) += S(kCovarianceDilation);
  sp.cov2d(1, 1) += S(kCovarianceDilation);
  sp.cov2d(1, 0) = sp.cov2d(0, 1);

  const S a = sp.cov2d(0, 0), b = sp.cov2d(0, 1), c = sp.cov2d(1, 1);
  const S det = a * c - b * b;
  if (!(det > S(0))) return std::nullopt;
  sp.conic << c / det, -b / det, -b / det, a / det;
  const S mid = S(0.5) * (a + c);
  const S lambda_max = mid + std::sqrt(std::max(S(0), mid * mid - det));
  sp.radius = S(3) * std::sqrt(lambda_max);

  if (sp.mean2d.x() + sp.radius < 0 || sp.mean2d.x() - sp.radius > S(cam.width) || sp.mean2d.y() + sp.radius < 0 ||
      sp.mean2d.y() - sp.radius > S(cam.height))
    return std::nullopt;
  return sp;
}

template <class S>
std::vector<Splat2D<S>> project_all(const GaussianModel<S>& model, const Camera& cam) {
  std::vector<Splat2D<S>> out;
  out.reserve(std::size_t(model.size()));
  for (Index i = 0; i < model.size(); ++i) {
    if (auto sp = project(model.gaussian(i), cam, i)) out.push_back(*sp);
  }
  std::stable_sort(out.begin(), out.end(), [](const Splat2D<S>& a, const Splat2D<S>& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.gaussian_index < b.gaussian_index;
  });
  return out;
}

namespace {

// Walks the depth-ordered splat list of one pixel, calling visit(k, alpha, T_before, dx, dy, gauss)
// for every contributing splat. Returns the final transmittance and the number of list entries consumed.
template <class S, class Visit>
S composite_pixel(const std::vector<Splat2D<S>>& splats, const std::vector<int>& list, const VecX<S>& opacities,
                  S px, S py, Visit&& visit) {
  S T = 1;
  for (int k : list) {
    const Splat2D<S>& sp = splats[k];
    const S dx = px - sp.mean2d.x();
    const S dy = py - sp.mean2d.y();
    const S power = S(0.5) * (sp.conic(0, 0) * dx * dx + sp.conic(1, 1) * dy * dy) + sp.conic(0, 1) * dx * dy;
    if (power > S(kCutoffPower)) continue;
    const S gauss = std::exp(-power);
    const S alpha = std::min(S(kMaxSplatAlpha), opacities(sp.gaussian_index) * gauss);
    visit(k, alpha, T, dx, dy, gauss);
    T *= S(1) - alpha;
    if (T < S(kMinTransmittance)) break;
  }
  return T;
}

}  // namespace

template <class S>
RenderPass<S> composite(const GaussianModel<S>& model, const Camera& cam, const MatX<S>& values,
                        const VecX<S>& opacities, const CompositeOptions& options) {
  if (values.cols() != model.size() || opacities.size() != model.size())
    throw Error("composite: per-Gaussian inputs do not match the model size");
  RenderPass<S> pass;
  pass.camera = cam;
  pass.options = options;
  pass.values = values;
  pass.opacities = opacities;
  pass.splats = project_all(model, cam);
  const int W = cam.width, H = cam.height, C = int(values.rows());
  pass.image = FeatureMap<S>(C, H, W);
  pass.alpha = FeatureMap<S>(1, H, W);

  const int tile = std::max(1, options.tile);
  pass.tiles_x = (W + tile - 1) / tile;
  pass.tiles_y = (H + tile - 1) / tile;
  pass.tile_splats.assign(std::size_t(pass.tiles_x) * pass.tiles_y, {});
  for (int k = 0; k < int(pass.splats.size()); ++k) {
    const auto& sp = pass.splats[k];
    int x0 = std::max(0, int(std::floor((sp.mean2d.x() - sp.radius) / tile)));
    int x1 = std::min(pass.tiles_x - 1, int(std::floor((sp.mean2d.x() + sp.radius) / tile)));
    int y0 = std::max(0, int(std::floor((sp.mean2d.y() - sp.radius) / tile)));
    int y1 = std::min(pass.tiles_y - 1, int(std::floor((sp.mean2d.y() + sp.radius) / tile)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) pass.tile_splats[std::size_t(ty) * pass.tiles_x + tx].push_back(k);
  }

  parallel_for(pass.tiles_x * pass.tiles_y, options.threads, [&](int t) {
    const int tx = t % pass.tiles_x, ty = t / pass.tiles_x;
    const auto& list = pass.tile_splats[t];
    for (int y = ty * tile; y < std::min(H, (ty + 1) * tile); ++y) {
      for (int x = tx * tile; x < std::min(W, (tx + 1) * tile); ++x) {
        const Index pix = pass.image.pixel(y, x);
        auto col = pass.image.data.col(pix);
        S T = composite_pixel(pass.splats, list, opacities, S(x) + S(0.5), S(y) + S(0.5),
                              [&](int k, S alpha, S T_before, S, S, S) {
                                col += (alpha * T_before) * values.col(pass.splats[k].gaussian_index);
                              });
        const S A = S(1) - T;
        pass.alpha.data(0, pix) = A;
        if (options.normalize) {
          if (A > S(0)) col /= A;
          else col.setZero();
        }
      }
    }
  });
  return pass;
}

template <class S>
PassGradients<S> composite_backward(const RenderPass<S>& pass, const FeatureMap<S>& d_image,
                                    const FeatureMap<S>* d_alpha) {
  const Index N = pass.values.cols();
  const int C = int(pass.values.rows());
  const int W = pass.camera.width, H = pass.camera.height;
  if (d_image.channels() != C || d_image.height != H || d_image.width != W)
    throw Error("composite_backward: gradient map has the wrong shape");

  struct TileGrad {
    MatX<S> values, mean2d, conic;
    VecX<S> opacities;
  };
  const int tile = std::max(1, pass.options.tile);
  const int n_tiles = pass.tiles_x * pass.tiles_y;
  std::vector<TileGrad> partial(static_cast<std::size_t>(n_tiles));

  parallel_for(n_tiles, pass.options.threads, [&](int t) {
    const auto& list = pass.tile_splats[t];
    const int n = int(list.size());
    TileGrad& tg = partial[t];
    tg.values.setZero(C, n);
    tg.mean2d.setZero(2, n);
    tg.conic.setZero(3, n);
    tg.opacities.setZero(n);
    if (n == 0) return;
    // Position of each splat within this tile's list.
    std::vector<int> local(pass.splats.size(), -1);
    for (int i = 0; i < n; ++i) local[list[i]] = i;

    struct Hit {
      int k;
      S alpha, T, dx, dy, gauss;
    };
    std::vector<Hit> hits;
    VecX<S> dC(C), behind(C), v(C);
    const int tx = t % pass.tiles_x, ty = t / pass.tiles_x;
    for (int y = ty * tile; y < std::min(H, (ty + 1) * tile); ++y) {
      for (int x = tx * tile; x < std::min(W, (tx + 1) * tile); ++x) {
        const Index pix = d_image.pixel(y, x);
        hits.clear();
        const S T_final = composite_pixel(pass.splats, list, pass.opacities, S(x) + S(0.5), S(y) + S(0.5),
                                          [&](int k, S alpha, S T, S dx, S dy, S gauss) {
                                            hits.push_back({k, alpha, T, dx, dy, gauss});
                                          });
        const S A = S(1) - T_final;
        dC = d_image.data.col(pix);
        S dA = d_alpha ? d_alpha->data(0, pix) : S(0);
        if (pass.options.normalize) {
          if (A > S(0)) {
            // out = C / A: chain into the unnormalized composite and the accumulated alpha.
            dA -= dC.dot(pass.image.data.col(pix)) / A;
            dC /= A;
          } else {
            dC.setZero();
          }
        }
        behind.setZero();
        S behind_alpha = 0;
        for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
          const Splat2D<S>& sp = pass.splats[it->k];
          const Index g = sp.gaussian_index;
          const int li = local[it->k];
          v = pass.values.col(g);
          const S w = it->alpha * it->T;
          tg.values.col(li) += w * dC;
          S d_alpha_i = it->T * ((v - behind).dot(dC) + (S(1) - behind_alpha) * dA);
          behind = it->alpha * v + (S(1) - it->alpha) * behind;
          behind_alpha = it->alpha + (S(1) - it->alpha) * behind_alpha;

          const S raw = pass.opacities(g) * it->gauss;
          if (raw >= S(kMaxSplatAlpha)) continue;  // clamped: no dependence on the inputs
          tg.opacities(li) += d_alpha_i * it->gauss;
          const S d_power = -d_alpha_i * raw;
          const S dx = it->dx, dy = it->dy;
          tg.conic(0, li) += d_power * S(0.5) * dx * dx;
          tg.conic(1, li) += d_power * dx * dy;
          tg.conic(2, li) += d_power * S(0.5) * dy * dy;
          // power depends on the mean through (pixel - mean).
          tg.mean2d(0, li) -= d_power * (sp.conic(0, 0) * dx + sp.conic(0, 1) * dy);
          tg.mean2d(1, li) -= d_power * (sp.conic(0, 1) * dx + sp.conic(1, 1) * dy);
        }
      }
    }
  });

  PassGradients<S> out;
  out.values.setZero(C, N);
  out.opacities.setZero(N);
  out.mean2d.setZero(2, N);
  out.conic.setZero(3, N);
  // Fixed merge order: tile index, then list position.
  for (int t = 0; t < n_tiles; ++t) {
    const auto& list = pass.tile_splats[t];
    const TileGrad& tg = partial[t];
    for (int i = 0; i < int(list.size()); ++i) {
      const Index g = pass.splats[list[i]].gaussian_index;
      out.values.col(g) += tg.values.col(i);
      out.opacities(g) += tg.opacities(i);
      out.mean2d.col(g) += tg.mean2d.col(i);
      out.conic.col(g) += tg.conic.col(i);
    }
  }
  return out;
}

template <class S>
void GaussianGradients<S>::reset(int feature_dim, Index n) {
  means.setZero(3, n);
  log_scales.setZero(3, n);
  rotations.setZero(4, n);
  opacity_logits.setZero(n);
  colors.setZero(3, n);
  features.setZero(feature_dim, n);
}

template struct GaussianGradients<float>;
template struct GaussianGradients<double>;

namespace {

// d(R(q/|q|))/dq contracted with dR.
template <class S>
Vec4<S> rotation_backward(const Vec4<S>& q_raw, const Mat3<S>& dR) {
  const S norm = q_raw.norm();
  const Vec4<S> q = q_raw / norm;
  const S w = q(0), x = q(1), y = q(2), z = q(3);
  Vec4<S> dq;
  dq(0) = 2 * (-z * dR(0, 1) + y * dR(0, 2) + z * dR(1, 0) - x * dR(1, 2) - y * dR(2, 0) + x * dR(2, 1));
  dq(1) = 2 * (y * dR(0, 1) + z * dR(0, 2) + y * dR(1, 0) - w * dR(1, 2) + z * dR(2, 0) + w * dR(2, 1)) -
          4 * x * (dR(1, 1) + dR(2, 2));
  dq(2) = 2 * (x * dR(0, 1) + w * dR(0, 2) + x * dR(1, 0) + z * dR(1, 2) - w * dR(2, 0) + z * dR(2, 1)) -
          4 * y * (dR(0, 0) + dR(2, 2));
  dq(3) = 2 * (-w * dR(0, 1) + x * dR(0, 2) + w * dR(1, 0) + y * dR(1, 2) + x * dR(2, 0) + y * dR(2, 1)) -
          4 * z * (dR(0, 0) + dR(1, 1));
  return (dq - q * q.dot(dq)) / norm;
}

}  // namespace

template <class S>
void projection_backward(const RenderPass<S>& pass, const GaussianModel<S>& model, const PassGradients<S>& grads,
                         GaussianGradients<S>& out) {
  const Camera& cam = pass.camera;
  const Mat3<S> Rc = cam.R.cast<S>();
  const S fx = S(cam.fx), fy = S(cam.fy);
  for (const Splat2D<S>& sp : pass.splats) {
    const Index g = sp.gaussian_index;
    const Vec3<S>& p = sp.cam_point;
    const S z = p.z(), z2 = z * z, z3 = z2 * z;

    Mat2<S> d_conic;
    d_conic << grads.conic(0, g), S(0.5) * grads.conic(1, g), S(0.5) * grads.conic(1, g), grads.conic(2, g);
    const Mat2<S> d_cov = -sp.conic * d_conic * sp.conic;

    Eigen::Matrix<S, 2, 3> J;
    J << fx / z, 0, -fx * p.x() / z2,
         0, fy / z, -fy * p.y() / z2;
    const Eigen::Matrix<S, 2, 3> T = J * Rc;
    const Mat3<S> d_cov3d = T.transpose() * d_cov * T;
    const Eigen::Matrix<S, 2, 3> dT = S(2) * d_cov * T * sp.cov3d;
    const Eigen::Matrix<S, 2, 3> dJ = dT * Rc.transpose();

    Vec3<S> dp;
    dp.x() = dJ(0, 2) * (-fx / z2) + grads.mean2d(0, g) * fx / z;
    dp.y() = dJ(1, 2) * (-fy / z2) + grads.mean2d(1, g) * fy / z;
    dp.z() = dJ(0, 0) * (-fx / z2) + dJ(0, 2) * (S(2) * fx * p.x() / z3) + dJ(1, 1) * (-fy / z2) +
             dJ(1, 2) * (S(2) * fy * p.y() / z3) - grads.mean2d(0, g) * fx * p.x() / z2 -
             grads.mean2d(1, g) * fy * p.y() / z2;
    out.means.col(g) += Rc.transpose() * dp;

    const Vec4<S> q = model.rotations.col(g);
    const Mat3<S> Rq = quaternion_to_rotation<S>(q);
    const Vec3<S> s = model.log_scales.col(g).array().exp();
    const Mat3<S> M = Rq * s.asDiagonal();
    const Mat3<S> dM = S(2) * d_cov3d * M;
    for (int k = 0; k < 3; ++k) out.log_scales(k, g) += dM.col(k).dot(Rq.col(k)) * s(k);
    const Mat3<S> dRq = dM * s.asDiagonal();
    out.rotations.col(g) += rotation_backward<S>(q, dRq);
  }
}

template <class S>
void color_pass_inputs(const GaussianModel<S>& model, const ColorOpacityShift<S>* shift, MatX<S>& colors,
                       VecX<S>& opacities) {
  const Index n = model.size();
  colors = model.colors;
  opacities.resize(n);
  for (Index i = 0; i < n; ++i) opacities(i) = sigmoid(model.opacity_logits(i));
  if (!shift) return;
  colors = (colors + shift->color).cwiseMax(S(0)).cwiseMin(S(1));
  const S eps = S(1e-6);
  opacities = (opacities + shift->opacity).cwiseMax(eps).cwiseMin(S(1) - eps);
}

template <class S>
RenderedMaps<S> render(const GaussianModel<S>& model, const Camera& cam, const RenderOptions& options,
                       const ColorOpacityShift<S>* appearance) {
  RenderedMaps<S> out;
  CompositeOptions co;
  co.tile = options.tile;
  co.threads = options.threads;
  if (options.render_rgb) {
    int w = options.rgb_width > 0 ? options.rgb_width : cam.width;
    int h = options.rgb_height > 0 ? options.rgb_height : cam.height;
    MatX<S> colors;
    VecX<S> opacities;
    color_pass_inputs(model, appearance, colors, opacities);
    auto pass = composite(model, cam.resized(w, h), colors, opacities, co);
    out.rgb = std::move(pass.image);
    out.alpha = std::move(pass.alpha);
  }
  if (options.render_features) {
    int w = options.feat_width > 0 ? options.feat_width : cam.width;
    int h = options.feat_height > 0 ? options.feat_height : cam.height;
    VecX<S> opacities(model.size());
    for (Index i = 0; i < model.size(); ++i) opacities(i) = sigmoid(model.opacity_logits(i));
    co.normalize = options.normalize_features;
    auto pass = composite(model, cam.resized(w, h), model.features, opacities, co);
    out.feat = std::move(pass.image);
    out.feat_alpha = std::move(pass.alpha);
  }
  return out;
}

#define L3X_INSTANTIATE(S)                                                                                          \
  template std::optional<Splat2D<S>> project(const Gaussian<S>&, const Camera&, Index);                           \
  template std::vector<Splat2D<S>> project_all(const GaussianModel<S>&, const Camera&);                           \
  template RenderPass<S> composite(const GaussianModel<S>&, const Camera&, const MatX<S>&, const VecX<S>&,        \
                                   const CompositeOptions&);                                                      \
  template PassGradients<S> composite_backward(const RenderPass<S>&, const FeatureMap<S>&, const FeatureMap<S>*); \
  template void projection_backward(const RenderPass<S>&, const GaussianModel<S>&, const PassGradients<S>&,       \
                                    GaussianGradients<S>&);                                                       \
  template void color_pass_inputs(const GaussianModel<S>&, const ColorOpacityShift<S>*, MatX<S>&, VecX<S>&);     \
  template RenderedMaps<S> render(const GaussianModel<S>&, const Camera&, const RenderOptions&,                   \
                                  const ColorOpacityShift<S>*);

L3X_INSTANTIATE(float)
L3X_INSTANTIATE(double)
#undef L3X_INSTANTIATE

}  // namespace l3x
