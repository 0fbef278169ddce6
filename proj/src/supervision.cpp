#include "l3x/supervision.hpp"

#include "l3x/image_ops.hpp"

#include <cmath>
#include <sstream>

namespace l3x {

std::optional<PyramidGeometry> pyramid_geometry(double scale_m, double pixel_size_m, int height, int width) {
  if (!(scale_m > 0) || !(pixel_size_m > 0)) throw Error("pyramid: scale and pixel size must be positive");
  const double w = std::round(scale_m / pixel_size_m);
  if (w < kMinWindowPx || w > std::min(height, width)) return std::nullopt;
  PyramidGeometry g;
  g.window_px = int(w);
  g.stride = std::max(1, g.window_px / 2);
  g.rows = (height - g.window_px) / g.stride + 1;
  g.cols = (width - g.window_px) / g.stride + 1;
  return g;
}

SourceRegion PyramidLevel::region(int map_h, int map_w, int image_h, int image_w) const {
  const double sy = double(map_h) / image_h, sx = double(map_w) / image_w;
  const double offset = (geometry.window_px - geometry.stride) * 0.5;
  return {offset * sy, offset * sx, geometry.rows * geometry.stride * sy, geometry.cols * geometry.stride * sx};
}

ClipPyramid build_pyramid(const ImageView& image, const Camera& cam, const FeatureProvider& provider,
                          const std::vector<double>& scales_m, std::vector<std::string>* warnings) {
  if (!(cam.pixel_size_m > 0)) throw Error("build_pyramid: camera " + std::to_string(cam.id) + " has no pixel size");
  ClipPyramid pyr;
  pyr.image_id = image.image_id;
  pyr.height = image.height;
  pyr.width = image.width;
  for (double scale : scales_m) {
    auto g = pyramid_geometry(scale, cam.pixel_size_m, image.height, image.width);
    if (!g) {
      if (warnings) {
        std::ostringstream os;
        os << "image " << image.image_id << ": scale " << scale << " m gives window "
           << std::lround(scale / cam.pixel_size_m) << " px outside [" << kMinWindowPx << ", "
           << std::min(image.height, image.width) << "], skipped";
        warnings->push_back(os.str());
      }
      continue;
    }
    PyramidLevel level;
    level.scale_m = scale;
    level.geometry = *g;
    level.embeddings.resize(provider.clip_dim(), Index(g->rows) * g->cols);
    for (int r = 0; r < g->rows; ++r)
      for (int c = 0; c < g->cols; ++c)
        level.embeddings.col(Index(r) * g->cols + c) =
            provider.clip_embed(image, CropRect{c * g->stride, r * g->stride, g->window_px});
    pyr.levels.push_back(std::move(level));
  }
  return pyr;
}

std::vector<ClipGridFile> pyramid_to_files(const ClipPyramid& pyramid) {
  std::vector<ClipGridFile> out;
  for (const auto& l : pyramid.levels)
    out.push_back({pyramid.image_id, l.scale_m, l.geometry.window_px, l.geometry.stride, l.geometry.rows,
                   l.geometry.cols, l.embeddings});
  return out;
}

ClipPyramid pyramid_from_files(const std::vector<ClipGridFile>& grids, int image_id, int height, int width) {
  ClipPyramid pyr;
  pyr.image_id = image_id;
  pyr.height = height;
  pyr.width = width;
  for (const auto& g : grids) {
    if (g.image_id != image_id) continue;
    if ((height - g.window_px) / g.stride + 1 != g.rows || (width - g.window_px) / g.stride + 1 != g.cols)
      throw IntegrityError("CLIP grid for image " + std::to_string(image_id) + " does not fit a " +
                           std::to_string(height) + "x" + std::to_string(width) + " image");
    PyramidLevel l;
    l.scale_m = g.scale_m;
    l.geometry = {g.window_px, g.stride, g.rows, g.cols};
    l.embeddings = g.embeddings;
    pyr.levels.push_back(std::move(l));
  }
  return pyr;
}

std::vector<double> log_spaced_scales(double smallest_m, double largest_m, int count) {
  if (!(smallest_m > 0) || !(largest_m >= smallest_m) || count < 1) throw Error("invalid scale range");
  std::vector<double> s(count);
  for (int i = 0; i < count; ++i)
    s[i] = count == 1 ? smallest_m : smallest_m * std::pow(largest_m / smallest_m, double(i) / (count - 1));
  return s;
}

void MaskSet::validate(int height, int width) const {
  if (building.height != height || building.width != width)
    throw Error("building mask is " + std::to_string(building.height) + "x" + std::to_string(building.width) +
                ", image is " + std::to_string(height) + "x" + std::to_string(width));
  for (const auto& m : objects)
    if (m.height != height || m.width != width) throw Error("object mask size does not match the image");
}

Mask level_mask(const PyramidLevel& level, const Mask& image_mask) {
  Mask m(level.geometry.rows, level.geometry.cols);
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      const int y = std::min(image_mask.height - 1, int(std::floor(level.center_y(r))));
      const int x = std::min(image_mask.width - 1, int(std::floor(level.center_x(c))));
      m(r, c) = image_mask(y, x) ? 1 : 0;
    }
  return m;
}

template <class S>
S masked_l1(const FeatureMap<S>& pred, const FeatureMap<S>& target, const Mask& mask, FeatureMap<S>* grad) {
  if (pred.height != target.height || pred.width != target.width || pred.channels() != target.channels())
    throw Error("masked_l1: shape mismatch");
  if (mask.height != pred.height || mask.width != pred.width) throw Error("masked_l1: mask size mismatch");
  if (grad) *grad = FeatureMap<S>(pred.channels(), pred.height, pred.width);
  const std::size_t n = mask.count();
  if (n == 0) return S(0);
  const S denom = S(n) * S(pred.channels());
  S sum = 0;
  for (Index p = 0; p < pred.pixels(); ++p) {
    if (!mask.data[std::size_t(p)]) continue;
    const auto diff = (pred.data.col(p) - target.data.col(p)).eval();
    sum += diff.cwiseAbs().sum();
    if (grad) grad->data.col(p) = diff.unaryExpr([denom](S d) { return (d > 0 ? S(1) : d < 0 ? S(-1) : S(0)) / denom; });
  }
  return sum / denom;
}

namespace {

struct AxisTap {
  int i0, i1;
  double w1;
};

// Linear interpolation taps at the centers of `n` equal cells spanning [start, start + length).
std::vector<AxisTap> region_taps(int src, double start, double length, int n) {
  std::vector<AxisTap> taps(n);
  for (int i = 0; i < n; ++i) {
    double s = std::clamp(start + (i + 0.5) * length / n - 0.5, 0.0, double(src - 1));
    int i0 = std::min(int(s), src - 1);
    int i1 = std::min(i0 + 1, src - 1);
    taps[i] = {i0, i1, s - i0};
  }
  return taps;
}

template <class S>
FeatureMap<S> region_bilinear(const FeatureMap<S>& src, const SourceRegion& r, int h, int w) {
  auto ty = region_taps(src.height, r.y0, r.height, h);
  auto tx = region_taps(src.width, r.x0, r.width, w);
  FeatureMap<S> out(src.channels(), h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const S wy = S(ty[y].w1), wx = S(tx[x].w1);
      out.data.col(out.pixel(y, x)) =
          (S(1) - wy) * ((S(1) - wx) * src.data.col(src.pixel(ty[y].i0, tx[x].i0)) +
                         wx * src.data.col(src.pixel(ty[y].i0, tx[x].i1))) +
          wy * ((S(1) - wx) * src.data.col(src.pixel(ty[y].i1, tx[x].i0)) + wx * src.data.col(src.pixel(ty[y].i1, tx[x].i1)));
    }
  return out;
}

template <class S>
void region_bilinear_backward(const FeatureMap<S>& d_out, const SourceRegion& r, FeatureMap<S>& d_src) {
  auto ty = region_taps(d_src.height, r.y0, r.height, d_out.height);
  auto tx = region_taps(d_src.width, r.x0, r.width, d_out.width);
  for (int y = 0; y < d_out.height; ++y)
    for (int x = 0; x < d_out.width; ++x) {
      const S wy = S(ty[y].w1), wx = S(tx[x].w1);
      const auto g = d_out.data.col(d_out.pixel(y, x));
      d_src.data.col(d_src.pixel(ty[y].i0, tx[x].i0)) += (S(1) - wy) * (S(1) - wx) * g;
      d_src.data.col(d_src.pixel(ty[y].i0, tx[x].i1)) += (S(1) - wy) * wx * g;
      d_src.data.col(d_src.pixel(ty[y].i1, tx[x].i0)) += wy * (S(1) - wx) * g;
      d_src.data.col(d_src.pixel(ty[y].i1, tx[x].i1)) += wy * wx * g;
    }
}

}  // namespace

template <class S>
ClipLoss<S> loss_clip_forward(const FeatureMap<S>& clip_map, const FeatureMap<S>* weights, const ClipPyramid& pyramid,
                              const Mask& building_mask, DownsampleMode mode) {
  if (pyramid.levels.empty()) throw Error("loss_clip: no valid scales in the pyramid of image " +
                                          std::to_string(pyramid.image_id));
  if (mode == DownsampleMode::Attenuated && !weights) throw Error("loss_clip: attenuated mode needs weights");
  ClipLoss<S> out;
  out.mode = mode;
  for (const auto& level : pyramid.levels) {
    const auto& g = level.geometry;
    if (level.embeddings.rows() != clip_map.channels())
      throw Error("loss_clip: decoded map has " + std::to_string(clip_map.channels()) +
                  " channels, targets have " + std::to_string(level.embeddings.rows()));
    ClipScaleTerm<S> term;
    term.region = level.region(clip_map.height, clip_map.width, pyramid.height, pyramid.width);
    if (mode == DownsampleMode::Attenuated) {
      term.down = attenuated_downsample(clip_map, *weights, g.rows, g.cols, term.region);
    } else {
      if (g.rows > term.region.height || g.cols > term.region.width)
        throw Error("loss_clip: decoded map is smaller than the ground-truth grid");
      term.down.output = region_bilinear(clip_map, term.region, g.rows, g.cols);
    }
    FeatureMap<S> target;
    target.height = g.rows;
    target.width = g.cols;
    target.data = level.embeddings.template cast<S>();
    term.mask = level_mask(level, building_mask);
    term.loss = masked_l1(term.down.output, target, term.mask);
    out.value += term.loss;
    out.scales.push_back(std::move(term));
  }
  out.value /= S(out.scales.size());
  return out;
}

template <class S>
void loss_clip_backward(const FeatureMap<S>& clip_map, const ClipPyramid& pyramid, const ClipLoss<S>& forward,
                        S d_value, const std::vector<FeatureMap<S>>* d_fd, FeatureMap<S>& d_clip_map,
                        FeatureMap<S>* d_weights) {
  if (d_clip_map.data.size() == 0) d_clip_map = FeatureMap<S>(clip_map.channels(), clip_map.height, clip_map.width);
  if (d_weights && d_weights->data.size() == 0) *d_weights = FeatureMap<S>(1, clip_map.height, clip_map.width);
  const S per_scale = d_value / S(forward.scales.size());
  for (std::size_t s = 0; s < forward.scales.size(); ++s) {
    const auto& term = forward.scales[s];
    const auto& level = pyramid.levels[s];
    FeatureMap<S> target;
    target.height = level.geometry.rows;
    target.width = level.geometry.cols;
    target.data = level.embeddings.template cast<S>();
    FeatureMap<S> g;
    masked_l1(term.down.output, target, term.mask, &g);
    g.data *= per_scale;
    if (d_fd && s < d_fd->size() && (*d_fd)[s].data.size()) g.data += (*d_fd)[s].data;
    if (forward.mode == DownsampleMode::Attenuated) {
      FeatureMap<S> dummy;
      attenuated_downsample_backward(clip_map, term.down, g, d_clip_map, d_weights ? *d_weights : dummy);
    } else {
      region_bilinear_backward(g, term.region, d_clip_map);
    }
  }
}

template <class S>
S loss_clip(const FeatureMap<S>& clip_map, const AttenuatedDownsampler<S>& ad, const ClipPyramid& pyramid,
            const Mask& building_mask) {
  const auto weights = ad.predict_weights(clip_map);
  return loss_clip_forward(clip_map, &weights, pyramid, building_mask).value;
}

template <class S>
S loss_dino(const FeatureMap<S>& decoded, const FeatureMap<S>& target, const Mask& building_mask,
            FeatureMap<S>* d_decoded) {
  if (decoded.channels() != target.channels()) throw Error("loss_dino: channel mismatch");
  const auto resized = bilinear_resize(decoded, target.height, target.width);
  const Mask mask = resample_nearest(building_mask, target.height, target.width);
  FeatureMap<S> g;
  const S value = masked_l1(resized, target, mask, d_decoded ? &g : nullptr);
  if (d_decoded) {
    *d_decoded = FeatureMap<S>(decoded.channels(), decoded.height, decoded.width);
    bilinear_resize_backward(g, *d_decoded);
  }
  return value;
}

template <class S>
S loss_sam(const FeatureMap<S>& features, const std::vector<Mask>& masks, FeatureMap<S>* grad) {
  const Index C = features.channels();
  if (grad) *grad = FeatureMap<S>(int(C), features.height, features.width);
  S total = 0;
  std::vector<Index> idx;
  for (const auto& m : masks) {
    if (m.height != features.height || m.width != features.width)
      throw Error("loss_sam: mask must be resampled to the feature resolution first");
    idx.clear();
    for (Index p = 0; p < features.pixels(); ++p)
      if (m.data[std::size_t(p)]) idx.push_back(p);
    if (idx.size() < 2) continue;
    const S n = S(idx.size());
    VecX<S> mean = VecX<S>::Zero(C);
    for (Index p : idx) mean += features.data.col(p);
    mean /= n;
    S var = 0;
    for (Index p : idx) var += (features.data.col(p) - mean).squaredNorm();
    total += var / (n * S(C));
    if (grad)
      for (Index p : idx) grad->data.col(p) += S(2) / (n * S(C)) * (features.data.col(p) - mean);
  }
  return total;
}

double total_loss(LossTerms& t, const LossWeights& w) {
  t.rec = (1.0 - w.dssim) * t.l1 + w.dssim * t.dssim;
  t.total = t.rec + w.clip * t.clip + w.dino * t.dino + w.sam * t.sam;
  if (!std::isfinite(t.total)) {
    std::ostringstream os;
    os << "non-finite loss:";
    const std::pair<const char*, double> terms[] = {{"l1", t.l1},     {"dssim", t.dssim}, {"clip", t.clip},
                                                    {"dino", t.dino}, {"sam", t.sam}};
    for (const auto& [name, v] : terms)
      if (!std::isfinite(v)) os << " " << name << "=" << v;
    os << " (l1=" << t.l1 << " dssim=" << t.dssim << " clip=" << t.clip << " dino=" << t.dino << " sam=" << t.sam
       << ")";
    throw NonFiniteLossError(os.str());
  }
  return t.total;
}

#define L3X_INSTANTIATE(S)                                                                                        \
  template S masked_l1(const FeatureMap<S>&, const FeatureMap<S>&, const Mask&, FeatureMap<S>*);                  \
  template ClipLoss<S> loss_clip_forward(const FeatureMap<S>&, const FeatureMap<S>*, const ClipPyramid&,          \
                                         const Mask&, DownsampleMode);                                            \
  template void loss_clip_backward(const FeatureMap<S>&, const ClipPyramid&, const ClipLoss<S>&, S,               \
                                   const std::vector<FeatureMap<S>>*, FeatureMap<S>&, FeatureMap<S>*);            \
  template S loss_clip(const FeatureMap<S>&, const AttenuatedDownsampler<S>&, const ClipPyramid&, const Mask&);   \
  template S loss_dino(const FeatureMap<S>&, const FeatureMap<S>&, const Mask&, FeatureMap<S>*);                  \
  template S loss_sam(const FeatureMap<S>&, const std::vector<Mask>&, FeatureMap<S>*);

L3X_INSTANTIATE(float)
L3X_INSTANTIATE(double)
#undef L3X_INSTANTIATE

}  // namespace l3x
