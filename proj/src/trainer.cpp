#include "l3x/trainer.hpp"

#include "l3x/image_ops.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace l3x {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw Error(std::string("config: ") + name + " must be positive");
  };
  if (iterations < 1) throw Error("config: iterations must be positive");
  positive(lr_position_init, "lr_position_init");
  positive(lr_position_final, "lr_position_final");
  positive(lr_color, "lr_color");
  positive(lr_opacity, "lr_opacity");
  positive(lr_scale, "lr_scale");
  positive(lr_rotation, "lr_rotation");
  positive(lr_feature, "lr_feature");
  positive(lr_encoder, "lr_encoder");
  positive(lr_downsampler, "lr_downsampler");
  positive(lr_appearance_net, "lr_appearance_net");
  positive(lr_appearance_embedding, "lr_appearance_embedding");
  if (mlp_weight_decay < 0) throw Error("config: mlp_weight_decay must be non-negative");
  if (densify_interval < 1) throw Error("config: densify_interval must be at least 1");
  if (densify_from < 0 || densify_until < 0) throw Error("config: densification window must be non-negative");
  if (!(densify_grad_threshold > 0) || !(percent_dense > 0)) throw Error("config: densification thresholds must be positive");
  if (prune_opacity < 0 || prune_opacity >= 1) throw Error("config: prune_opacity must be in [0, 1)");
  if (opacity_reset_interval < 0) throw Error("config: opacity_reset_interval must be non-negative");
  if (max_gaussians < 0) throw Error("config: max_gaussians must be non-negative");
  if (feat_size_min < 8 || feat_size_max < feat_size_min) throw Error("config: invalid feature render size range");
  if (weights.clip < 0 || weights.dino < 0 || weights.sam < 0 || weights.dssim < 0 || weights.dssim > 1)
    throw Error("config: loss weights must be non-negative and lambda_dssim at most 1");
  if (threads < 1) throw Error("config: threads must be at least 1");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.iterations = 2000;
  c.densify_from = 500;
  c.densify_interval = 500;
  c.densify_until = 1500;
  c.max_gaussians = 2000;
  return c;
}

void TrainingView::prepare_masks() {
  masks.validate(camera.height, camera.width);
  level_objects.clear();
  for (const auto& level : pyramid.levels) {
    std::vector<Mask> per_level;
    per_level.reserve(masks.objects.size());
    for (const auto& m : masks.objects) per_level.push_back(level_mask(level, m));
    level_objects.push_back(std::move(per_level));
  }
}

namespace {

TensorRef ref(std::string name, MatX<float>& m) { return {std::move(name), m.data(), m.rows(), m.cols()}; }
TensorRef ref(std::string name, VecX<float>& v) { return {std::move(name), v.data(), v.rows(), 1}; }
template <int R>
TensorRef ref(std::string name, Eigen::Matrix<float, R, Eigen::Dynamic>& m) {
  return {std::move(name), m.data(), m.rows(), m.cols()};
}
// Per-Gaussian vectors are exposed as 1 x N so every Gaussian tensor gathers by column.
TensorRef row_ref(std::string name, VecX<float>& v) { return {std::move(name), v.data(), 1, v.rows()}; }

template <class G, class D, class E, class A>
std::vector<TensorRef> collect(G& g, E& table, std::array<MatX<float>, 4>& mlp_w, std::array<VecX<float>, 4>& mlp_b,
                               D& ds_w, std::array<VecX<float>, 3>& ds_b, A& app_e, std::array<MatX<float>, 3>& app_w,
                               std::array<VecX<float>, 3>& app_b) {
  std::vector<TensorRef> r;
  r.push_back(ref("gaussians.means", g.means));
  r.push_back(ref("gaussians.log_scales", g.log_scales));
  r.push_back(ref("gaussians.rotations", g.rotations));
  r.push_back(row_ref("gaussians.opacity_logits", g.opacity_logits));
  r.push_back(ref("gaussians.colors", g.colors));
  r.push_back(ref("gaussians.features", g.features));
  r.push_back(ref("encoder.table", table));
  for (int k = 0; k < 4; ++k) {
    r.push_back(ref("mlp.weight" + std::to_string(k), mlp_w[k]));
    r.push_back(ref("mlp.bias" + std::to_string(k), mlp_b[k]));
  }
  for (int k = 0; k < 3; ++k) {
    r.push_back(ref("downsampler.weight" + std::to_string(k), ds_w[k]));
    r.push_back(ref("downsampler.bias" + std::to_string(k), ds_b[k]));
  }
  r.push_back(ref("appearance.embeddings", app_e));
  for (int k = 0; k < 3; ++k) {
    r.push_back(ref("appearance.weight" + std::to_string(k), app_w[k]));
    r.push_back(ref("appearance.bias" + std::to_string(k), app_b[k]));
  }
  return r;
}

}  // namespace

std::vector<TensorRef> parameter_refs(TrainState& s) {
  auto& L = s.encoder.mlp().layers();
  auto& D = s.downsampler.layers();
  auto& A = s.appearance.layers();
  std::vector<TensorRef> r;
  r.push_back(ref("gaussians.means", s.gaussians.means));
  r.push_back(ref("gaussians.log_scales", s.gaussians.log_scales));
  r.push_back(ref("gaussians.rotations", s.gaussians.rotations));
  r.push_back(row_ref("gaussians.opacity_logits", s.gaussians.opacity_logits));
  r.push_back(ref("gaussians.colors", s.gaussians.colors));
  r.push_back(ref("gaussians.features", s.gaussians.features));
  r.push_back(ref("encoder.table", s.encoder.grid().table()));
  for (int k = 0; k < 4; ++k) {
    r.push_back(ref("mlp.weight" + std::to_string(k), L[k].weight));
    r.push_back(ref("mlp.bias" + std::to_string(k), L[k].bias));
  }
  for (int k = 0; k < 3; ++k) {
    r.push_back(ref("downsampler.weight" + std::to_string(k), D[k].weight));
    r.push_back(ref("downsampler.bias" + std::to_string(k), D[k].bias));
  }
  r.push_back(ref("appearance.embeddings", s.appearance.embeddings()));
  for (int k = 0; k < 3; ++k) {
    r.push_back(ref("appearance.weight" + std::to_string(k), A[k].weight));
    r.push_back(ref("appearance.bias" + std::to_string(k), A[k].bias));
  }
  return r;
}

std::vector<TensorRef> gradient_refs(TrainGradients& g) {
  return collect(g.gaussians, g.encoder.table, g.encoder.mlp.weight, g.encoder.mlp.bias, g.downsampler.weight,
                 g.downsampler.bias, g.appearance.embeddings, g.appearance.weight, g.appearance.bias);
}

TrainGradients zero_gradients(const TrainState& s) {
  TrainGradients g;
  g.gaussians.reset(s.gaussians.feature_dim(), s.gaussians.size());
  g.encoder = s.encoder.zero_gradients();
  g.downsampler = s.downsampler.zero_gradients();
  g.appearance = s.appearance.zero_gradients();
  return g;
}

double scene_extent(const std::vector<Camera>& cameras) {
  if (cameras.empty()) throw Error("scene extent needs at least one camera");
  Vec3<double> c = Vec3<double>::Zero();
  for (const auto& cam : cameras) c += cam.center();
  c /= double(cameras.size());
  double r = 0;
  for (const auto& cam : cameras) r = std::max(r, (cam.center() - c).norm());
  return r;
}

TrainState initialize_state(const GaussianModel<double>& seeds, const EncoderConfig& encoder,
                            const AppearanceConfig& appearance, int appearance_images, double extent,
                            std::uint64_t seed) {
  TrainState s;
  s.scene_extent = extent;
  s.gaussians = seeds.cast<float>();
  s.encoder = SemanticEncoder<float>(encoder);
  Rng rng = Rng::keyed(seed, 0, 100);
  s.encoder.initialize(rng);
  s.downsampler = AttenuatedDownsampler<float>(encoder.clip_dim);
  s.downsampler.initialize(rng);
  s.appearance = AppearanceModel<float>(appearance, std::max(1, appearance_images));
  s.appearance.initialize(rng);
  s.grad_accum.setZero(s.gaussians.size());
  s.grad_count.setZero(s.gaussians.size());
  return s;
}

int view_for_step(std::uint64_t seed, int step, int views) {
  if (views < 1) throw Error("training needs at least one view");
  std::vector<int> order(views);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::keyed(seed, std::uint64_t(step / views), 1);
  rng.shuffle(order);
  return order[step % views];
}

std::pair<int, int> feature_size_for_step(const TrainConfig& config, int step, int height, int width) {
  Rng rng = Rng::keyed(config.seed, std::uint64_t(step), 2);
  const int s = rng.integer(config.feat_size_min, config.feat_size_max);
  if (height >= width) return {s, std::max(1, int(std::lround(double(s) * width / height)))};
  return {std::max(1, int(std::lround(double(s) * height / width))), s};
}

StepDiagnostics compute_gradients(TrainState& state, const TrainingView& view, const TrainConfig& config,
                                  int fh, int fw, TrainGradients& grads, bool accumulate_stats) {
  const FlushSubnormals flush;
  const auto& G = state.gaussians;
  const Camera& cam = view.camera;
  if (view.rgb.height != cam.height || view.rgb.width != cam.width)
    throw Error("training image " + std::to_string(cam.id) + " does not match its camera size");
  StepDiagnostics diag;
  diag.feat_height = fh;
  diag.feat_width = fw;
  LossTerms& t = diag.terms;
  const LossWeights& w = config.weights;

  CompositeOptions co;
  co.threads = config.threads;

  // Color pass, with appearance shifts.
  typename AppearanceModel<float>::Cache acache;
  ColorOpacityShift<float> shift;
  const ColorOpacityShift<float>* shift_ptr = nullptr;
  if (config.appearance) {
    shift = state.appearance.shift(G, view.appearance_index, &acache);
    shift_ptr = &shift;
  }
  MatX<float> colors;
  VecX<float> opacities;
  color_pass_inputs(G, shift_ptr, colors, opacities);
  const auto rgb_pass = composite(G, cam, colors, opacities, co);
  FeatureMap<float> g_l1, g_ssim;
  t.l1 = l1_loss(rgb_pass.image, view.rgb, &g_l1);
  t.dssim = 1.0 - ssim(rgb_pass.image, view.rgb, &g_ssim);
  FeatureMap<float> d_rgb = g_l1;
  d_rgb.data = float(1 - w.dssim) * g_l1.data - float(w.dssim) * g_ssim.data;

  // Feature pass, base opacities only.
  VecX<float> base_opacity(G.size());
  for (Index i = 0; i < G.size(); ++i) base_opacity(i) = sigmoid(G.opacity_logits(i));
  const Camera fcam = cam.resized(fw, fh);
  const bool use_clip = w.clip > 0 || w.sam > 0;
  const bool use_dino = w.dino > 0;
  PassGradients<float> pg_feat;
  std::optional<RenderPass<float>> feat_pass;
  if (use_clip || use_dino) {
    feat_pass = composite(G, fcam, G.features, base_opacity, co);
    const int clip_dim = state.encoder.config().clip_dim;
    const int dino_dim = state.encoder.config().dino_dim;
    const auto& mlp = state.encoder.mlp();
    const MatX<float> enc = state.encoder.grid().encode(feat_pass->image.data);
    typename DecoderMLP<float>::Cache mcache;
    const MatX<float> r = mlp.hidden(enc, &mcache);
    FeatureMap<float> clip_map;
    clip_map.height = fh;
    clip_map.width = fw;
    clip_map.data = mlp.head(r, 0, clip_dim);
    FeatureMap<float> d_clip(clip_dim, fh, fw);

    // CLIP and SAM terms on the downsampled maps.
    typename AttenuatedDownsampler<float>::Cache dcache;
    FeatureMap<float> weights_map;
    const bool attenuated = config.downsample == DownsampleMode::Attenuated;
    if (attenuated) weights_map = state.downsampler.predict_weights(clip_map, &dcache);
    const auto cl = loss_clip_forward(clip_map, attenuated ? &weights_map : nullptr, view.pyramid,
                                      view.masks.building, config.downsample);
    t.clip = cl.value;
    std::vector<FeatureMap<float>> d_fd(cl.scales.size());
    const float n_scales = float(cl.scales.size());
    for (std::size_t s = 0; s < cl.scales.size(); ++s) {
      if (s >= view.level_objects.size()) throw Error("training view has no object masks for every scale");
      FeatureMap<float> g;
      const float v = loss_sam(cl.scales[s].down.output, view.level_objects[s], w.sam > 0 ? &g : nullptr);
      t.sam += v / n_scales;
      if (w.sam > 0) {
        g.data *= float(w.sam) / n_scales;
        d_fd[s] = std::move(g);
      }
    }
    FeatureMap<float> d_weights;
    loss_clip_backward(clip_map, view.pyramid, cl, float(w.clip), &d_fd, d_clip, attenuated ? &d_weights : nullptr);
    if (attenuated) d_clip.data += state.downsampler.backward(dcache, d_weights, grads.downsampler).data;
    MatX<float> d_r = mlp.head_backward(r, d_clip.data, 0, grads.encoder.mlp);

    if (use_dino) {
      if (view.dino.data.size() == 0) throw Error("DINO loss enabled but image " + std::to_string(cam.id) + " has no DINO map");
      // The DINO head is linear, so it is applied after resizing to the target grid.
      FeatureMap<float> r_map;
      r_map.height = fh;
      r_map.width = fw;
      r_map.data = r;
      const FeatureMap<float> r_small = bilinear_resize(r_map, view.dino.height, view.dino.width);
      FeatureMap<float> dino_map;
      dino_map.height = r_small.height;
      dino_map.width = r_small.width;
      dino_map.data = mlp.head(r_small.data, clip_dim, dino_dim);
      FeatureMap<float> g;
      t.dino = loss_dino(dino_map, view.dino, view.masks.building, &g);
      FeatureMap<float> d_small;
      d_small.height = g.height;
      d_small.width = g.width;
      d_small.data = mlp.head_backward(r_small.data, float(w.dino) * g.data, clip_dim, grads.encoder.mlp);
      FeatureMap<float> d_rmap(int(r.rows()), fh, fw);
      bilinear_resize_backward(d_small, d_rmap);
      d_r += d_rmap.data;
    }

    const MatX<float> d_enc = mlp.hidden_backward(mcache, d_r, grads.encoder.mlp);
    MatX<float> d_bottleneck;
    state.encoder.grid().backward(feat_pass->image.data, d_enc, grads.encoder.table, d_bottleneck);
    FeatureMap<float> d_feat;
    d_feat.height = fh;
    d_feat.width = fw;
    d_feat.data = d_bottleneck;
    pg_feat = composite_backward(*feat_pass, d_feat);
    grads.gaussians.features += pg_feat.values;
    for (Index i = 0; i < G.size(); ++i)
      grads.gaussians.opacity_logits(i) += pg_feat.opacities(i) * base_opacity(i) * (1 - base_opacity(i));
    projection_backward(*feat_pass, G, pg_feat, grads.gaussians);
  }
  total_loss(t, w);

  // Color pass backward.
  const auto pg_rgb = composite_backward(rgb_pass, d_rgb);
  ColorOpacityShift<float> d_shift;
  color_pass_backward(G, shift_ptr, pg_rgb.values, pg_rgb.opacities, grads.gaussians,
                      config.appearance ? &d_shift : nullptr);
  projection_backward(rgb_pass, G, pg_rgb, grads.gaussians);
  if (config.appearance) state.appearance.backward(acache, G, d_shift, grads.appearance, &grads.gaussians);

  if (accumulate_stats) {
    if (state.grad_accum.size() != G.size()) {
      state.grad_accum.setZero(G.size());
      state.grad_count.setZero(G.size());
    }
    const float sx = 0.5f * cam.width, sy = 0.5f * cam.height;
    const float fx = 0.5f * fw, fy = 0.5f * fh;
    for (const auto& sp : rgb_pass.splats) {
      const Index i = sp.gaussian_index;
      float gx = pg_rgb.mean2d(0, i) * sx, gy = pg_rgb.mean2d(1, i) * sy;
      if (feat_pass) {
        gx += pg_feat.mean2d(0, i) * fx;
        gy += pg_feat.mean2d(1, i) * fy;
      }
      state.grad_accum(i) += std::sqrt(gx * gx + gy * gy);
      state.grad_count(i) += 1;
    }
  }
  return diag;
}

double learning_rate(const std::string& name, const TrainConfig& c, int step, double extent) {
  if (name == "gaussians.means") return exponential_lr(c.lr_position_init, c.lr_position_final, step, c.iterations) * extent;
  if (name == "gaussians.log_scales") return c.lr_scale;
  if (name == "gaussians.rotations") return c.lr_rotation;
  if (name == "gaussians.opacity_logits") return c.lr_opacity;
  if (name == "gaussians.colors") return c.lr_color;
  if (name == "gaussians.features") return c.lr_feature;
  if (name == "encoder.table" || name.rfind("mlp.", 0) == 0) return c.lr_encoder;
  if (name.rfind("downsampler.", 0) == 0) return c.lr_downsampler;
  if (name == "appearance.embeddings") return c.lr_appearance_embedding;
  if (name.rfind("appearance.", 0) == 0) return c.lr_appearance_net;
  throw Error("no learning rate for parameter group " + name);
}

namespace {

void check_finite(std::vector<TensorRef>& grads, const LossTerms& t) {
  std::string bad;
  for (const auto& g : grads)
    if (!g.map().allFinite()) bad += (bad.empty() ? "" : ", ") + g.name;
  if (!bad.empty()) {
    std::ostringstream os;
    os << "non-finite gradient in " << bad << " (l1=" << t.l1 << " dssim=" << t.dssim << " clip=" << t.clip
       << " dino=" << t.dino << " sam=" << t.sam << ")";
    throw NonFiniteLossError(os.str());
  }
}

bool is_gaussian_tensor(const std::string& name) { return name.rfind("gaussians.", 0) == 0; }

// Rebuilds the Gaussian set: column j of the result is old column src[j], and its optimizer moments
// are copied unless fresh[j].
void gather(TrainState& s, const std::vector<Index>& src, const std::vector<bool>& fresh) {
  s.gaussians = s.gaussians.select(src);
  const Index n = Index(src.size());
  for (auto& [name, mom] : s.moments) {
    if (!is_gaussian_tensor(name)) continue;
    MatX<float> m(mom.m.rows(), n), v(mom.v.rows(), n);
    for (Index j = 0; j < n; ++j) {
      if (fresh[std::size_t(j)]) {
        m.col(j).setZero();
        v.col(j).setZero();
      } else {
        m.col(j) = mom.m.col(src[std::size_t(j)]);
        v.col(j) = mom.v.col(src[std::size_t(j)]);
      }
    }
    mom.m = std::move(m);
    mom.v = std::move(v);
  }
}

}  // namespace

StepDiagnostics train_step(TrainState& state, const std::vector<TrainingView>& views, const TrainConfig& config) {
  const FlushSubnormals flush;
  const int vi = view_for_step(config.seed, state.step, int(views.size()));
  const auto& view = views[std::size_t(vi)];
  const auto [fh, fw] = feature_size_for_step(config, state.step, view.camera.height, view.camera.width);
  TrainGradients grads = zero_gradients(state);
  StepDiagnostics diag = compute_gradients(state, view, config, fh, fw, grads);
  auto grefs = gradient_refs(grads);
  check_finite(grefs, diag.terms);
  auto params = parameter_refs(state);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].map();
    const auto g = grefs[i].map();
    auto& mom = state.moments[params[i].name];
    if (mom.m.size() == 0 && p.size() != 0) mom.reset(p.rows(), p.cols());
    const double wd = params[i].name.rfind("mlp.", 0) == 0 ? config.mlp_weight_decay : 0.0;
    adam_step(p, g, mom, learning_rate(params[i].name, config, state.step, state.scene_extent), wd);
  }
  ++state.step;

  const int it = state.step;
  if (it < config.densify_until && it > config.densify_from && it % config.densify_interval == 0)
    densify_and_prune(state, config, config.seed);
  if (config.opacity_reset_interval > 0 && it % config.opacity_reset_interval == 0) reset_opacity(state);
  return diag;
}

DensifyStats densify_and_prune(TrainState& state, const TrainConfig& config, std::uint64_t seed) {
  auto& G = state.gaussians;
  const Index N = G.size();
  DensifyStats stats;
  std::vector<std::pair<float, Index>> candidates;
  for (Index i = 0; i < N; ++i) {
    const float g = state.grad_count.size() == N && state.grad_count(i) > 0 ? state.grad_accum(i) / state.grad_count(i) : 0.0f;
    if (g > config.densify_grad_threshold) candidates.emplace_back(g, i);
  }
  if (config.max_gaussians > 0) {
    const Index budget = std::max<Index>(0, config.max_gaussians - N);
    if (Index(candidates.size()) > budget) {
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      candidates.resize(std::size_t(budget));
      std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    }
  }
  const double limit = config.percent_dense * state.scene_extent;
  std::vector<bool> split(std::size_t(N), false);
  std::vector<Index> clones, splits;
  for (const auto& [g, i] : candidates) {
    const double max_scale = std::exp(double(G.log_scales.col(i).maxCoeff()));
    if (max_scale <= limit) clones.push_back(i);
    else {
      splits.push_back(i);
      split[std::size_t(i)] = true;
    }
  }

  std::vector<Index> src;
  std::vector<bool> fresh;
  for (Index i = 0; i < N; ++i)
    if (!split[std::size_t(i)]) {
      src.push_back(i);
      fresh.push_back(false);
    }
  for (Index i : clones) {
    src.push_back(i);
    fresh.push_back(true);
  }
  for (Index i : splits)
    for (int c = 0; c < 2; ++c) {
      src.push_back(i);
      fresh.push_back(true);
    }
  // Sample split children inside their parent before the model is rebuilt.
  Rng rng = Rng::keyed(seed, std::uint64_t(state.step), 3);
  std::vector<Vec3<float>> child_means;
  for (Index i : splits) {
    const Mat3<float> R = quaternion_to_rotation<float>(G.rotations.col(i));
    const Vec3<float> s = G.log_scales.col(i).array().exp();
    for (int c = 0; c < 2; ++c) {
      Vec3<float> z(float(rng.normal()), float(rng.normal()), float(rng.normal()));
      child_means.push_back(R * s.cwiseProduct(z) + G.means.col(i));
    }
  }
  gather(state, src, fresh);
  const Index first_child = Index(src.size()) - Index(child_means.size());
  for (std::size_t c = 0; c < child_means.size(); ++c) {
    const Index j = first_child + Index(c);
    state.gaussians.means.col(j) = child_means[c];
    state.gaussians.log_scales.col(j).array() -= std::log(1.6f);
  }
  stats.cloned = int(clones.size());
  stats.split = int(splits.size());

  // Prune transparent Gaussians.
  std::vector<Index> keep;
  for (Index i = 0; i < state.gaussians.size(); ++i)
    if (sigmoid(state.gaussians.opacity_logits(i)) >= config.prune_opacity) keep.push_back(i);
  stats.pruned = int(state.gaussians.size() - Index(keep.size()));
  if (stats.pruned > 0) gather(state, keep, std::vector<bool>(keep.size(), false));

  state.grad_accum.setZero(state.gaussians.size());
  state.grad_count.setZero(state.gaussians.size());
  return stats;
}

void reset_opacity(TrainState& state) {
  const float cap = logit(0.01f);
  state.gaussians.opacity_logits = state.gaussians.opacity_logits.cwiseMin(cap);
  auto it = state.moments.find("gaussians.opacity_logits");
  if (it != state.moments.end()) {
    it->second.m.setZero();
    it->second.v.setZero();
  }
}

void write_log_record(std::ostream& os, const TrainState& state, const TrainConfig& config,
                      const StepDiagnostics& d) {
  const auto& t = d.terms;
  nlohmann::json j = {{"iteration", state.step},
                      {"l1", t.l1},
                      {"dssim", t.dssim},
                      {"rec", t.rec},
                      {"clip", t.clip},
                      {"dino", t.dino},
                      {"sam", t.sam},
                      {"total", t.total},
                      {"gaussians", state.gaussians.size()},
                      {"feat_size", {d.feat_height, d.feat_width}}};
  const int step = std::max(0, state.step - 1);
  j["lr"] = {{"position", learning_rate("gaussians.means", config, step, state.scene_extent)},
             {"color", config.lr_color},
             {"opacity", config.lr_opacity},
             {"feature", config.lr_feature},
             {"encoder", config.lr_encoder},
             {"downsampler", config.lr_downsampler},
             {"appearance_net", config.lr_appearance_net},
             {"appearance_embedding", config.lr_appearance_embedding}};
  os << j.dump() << "\n";
}

}  // namespace l3x
