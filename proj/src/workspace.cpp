#include "l3x/workspace.hpp"

#include "l3x/binary_io.hpp"
#include "l3x/checkpoint.hpp"
#include "l3x/image_io.hpp"
#include "l3x/providers.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace l3x {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kWorkspaceVersion = 1;

std::vector<fs::path> object_mask_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("object_", 0) == 0 && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_meta(const Workspace& ws, const json& extra) {
  json j = {{"format", "l3x-workspace"},
            {"version", kWorkspaceVersion},
            {"kind", ws.kind},
            {"feature_dim", ws.feature_dim},
            {"clip_dim", ws.clip_dim},
            {"dino_dim", ws.dino_dim},
            {"scales_m", ws.scales_m},
            {"train_ids", ws.train_ids},
            {"val_ids", ws.val_ids},
            {"classes", ws.classes},
            {"negatives", ws.negatives},
            {"warnings", ws.warnings}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_file_atomic(ws.root / "workspace.json", j.dump(2) + "\n");
}

// (channels) x pixels composite of per-Gaussian one-hot rows, no normalization.
FeatureMap<double> label_coverage(const Scene& scene, const std::vector<int>& labels, int count, const Camera& cam) {
  MatX<double> onehot = MatX<double>::Zero(count, scene.gaussians.size());
  for (Index i = 0; i < scene.gaussians.size(); ++i) onehot(labels[std::size_t(i)], i) = 1;
  VecX<double> op = scene.gaussians.opacity_logits.unaryExpr([](double v) { return sigmoid(v); });
  return composite(scene.gaussians, cam, onehot, op).image;
}

}  // namespace

// ---------------------------------------------------------------------------------

Workspace Workspace::open(const fs::path& root) {
  const fs::path meta = root / "workspace.json";
  if (!fs::exists(meta)) throw Error("not a workspace (missing " + meta.string() + ")");
  json j;
  try {
    j = json::parse(read_text_file(meta));
  } catch (const json::exception& e) {
    throw Error(meta.string() + ": " + e.what());
  }
  if (j.value("format", "") != "l3x-workspace") throw Error(meta.string() + ": unrecognized format");
  if (j.value("version", 0) != kWorkspaceVersion)
    throw Error(meta.string() + ": unsupported workspace version " + std::to_string(j.value("version", 0)));
  Workspace ws;
  ws.root = root;
  try {
    ws.kind = j.at("kind");
    ws.feature_dim = j.at("feature_dim");
    ws.clip_dim = j.at("clip_dim");
    ws.dino_dim = j.at("dino_dim");
    ws.scales_m = j.at("scales_m").get<std::vector<double>>();
    ws.train_ids = j.at("train_ids").get<std::vector<int>>();
    ws.val_ids = j.at("val_ids").get<std::vector<int>>();
    ws.classes = j.at("classes").get<std::vector<std::string>>();
    ws.negatives = j.at("negatives").get<std::vector<std::string>>();
    ws.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(meta.string() + ": " + e.what());
  }
  ColmapOptions co;
  co.feature_dim = ws.feature_dim;
  ws.scene = ingest_colmap_dir(root / "sparse", co);
  compute_pixel_sizes(ws.scene);
  return ws;
}

fs::path Workspace::image_path(int id) const { return root / "images" / scene.camera_by_id(id).name; }

EncoderConfig Workspace::encoder_config() const {
  EncoderConfig c;
  c.grid.bottleneck_dim = feature_dim;
  c.clip_dim = clip_dim;
  c.dino_dim = dino_dim;
  return c;
}

Mask Workspace::building_mask(int id) const {
  const fs::path p = mask_dir(id) / "building.png";
  return fs::exists(p) ? read_mask_png(p) : Mask();
}

std::vector<int> Workspace::split_ids(const std::string& split) const {
  if (split == "train") return train_ids;
  if (split == "val") return val_ids;
  if (split == "all") {
    std::vector<int> all = train_ids;
    all.insert(all.end(), val_ids.begin(), val_ids.end());
    return all;
  }
  throw Error("unknown split '" + split + "' (expected train, val or all)");
}

std::vector<TrainingView> Workspace::training_views() const {
  FileProvider fp(features_dir());
  std::vector<TrainingView> views;
  for (std::size_t k = 0; k < train_ids.size(); ++k) {
    const int id = train_ids[k];
    TrainingView v;
    v.camera = scene.camera_by_id(id);
    v.appearance_index = int(k);
    v.rgb = read_png_rgb(image_path(id));
    if (v.rgb.height != v.camera.height || v.rgb.width != v.camera.width)
      throw Error("image " + image_path(id).string() + " does not match its camera size");
    v.pyramid = pyramid_from_files(fp.clip_grids(), id, v.camera.height, v.camera.width);
    ImageView iv{id, &v.rgb, v.camera.height, v.camera.width};
    v.dino = fp.dino_map(iv);
    v.masks.building = building_mask(id);
    if (v.masks.building.data.empty()) v.masks.building = Mask(v.camera.height, v.camera.width, 1);
    for (const auto& p : object_mask_files(mask_dir(id))) v.masks.objects.push_back(read_mask_png(p));
    v.prepare_masks();
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<EvalView> Workspace::eval_views(const std::string& split) const {
  std::vector<EvalView> out;
  for (int id : split_ids(split)) {
    EvalView v;
    v.camera = scene.camera_by_id(id);
    v.building = building_mask(id);
    for (const auto& c : classes) {
      const fs::path p = gt_dir(id) / (c + ".png");
      if (fs::exists(p)) v.gt_masks[c] = read_mask_png(p);
    }
    out.push_back(std::move(v));
  }
  return out;
}

PromptDictionary Workspace::prompts() const {
  FileProvider fp(features_dir());
  return build_prompts(parse_synonyms(read_text_file(root / "prompts.txt")), fp);
}

MatX<float> Workspace::negative_embeddings() const {
  FileProvider fp(features_dir());
  MatX<float> out(clip_dim, Index(negatives.size()));
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    auto e = fp.text_embed(negatives[i]);
    if (!e) throw Error("workspace has no text embedding for negative '" + negatives[i] + "'");
    out.col(Index(i)) = *e;
  }
  return out;
}

// ---------------------------------------------------------------------------------

std::vector<double> default_scales(const Scene& scene, double smallest_structure_m, int count) {
  if (count < 1) throw Error("scale count must be positive");
  double px_min = 1e300, px_max = 0;
  int side = 1 << 30;
  for (const auto& c : scene.cameras) {
    if (!(c.pixel_size_m > 0)) continue;
    px_min = std::min(px_min, c.pixel_size_m);
    px_max = std::max(px_max, c.pixel_size_m);
    side = std::min({side, c.height, c.width});
  }
  if (px_max == 0) throw Error("cannot choose scales: no camera has a pixel size");
  const double lo = std::max(smallest_structure_m, (kMinWindowPx + 0.5) * px_max);
  const double hi = std::max(lo, 0.6 * side * px_min);
  return count == 1 ? std::vector<double>{lo} : log_spaced_scales(lo, hi, count);
}

Workspace prepare_synthetic(const fs::path& root, const SyntheticPrepareOptions& options) {
  const SyntheticSpec& spec = options.spec;
  SyntheticScene syn = generate_synthetic_scene(spec);
  Scene& scene = syn.scene;

  Workspace ws;
  ws.root = root;
  ws.kind = "synthetic";
  ws.feature_dim = spec.feature_dim;
  ws.clip_dim = spec.clip_dim;
  ws.dino_dim = spec.dino_dim;
  ws.classes = syn.class_names;
  ws.negatives = {"background", "object", "things"};
  compute_pixel_sizes(scene, &ws.warnings);
  ws.scales_m = options.scales_m.empty() ? default_scales(scene, syn.smallest_structure_m, options.scale_count)
                                         : options.scales_m;
  for (int i : syn.train_cameras) ws.train_ids.push_back(scene.cameras[std::size_t(i)].id);
  for (int i : syn.val_cameras) ws.val_ids.push_back(scene.cameras[std::size_t(i)].id);

  fs::create_directories(root / "images");
  write_colmap(scene, root / "sparse");

  SyntheticOracle oracle(syn.clip_classes, syn.clip_background, syn.dino_classes, syn.dino_background);
  std::string prompts;
  for (int k = 0; k < spec.classes; ++k) {
    const std::string& name = syn.class_names[std::size_t(k)];
    oracle.add_text(name, syn.clip_classes.col(k));
    std::string alt = name.back() == 's' ? name.substr(0, name.size() - 1) : name + " region";
    // A synonym is a nearby phrase, not an identical one.
    Rng rng = Rng::keyed(spec.seed, std::uint64_t(k), 200);
    VecX<double> noise(spec.clip_dim);
    for (Index i = 0; i < noise.size(); ++i) noise(i) = rng.normal();
    oracle.add_text(alt, (syn.clip_classes.col(k) + 0.35 * noise.normalized()).normalized());
    prompts += name + ", " + alt + "\n";
  }
  oracle.add_text("background", syn.clip_background);
  oracle.add_text("object", syn.clip_negatives.col(0));
  oracle.add_text("things", syn.clip_negatives.col(1));
  write_file_atomic(root / "prompts.txt", prompts);

  FeatureCache cache;
  cache.clip_dim = spec.clip_dim;
  cache.dino_dim = spec.dino_dim;
  const int K = spec.classes;
  VecX<double> opacities = scene.gaussians.opacity_logits.unaryExpr([](double v) { return sigmoid(v); });

  for (const auto& cam : scene.cameras) {
    const auto pass = composite(scene.gaussians, cam, MatX<double>(scene.gaussians.colors), opacities);
    FeatureMap<float> rgb = pass.image.cast<float>();
    write_png(rgb, root / "images" / cam.name);

    const FeatureMap<double> cls = label_coverage(scene, scene.labels, K, cam);
    FeatureMap<float> coverage(K + 1, cam.height, cam.width);
    coverage.data.topRows(K) = cls.data.cast<float>();
    coverage.data.row(K) = (1.0 - pass.alpha.data.array()).max(0.0).matrix().cast<float>();
    oracle.set_coverage(cam.id, coverage);

    Mask building(cam.height, cam.width);
    Mask gt_any(cam.height, cam.width);
    std::vector<Mask> gt(std::size_t(K), Mask(cam.height, cam.width));
    for (Index p = 0; p < pass.alpha.pixels(); ++p) {
      if (pass.alpha.data(0, p) < 0.5) continue;
      building.data[std::size_t(p)] = 1;
      Index best = 0;
      cls.data.col(p).maxCoeff(&best);
      gt[std::size_t(best)].data[std::size_t(p)] = 1;
    }
    fs::create_directories(ws.mask_dir(cam.id));
    fs::create_directories(ws.gt_dir(cam.id));
    write_mask_png(building, ws.mask_dir(cam.id) / "building.png");
    for (int k = 0; k < K; ++k) write_mask_png(gt[std::size_t(k)], ws.gt_dir(cam.id) / (syn.class_names[std::size_t(k)] + ".png"));

    const FeatureMap<double> obj = label_coverage(scene, scene.object_ids, syn.object_count, cam);
    for (int o = 0; o < syn.object_count; ++o) {
      Mask m(cam.height, cam.width);
      for (Index p = 0; p < obj.pixels(); ++p) m.data[std::size_t(p)] = obj.data(o, p) >= 0.5;
      if (m.count() < 2) continue;
      char name[32];
      std::snprintf(name, sizeof(name), "object_%03d.png", o);
      write_mask_png(m, ws.mask_dir(cam.id) / name);
    }

    ImageView iv{cam.id, &rgb, cam.height, cam.width};
    const ClipPyramid pyr = build_pyramid(iv, cam, oracle, ws.scales_m, &ws.warnings);
    for (auto& g : pyramid_to_files(pyr)) cache.grids.push_back(std::move(g));
    cache.dino[cam.id] = oracle.dino_map(iv);
  }
  for (const auto& group : parse_synonyms(prompts))
    for (const auto& t : group) cache.text[t] = *oracle.text_embed(t);
  for (const auto& t : ws.negatives) cache.text[t] = *oracle.text_embed(t);
  write_feature_cache(cache, ws.features_dir());

  json syn_meta = {{"classes", spec.classes},       {"gaussians_per_class", spec.gaussians_per_class},
                   {"images", spec.images},         {"val_images", spec.val_images},
                   {"resolution", spec.resolution}, {"seed", spec.seed},
                   {"scene_width_m", syn.scene_width_m}};
  write_meta(ws, {{"synthetic", syn_meta}});
  return Workspace::open(root);
}

Workspace prepare_colmap(const fs::path& root, const ColmapPrepareOptions& o) {
  if (o.colmap_dir.empty() || o.images_dir.empty() || o.features_dir.empty())
    throw Error("prepare needs a COLMAP model, an image directory and a feature directory");
  Workspace ws;
  ws.root = root;
  ws.kind = "colmap";
  ws.negatives = o.negatives;
  ws.scene = ingest_colmap_dir(o.colmap_dir);
  compute_pixel_sizes(ws.scene, &ws.warnings);
  ws.feature_dim = ws.scene.gaussians.feature_dim();

  FileProvider fp(o.features_dir);
  ws.clip_dim = fp.clip_dim();
  ws.dino_dim = fp.dino_dim();
  if (!o.scales_m.empty()) {
    ws.scales_m = o.scales_m;
  } else {
    std::set<double> s;
    for (const auto& g : fp.clip_grids()) s.insert(g.scale_m);
    ws.scales_m.assign(s.begin(), s.end());
  }
  if (ws.scales_m.empty()) throw Error("no CLIP scales given and none found in " + o.features_dir.string());

  std::set<int> val(o.val_ids.begin(), o.val_ids.end());
  for (const auto& c : ws.scene.cameras) (val.count(c.id) ? ws.val_ids : ws.train_ids).push_back(c.id);
  if (ws.train_ids.empty()) throw Error("every view is held out; nothing to train on");

  fs::create_directories(root / "images");
  write_colmap(ws.scene, root / "sparse");
  auto copy_tree = [](const fs::path& from, const fs::path& to) {
    if (from.empty()) return;
    if (!fs::is_directory(from)) throw Error("not a directory: " + from.string());
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  };
  copy_tree(o.masks_dir, root / "masks");
  copy_tree(o.gt_dir, root / "gt");

  FeatureCache cache;
  cache.clip_dim = ws.clip_dim;
  cache.dino_dim = ws.dino_dim;
  for (const auto& cam : ws.scene.cameras) {
    const fs::path src = o.images_dir / cam.name;
    FeatureMap<float> rgb = read_png_rgb(src);
    if (rgb.height != cam.height || rgb.width != cam.width)
      throw Error(src.string() + " is " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                  " but its camera is " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
    fs::create_directories((root / "images" / cam.name).parent_path());
    fs::copy_file(src, root / "images" / cam.name, fs::copy_options::overwrite_existing);
    ImageView iv{cam.id, &rgb, cam.height, cam.width};
    for (auto& g : pyramid_to_files(build_pyramid(iv, cam, fp, ws.scales_m, &ws.warnings))) cache.grids.push_back(std::move(g));
    cache.dino[cam.id] = fp.dino_map(iv);
  }

  std::string prompts;
  if (!o.prompts_file.empty()) {
    prompts = read_text_file(o.prompts_file);
    for (const auto& g : parse_synonyms(prompts)) ws.classes.push_back(g.front());
  }
  auto add_text = [&](const std::string& t) {
    auto e = fp.text_embed(t);
    if (!e) throw Error("feature directory has no text embedding for '" + t + "'");
    cache.text[t] = *e;
  };
  for (const auto& g : parse_synonyms(prompts))
    for (const auto& t : g) add_text(t);
  for (const auto& t : ws.negatives) add_text(t);
  write_file_atomic(root / "prompts.txt", prompts);
  write_feature_cache(cache, ws.features_dir());
  write_meta(ws, json::object());
  return Workspace::open(root);
}

// ---------------------------------------------------------------------------------

TrainState fresh_state(const Workspace& ws, const TrainConfig& config) {
  std::vector<Camera> train_cams;
  for (int id : ws.train_ids) train_cams.push_back(ws.scene.camera_by_id(id));
  return initialize_state(seed_gaussians(ws.scene.points, ws.feature_dim), ws.encoder_config(), AppearanceConfig(),
                          int(ws.train_ids.size()), scene_extent(train_cams), config.seed);
}

void run_training(TrainState& state, const std::vector<TrainingView>& views, const TrainConfig& config,
                  const TrainRunOptions& options) {
  config.validate();
  if (views.empty()) throw Error("no training views");
  while (state.step < config.iterations) {
    const StepDiagnostics diag = train_step(state, views, config);
    if (options.log) write_log_record(*options.log, state, config, diag);
    if (options.progress && (state.step % std::max(options.progress_every, 1) == 0 || state.step == config.iterations)) {
      char line[160];
      std::snprintf(line, sizeof(line), "step %6d/%d  loss %.5f  rec %.5f  clip %.5f  dino %.5f  gaussians %ld\n",
                    state.step, config.iterations, diag.terms.total, diag.terms.rec, diag.terms.clip, diag.terms.dino,
                    long(state.gaussians.size()));
      *options.progress << line << std::flush;
    }
    if (options.checkpoint_every > 0 && !options.checkpoint_dir.empty() && state.step % options.checkpoint_every == 0 &&
        state.step < config.iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%07d.l3xc", state.step);
      fs::create_directories(options.checkpoint_dir);
      save_checkpoint(state, options.checkpoint_dir / name);
    }
  }
}

SceneBundle make_bundle(const Workspace& ws, const TrainState& state) {
  SceneBundle b;
  b.gaussians = state.gaussians;
  b.encoder = state.encoder;
  b.cameras = ws.scene.cameras;
  b.prompts = ws.prompts();
  b.negatives = ws.negative_embeddings();
  b.negative_names = ws.negatives;
  return b;
}

APTable evaluate_split(const Workspace& ws, const GaussianModel<float>& gaussians, const SemanticEncoder<float>& encoder,
                       const std::string& split, const QueryOptions& options) {
  QueryEngine engine(gaussians, encoder, ws.negative_embeddings());
  const PromptDictionary prompts = ws.prompts();
  return evaluate(engine, ws.eval_views(split), prompts, ws.classes, options);
}

}  // namespace l3x
