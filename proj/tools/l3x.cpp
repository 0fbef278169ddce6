// l3x: prepare / train / query / eval / export-bundle / render.
// Exit status: 0 success, 1 runtime failure, 2 usage error.

#include "l3x/binary_io.hpp"
#include "l3x/bundle.hpp"
#include "l3x/checkpoint.hpp"
#include "l3x/config.hpp"
#include "l3x/image_io.hpp"
#include "l3x/workspace.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace l3x;

namespace {

struct PrepareArgs {
  std::string workspace = ".";
  std::vector<std::string> synthetic_kv;
  SyntheticPrepareOptions syn;
  std::vector<double> scales;
  int scale_count = 0;
  std::string colmap, images, features, masks, gt, prompts;
  std::vector<int> val_ids;
  std::vector<std::string> negatives;
};

struct TrainArgs {
  std::string workspace = ".", config_file, output, resume, log;
  std::map<std::string, std::string> overrides;
  bool print_config = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string workspace = ".", checkpoint, bundle, split = "val", output;
  int threads = 1;
};

struct ExportArgs {
  std::string workspace = ".", checkpoint, output;
};

struct QueryArgs {
  std::string bundle, prompt, mask, output;
  int camera = 0;
  int width = 0, height = 0;
  int threads = 1;
  bool all_prompts = false;
};

struct RenderArgs {
  std::string bundle, output;
  int camera = 0;
  int width = 0, height = 0;
  int threads = 1;
};

fs::path default_checkpoint(const std::string& ws) { return fs::path(ws) / "checkpoint.l3xc"; }

Camera sized(const Camera& cam, int width, int height) {
  if ((width > 0) != (height > 0)) throw UsageError("--width and --height must be given together");
  return width > 0 ? cam.resized(width, height) : cam;
}

// "classes=2 views=20 ..." after --synthetic; the same settings exist as separate flags.
void apply_synthetic_kv(SyntheticSpec& spec, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--synthetic expects key=value settings, got '" + kv + "'");
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    try {
      if (k == "classes") spec.classes = std::stoi(v);
      else if (k == "gaussians_per_class") spec.gaussians_per_class = std::stoi(v);
      else if (k == "views" || k == "images") spec.images = std::stoi(v);
      else if (k == "val_views" || k == "val_images") spec.val_images = std::stoi(v);
      else if (k == "resolution") spec.resolution = std::stoi(v);
      else if (k == "seed") spec.seed = std::stoull(v);
      else throw UsageError("unknown synthetic setting '" + k + "'");
    } catch (const std::logic_error&) {
      throw UsageError("bad value for synthetic setting '" + k + "': '" + v + "'");
    }
  }
}

int run_prepare(const PrepareArgs& a, bool synthetic) {
  Workspace ws;
  if (synthetic) {
    if (!a.colmap.empty()) throw UsageError("--synthetic and --colmap are mutually exclusive");
    SyntheticPrepareOptions o = a.syn;
    apply_synthetic_kv(o.spec, a.synthetic_kv);
    o.scales_m = a.scales;
    if (a.scale_count > 0) o.scale_count = a.scale_count;
    ws = prepare_synthetic(a.workspace, o);
  } else {
    if (a.colmap.empty()) throw UsageError("prepare needs --synthetic or --colmap");
    ColmapPrepareOptions o;
    o.colmap_dir = a.colmap;
    o.images_dir = a.images;
    o.features_dir = a.features;
    o.masks_dir = a.masks;
    o.gt_dir = a.gt;
    o.prompts_file = a.prompts;
    o.scales_m = a.scales;
    o.val_ids = a.val_ids;
    if (!a.negatives.empty()) o.negatives = a.negatives;
    if (a.scale_count > 0) o.scale_count = a.scale_count;
    if (o.images_dir.empty() || o.features_dir.empty()) throw UsageError("--colmap needs --images and --features");
    ws = prepare_colmap(a.workspace, o);
  }
  std::cout << "workspace " << a.workspace << ": " << ws.train_ids.size() << " training views, " << ws.val_ids.size()
            << " held out, " << ws.scene.points.size() << " points\nscales (m):";
  for (double s : ws.scales_m) std::cout << " " << s;
  std::cout << "\n";
  for (const auto& w : ws.warnings) std::cerr << "warning: " << w << "\n";
  write_file_atomic(fs::path(a.workspace) / "desk.toml", "# l3x train --config desk.toml\n" + dump_settings(RunSettings()));
  return 0;
}

int run_train(const TrainArgs& a) {
  RunSettings settings;
  KeyValues kv;
  if (!a.config_file.empty()) kv = read_key_values(a.config_file);
  for (const auto& [k, v] : a.overrides) {
    kv.values[k] = v;
    kv.lines.erase(k);
  }
  apply_key_values(settings, kv);
  try {
    settings.train.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (a.print_config) {
    std::cout << dump_settings(settings);
    return 0;
  }

  const Workspace ws = Workspace::open(a.workspace);
  const auto views = ws.training_views();
  TrainState state = a.resume.empty() ? fresh_state(ws, settings.train) : load_checkpoint(a.resume);
  if (state.step >= settings.train.iterations)
    std::cerr << "warning: checkpoint is already at step " << state.step << "; nothing to do\n";

  const fs::path log_path = a.log.empty() ? fs::path(a.workspace) / "train_log.jsonl" : fs::path(a.log);
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw Error("cannot open " + log_path.string());
  write_file_atomic(fs::path(a.workspace) / "train_config.txt", dump_settings(settings));

  TrainRunOptions run;
  run.log = &log;
  run.progress = a.quiet ? nullptr : &std::cerr;
  run.checkpoint_every = settings.checkpoint_every;
  run.checkpoint_dir = fs::path(a.workspace) / "checkpoints";
  const auto t0 = std::chrono::steady_clock::now();
  run_training(state, views, settings.train, run);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out = a.output.empty() ? default_checkpoint(a.workspace) : fs::path(a.output);
  save_checkpoint(state, out);
  std::cout << "trained to step " << state.step << " in " << secs << " s, " << state.gaussians.size()
            << " Gaussians -> " << out.string() << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  if (!a.checkpoint.empty() && !a.bundle.empty()) throw UsageError("give --checkpoint or --bundle, not both");
  const Workspace ws = Workspace::open(a.workspace);
  QueryOptions qo;
  qo.threads = a.threads;
  APTable table;
  if (!a.bundle.empty()) {
    const SceneBundle b = load_bundle(a.bundle);
    table = evaluate_split(ws, b.gaussians, b.encoder, a.split, qo);
  } else {
    const TrainState s = load_checkpoint(a.checkpoint.empty() ? default_checkpoint(a.workspace) : fs::path(a.checkpoint));
    table = evaluate_split(ws, s.gaussians, s.encoder, a.split, qo);
  }
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  const std::string csv = ap_table_csv(table);
  const fs::path out = a.output.empty() ? fs::path(a.workspace) / ("ap_" + a.split + ".csv") : fs::path(a.output);
  write_file_atomic(out, csv);
  std::cout << csv;
  return 0;
}

int run_export(const ExportArgs& a) {
  const Workspace ws = Workspace::open(a.workspace);
  const TrainState s = load_checkpoint(a.checkpoint.empty() ? default_checkpoint(a.workspace) : fs::path(a.checkpoint));
  const fs::path out = a.output.empty() ? fs::path(a.workspace) / "scene.l3xb" : fs::path(a.output);
  export_bundle(make_bundle(ws, s), out);
  std::cout << "bundle " << out.string() << ": " << s.gaussians.size() << " Gaussians, " << fs::file_size(out)
            << " bytes\n";
  return 0;
}

int run_query(const QueryArgs& a) {
  if (a.prompt.empty() == !a.all_prompts) throw UsageError("give exactly one of --prompt or --all");
  const SceneBundle b = load_bundle(a.bundle);
  const Camera cam = sized(b.camera(a.camera), a.width, a.height);
  Mask mask;
  if (!a.mask.empty()) mask = read_mask_png(a.mask);
  std::vector<const PromptEmbedding*> ps;
  if (a.all_prompts)
    for (const auto& n : b.prompts.names()) ps.push_back(&b.prompts.find(n));
  else
    ps.push_back(&b.prompts.find(a.prompt));

  QueryEngine engine(b.gaussians, b.encoder, b.negatives);
  QueryOptions qo;
  qo.threads = a.threads;
  const auto t0 = std::chrono::steady_clock::now();
  const auto maps = engine.query_all(cam, ps, mask.data.empty() ? nullptr : &mask, qo);
  const double ms = 1e3 * std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string prefix = a.output.empty() ? "query" : a.output;
  for (const auto& m : maps) {
    std::string stem = prefix + "_" + m.prompt + "_" + std::to_string(cam.id);
    for (auto& ch : stem)
      if (ch == ' ') ch = '_';
    write_heatmap_png(m.scores, stem + ".png");
    write_raw_map(m.scores, stem + ".f32");
    std::cout << m.prompt << " -> " << stem << ".png, " << stem << ".f32\n";
  }
  std::cout << "query time " << ms << " ms (" << cam.width << "x" << cam.height << ")\n";
  return 0;
}

int run_render(const RenderArgs& a) {
  const SceneBundle b = load_bundle(a.bundle);
  const Camera cam = sized(b.camera(a.camera), a.width, a.height);
  RenderOptions ro;
  ro.render_features = false;
  ro.threads = a.threads;
  const auto maps = render(b.gaussians, cam, ro);
  const std::string out = a.output.empty() ? "render_" + std::to_string(cam.id) + ".png" : a.output;
  write_png(maps.rgb, out);
  std::cout << "rendered camera " << cam.id << " -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic Gaussian splatting: distill, query and export scenes"};
  app.require_subcommand(1);

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "create a workspace from a synthetic scene or a COLMAP model");
  prep->add_option("workspace,-w,--workspace", pa.workspace, "workspace directory")->capture_default_str();
  auto* synthetic = prep->add_option("--synthetic", pa.synthetic_kv,
                                     "generate a labeled synthetic scene; optional key=value settings")
                        ->expected(0, -1);
  prep->add_option("--classes", pa.syn.spec.classes, "synthetic: number of classes")->capture_default_str();
  pa.syn.spec.gaussians_per_class = 500;
  pa.syn.spec.val_images = 5;
  prep->add_option("--gaussians-per-class", pa.syn.spec.gaussians_per_class, "synthetic: Gaussians per class")->capture_default_str();
  prep->add_option("--views", pa.syn.spec.images, "synthetic: training views")->capture_default_str();
  prep->add_option("--val-views", pa.syn.spec.val_images, "synthetic: held-out views")->capture_default_str();
  prep->add_option("--resolution", pa.syn.spec.resolution, "synthetic: image size in pixels")->capture_default_str();
  prep->add_option("--seed", pa.syn.spec.seed, "synthetic: scene seed")->capture_default_str();
  prep->add_option("--scales", pa.scales, "physical CLIP scales in meters")->delimiter(',');
  prep->add_option("--scale-count", pa.scale_count, "number of automatically chosen scales");
  prep->add_option("--colmap", pa.colmap, "COLMAP text model directory");
  prep->add_option("--images", pa.images, "image directory");
  prep->add_option("--features", pa.features, "precomputed feature directory");
  prep->add_option("--masks", pa.masks, "per-image mask directory");
  prep->add_option("--gt", pa.gt, "per-image ground-truth mask directory");
  prep->add_option("--prompts", pa.prompts, "prompt list, synonyms separated by commas");
  prep->add_option("--val-ids", pa.val_ids, "held-out image ids")->delimiter(',');
  prep->add_option("--negatives", pa.negatives, "negative phrases")->delimiter(',');

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "distill a workspace into a semantic Gaussian model");
  train->add_option("workspace,-w,--workspace", ta.workspace, "workspace directory")->capture_default_str();
  train->add_option("--config", ta.config_file, "key = value configuration file");
  train->add_option("--output", ta.output, "final checkpoint (default <workspace>/checkpoint.l3xc)");
  train->add_option("--resume", ta.resume, "continue from a checkpoint");
  train->add_option("--log", ta.log, "JSONL loss log (default <workspace>/train_log.jsonl)");
  train->add_flag("--print-config", ta.print_config, "print the effective configuration and exit");
  train->add_flag("--quiet", ta.quiet, "no progress output");
  for (const auto& key : config_keys()) {
    std::string dashed = key.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    std::string names = "--" + key.name + (dashed != key.name ? ",--" + dashed : "");
    train->add_option_function<std::string>(names, [&ta, name = key.name](const std::string& v) { ta.overrides[name] = v; },
                                            key.help)
        ->group("Configuration keys");
  }

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "per-prompt average precision on a split");
  eval->add_option("workspace,-w,--workspace", ea.workspace, "workspace directory")->capture_default_str();
  eval->add_option("--checkpoint", ea.checkpoint, "checkpoint (default <workspace>/checkpoint.l3xc)");
  eval->add_option("--bundle", ea.bundle, "evaluate an exported bundle instead");
  eval->add_option("--split", ea.split, "train, val or all")->capture_default_str();
  eval->add_option("--output", ea.output, "CSV path (default <workspace>/ap_<split>.csv)");
  eval->add_option("--threads", ea.threads, "worker threads")->capture_default_str();

  ExportArgs xa;
  auto* exp = app.add_subcommand("export-bundle", "write the inference bundle");
  exp->add_option("workspace,-w,--workspace", xa.workspace, "workspace directory")->capture_default_str();
  exp->add_option("--checkpoint", xa.checkpoint, "checkpoint (default <workspace>/checkpoint.l3xc)");
  exp->add_option("--output", xa.output, "bundle path (default <workspace>/scene.l3xb)");

  QueryArgs qa;
  auto* query = app.add_subcommand("query", "relevancy map for a prompt from one camera");
  query->add_option("bundle,--bundle", qa.bundle, "scene bundle")->required();
  query->add_option("--prompt", qa.prompt, "prompt or synonym from the bundle dictionary");
  query->add_flag("--all", qa.all_prompts, "query every prompt in the bundle");
  query->add_option("--camera", qa.camera, "camera id")->required();
  query->add_option("--mask", qa.mask, "building mask PNG (default: rendered alpha >= 0.5)");
  query->add_option("--width", qa.width, "override render width");
  query->add_option("--height", qa.height, "override render height");
  query->add_option("--output", qa.output, "output prefix")->capture_default_str();
  query->add_option("--threads", qa.threads, "worker threads")->capture_default_str();

  RenderArgs ra;
  auto* rend = app.add_subcommand("render", "render the RGB image of a camera from a bundle");
  rend->add_option("bundle,--bundle", ra.bundle, "scene bundle")->required();
  rend->add_option("--camera", ra.camera, "camera id")->required();
  rend->add_option("--width", ra.width, "override render width");
  rend->add_option("--height", ra.height, "override render height");
  rend->add_option("--output", ra.output, "PNG path");
  rend->add_option("--threads", ra.threads, "worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*prep) return run_prepare(pa, synthetic->count() > 0);
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*exp) return run_export(xa);
    if (*query) return run_query(qa);
    if (*rend) return run_render(ra);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
