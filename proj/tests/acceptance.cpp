// Acceptance runner: one PASS/FAIL line per criterion, then a summary. Exit status 1 if any fails.

#include "checks.hpp"

#include "l3x/binary_io.hpp"
#include "l3x/bundle.hpp"
#include "l3x/checkpoint.hpp"
#include "l3x/image_io.hpp"
#include "l3x/query.hpp"
#include "l3x/workspace.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace l3x;
using l3x::test::CheckResult;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Report {
  int failed = 0;
  void line(int id, bool pass, const std::string& text) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
    std::fflush(stdout);
    failed += !pass;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every check must pass; the reported value is the worst one.
CheckResult all_of(std::initializer_list<CheckResult> rs) {
  CheckResult out{true, 0, ""};
  for (const auto& r : rs) {
    out.pass = out.pass && r.pass;
    out.value = std::max(out.value, r.value);
    if (!r.pass) out.detail += (out.detail.empty() ? "" : "; ") + r.detail;
  }
  return out;
}

struct Trained {
  TrainState state;
  std::string log;
  double seconds = 0;
};

// Trains or, with `reuse`, loads a previous checkpoint and log from `dir`.
Trained train_or_load(const Workspace& ws, const TrainConfig& config, const fs::path& dir, bool reuse,
                      const std::string& tag) {
  const fs::path ckpt = dir / (tag + ".l3xc"), log_path = dir / (tag + ".jsonl"), time_path = dir / (tag + ".time");
  Trained t;
  if (reuse && fs::exists(ckpt) && fs::exists(log_path) && fs::exists(time_path)) {
    t.state = load_checkpoint(ckpt);
    t.log = read_text_file(log_path);
    t.seconds = std::stod(read_text_file(time_path));
    if (t.state.step == config.iterations) {
      std::printf("  [%s] reused %s\n", tag.c_str(), ckpt.string().c_str());
      return t;
    }
  }
  std::printf("  [%s] training %d iterations...\n", tag.c_str(), config.iterations);
  std::fflush(stdout);
  t.state = fresh_state(ws, config);
  std::ostringstream log;
  TrainRunOptions opt;
  opt.log = &log;
  const auto t0 = Clock::now();
  run_training(t.state, ws.training_views(), config, opt);
  t.seconds = seconds_since(t0);
  t.log = log.str();
  save_checkpoint(t.state, ckpt);
  write_file_atomic(log_path, t.log);
  write_file_atomic(time_path, std::to_string(t.seconds));
  std::printf("  [%s] %.0f s, %lld Gaussians\n", tag.c_str(), t.seconds, (long long)t.state.gaussians.size());
  return t;
}

APTable eval_split(const Workspace& ws, const TrainState& s, const std::string& split) {
  return evaluate_split(ws, s.gaussians, s.encoder, split);
}

std::string ap_summary(const APTable& t) {
  std::string s;
  for (const auto& [name, ap] : t.ap) s += name + " " + fmt(ap) + ", ";
  return s + "mAP " + fmt(t.mean_ap);
}

// Numeric fields of two JSONL logs, compared pairwise; returns the worst absolute difference
// (infinity when the structure differs).
double log_difference(const std::string& a, const std::string& b) {
  auto numbers = [](const std::string& s, std::string& skeleton) {
    std::vector<double> out;
    for (std::size_t i = 0; i < s.size();) {
      const char c = s[i];
      if ((c >= '0' && c <= '9') || c == '-') {
        std::size_t used = 0;
        out.push_back(std::stod(s.substr(i, 40), &used));
        skeleton += '#';
        i += used;
      } else {
        skeleton += c;
        ++i;
      }
    }
    return out;
  };
  std::string ka, kb;
  const auto na = numbers(a, ka), nb = numbers(b, kb);
  if (ka != kb || na.size() != nb.size() || na.empty()) return std::numeric_limits<double>::infinity();
  double worst = 0;
  for (std::size_t i = 0; i < na.size(); ++i) worst = std::max(worst, std::abs(na[i] - nb[i]));
  return worst;
}

void write_golden(const fs::path& out, const Workspace& ws, const TrainState& s, const SceneBundle& bundle) {
  fs::create_directories(out);
  export_bundle(bundle, out / "synthetic.l3xb");
  write_file_atomic(out / "ap_val.csv", ap_table_csv(eval_split(ws, s, "val")));
  QueryEngine engine(bundle.gaussians, bundle.encoder, bundle.negatives);
  const Camera cam = bundle.camera(ws.val_ids.front()).resized(64, 64);
  for (const auto& name : bundle.prompts.names()) {
    const auto m = engine.query(cam, bundle.prompts.find(name));
    write_raw_map(m.scores, out / ("relevancy_" + name + "_" + std::to_string(ws.val_ids.front()) + "_64.f32"));
  }
  std::ostringstream readme;
  readme << "camera " << ws.val_ids.front() << " at 64x64, alpha >= 0.5 building mask\n";
  write_file_atomic(out / "maps.txt", readme.str());
  std::printf("  golden files written to %s\n", out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l3x acceptance runner"};
  std::string work = "acceptance_work", golden_out;
  bool reuse = false;
  int threads = int(std::max(2u, std::thread::hardware_concurrency()));
  app.add_option("--work", work, "scratch directory for the synthetic workspace and checkpoints")->capture_default_str();
  app.add_flag("--reuse", reuse, "reuse checkpoints left in --work by an earlier run");
  app.add_option("--golden-out", golden_out, "write the golden bundle, AP table and 64x64 maps here");
  app.add_option("--threads", threads, "threads for the parallel bitwise check")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Report report;
  std::printf("cores available: %u\n", std::thread::hardware_concurrency());

  try {
    {
      const auto t0 = Clock::now();
      CheckResult r{true, 0, ""};
      for (std::uint64_t seed : {1, 2, 3})
        r = all_of({r, test::check_rasterizer_gradients(seed), test::check_hash_grid_gradients(seed),
                    test::check_decoder_gradients(seed), test::check_downsampler_gradients(seed),
                    test::check_appearance_gradients(seed)});
      const double secs = seconds_since(t0);
      report.line(1, r.pass && r.value < 1e-4 && secs < 120,
                  "gradient suite worst relative error " + fmt(r.value) + " (< 1e-4), " + fmt(secs) + " s (< 120 s)" +
                      (r.pass ? "" : " [" + r.detail + "]"));
    }
    {
      const auto r = test::check_compositing_oracle(20, 11);
      report.line(2, r.pass && r.value < 1e-10,
                  "compositing oracle worst difference " + fmt(r.value) + " over 20 scenes (< 1e-10)" +
                      (r.pass ? "" : " [" + r.detail + "]"));
    }
    {
      const auto pool = test::check_uniform_weights_average_pool(21);
      const auto shift = test::check_softmax_shift_invariance(22);
      const auto hull = test::check_convex_hull(1000, 23);
      report.line(3, pool.pass && shift.pass && hull.pass,
                  "uniform = average pool " + fmt(pool.value) + " (< 1e-12), shift invariance " +
                      (shift.pass ? "exact" : shift.detail) + ", convex hull " + (hull.pass ? "1000/1000" : hull.detail));
    }
    {
      const auto r = test::check_sam_identities(31);
      report.line(4, r.pass, "SAM loss: constant 0, {1,1,3,3} -> 1.0, shift invariance " + fmt(r.value) + " (< 1e-12)" +
                                 (r.pass ? "" : " [" + r.detail + "]"));
    }
    {
      const auto o = test::check_pixel_size_oracle(100, 41);
      const auto l = test::check_pixel_size_linearity(42);
      report.line(5, o.pass && l.pass,
                  "pixel size vs extended precision " + fmt(o.value) + " over 100 fixtures (< 1e-9), linearity " +
                      (l.pass ? "exact" : l.detail));
    }

    // Criteria 6-10 share one synthetic fixture and its trained model.
    const fs::path dir = fs::absolute(work);
    fs::create_directories(dir);
    std::printf("  preparing synthetic fixture in %s\n", dir.string().c_str());
    const Workspace ws = prepare_synthetic(dir / "ws", test::synthetic_fixture());

    const TrainConfig config = TrainConfig::desk();
    TrainConfig no_dino = config;
    no_dino.weights.dino = 0;
    const Trained full = train_or_load(ws, config, dir, reuse, "desk");
    const Trained ablated = train_or_load(ws, no_dino, dir, reuse, "desk_no_dino");

    const APTable val = eval_split(ws, full.state, "val");
    const APTable train = eval_split(ws, full.state, "train");
    const APTable val_ablated = eval_split(ws, ablated.state, "val");
    {
      double worst = 1;
      for (const auto& [name, ap] : val.ap) worst = std::min(worst, ap);
      const double drop = val.mean_ap - val_ablated.mean_ap;
      const double minutes = full.seconds / 60;
      report.line(6, worst >= 0.8 && drop >= 0.10 && minutes < 30,
                  "held-out " + ap_summary(val) + " (each >= 0.8); without DINO " + ap_summary(val_ablated) +
                      ", drop " + fmt(drop) + " (>= 0.10); training " + fmt(minutes) + " min (< 30)");
    }
    {
      const double gap = std::abs(val.mean_ap - train.mean_ap);
      report.line(7, gap <= 0.05,
                  "training mAP " + fmt(train.mean_ap) + ", held-out mAP " + fmt(val.mean_ap) + ", gap " + fmt(gap) +
                      " (<= 0.05)");
    }
    {
      // Two identical runs through a densification event, then the tiled-parallel renderer.
      TrainConfig short_run = config;
      short_run.iterations = 150;
      short_run.densify_from = 50;
      short_run.densify_interval = 50;
      short_run.densify_until = 120;
      short_run.threads = 1;
      TrainState a = fresh_state(ws, short_run), b = fresh_state(ws, short_run);
      std::ostringstream la, lb;
      TrainRunOptions oa, ob;
      oa.log = &la;
      ob.log = &lb;
      const auto views = ws.training_views();
      run_training(a, views, short_run, oa);
      run_training(b, views, short_run, ob);
      const double diff = log_difference(la.str(), lb.str());
      const auto par = test::check_parallel_bitwise(51, threads);
      report.line(8, diff <= 1e-12 && par.pass,
                  "two " + std::to_string(short_run.iterations) + "-iteration runs, worst log difference " + fmt(diff) +
                      " (<= 1e-12); " + std::to_string(threads) + "-thread tiles " +
                      (par.pass ? "bitwise identical" : "differ: " + par.detail));
    }

    const SceneBundle bundle = make_bundle(ws, full.state);
    const fs::path bundle_path = dir / "scene.l3xb";
    export_bundle(bundle, bundle_path);
    const SceneBundle loaded = load_bundle(bundle_path);
    {
      const std::string bytes = read_text_file(bundle_path);
      // Walk the chunk list for FEAT.
      std::istringstream in(bytes);
      in.seekg(8);
      const auto mlen = read_le<std::uint32_t>(in);
      in.seekg(12 + std::streamoff(mlen));
      std::uint64_t feat = 0;
      char tag[4];
      while (in.read(tag, 4)) {
        const auto len = read_le<std::uint64_t>(in);
        if (std::string(tag, 4) == "FEAT") feat = len;
        in.seekg(std::streamoff(len), std::ios::cur);
      }
      const std::uint64_t expect = std::uint64_t(full.state.gaussians.size()) * 3 * 4;

      QueryEngine e0(bundle.gaussians, bundle.encoder, bundle.negatives);
      QueryEngine e1(loaded.gaussians, loaded.encoder, loaded.negatives);
      double worst = 0;
      for (int id : ws.val_ids)
        for (const auto& name : bundle.prompts.names()) {
          const auto r0 = e0.query(bundle.camera(id), bundle.prompts.find(name));
          const auto r1 = e1.query(loaded.camera(id), loaded.prompts.find(name));
          worst = std::max(worst, double((r0.scores.data - r1.scores.data).cwiseAbs().maxCoeff()));
        }
      report.line(9, feat == expect && worst < 1e-6,
                  "FEAT " + std::to_string(feat) + " bytes for " + std::to_string(full.state.gaussians.size()) +
                      " Gaussians (expected " + std::to_string(expect) + "), round-trip query deviation " + fmt(worst) +
                      " (< 1e-6)");
    }
    {
      QueryEngine engine(loaded.gaussians, loaded.encoder, loaded.negatives);
      const Camera cam = loaded.camera(ws.val_ids.front()).resized(256, 256);
      const auto& prompt = loaded.prompts.find(loaded.prompts.names().front());
      engine.query(cam, prompt);  // warm-up
      std::vector<double> times;
      for (int k = 0; k < 5; ++k) {
        const auto t0 = Clock::now();
        engine.query(cam, prompt);
        times.push_back(seconds_since(t0));
      }
      std::sort(times.begin(), times.end());
      report.line(10, times[2] < 0.5,
                  "256x256 query median " + fmt(times[2]) + " s over 5 runs, one thread (< 0.5 s)");
    }

    if (!golden_out.empty()) write_golden(golden_out, ws, full.state, bundle);
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }

  std::printf("%s: %d criteria failed\n", report.failed ? "FAIL" : "PASS", report.failed);
  return report.failed ? 1 : 0;
}
