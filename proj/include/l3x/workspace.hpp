#pragma once

#include "l3x/bundle.hpp"
#include "l3x/query.hpp"
#include "l3x/scene.hpp"
#include "l3x/trainer.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace l3x {

// On-disk layout produced by `prepare`:
//   workspace.json            metadata (splits, scales, classes, negatives)
//   sparse/                   COLMAP text model
//   images/<name>             training and validation photos
//   masks/<id>/building.png   building mask; masks/<id>/object_<k>.png object masks
//   gt/<id>/<prompt>.png      evaluation masks
//   features/                 CLIP pyramids, DINO maps and text embeddings (FileProvider layout)
//   prompts.txt               one prompt per line, synonyms separated by commas
struct Workspace {
  std::filesystem::path root;
  std::string kind;
  int feature_dim = 3;
  int clip_dim = 512;
  int dino_dim = 384;
  std::vector<double> scales_m;
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<std::string> classes;
  std::vector<std::string> negatives;
  std::vector<std::string> warnings;
  Scene scene;  // pixel sizes filled in

  static Workspace open(const std::filesystem::path& root);

  std::filesystem::path image_path(int id) const;
  std::filesystem::path mask_dir(int id) const { return root / "masks" / std::to_string(id); }
  std::filesystem::path gt_dir(int id) const { return root / "gt" / std::to_string(id); }
  std::filesystem::path features_dir() const { return root / "features"; }

  EncoderConfig encoder_config() const;
  Mask building_mask(int id) const;  // empty when the view has none
  std::vector<TrainingView> training_views() const;
  // split: "train", "val" or "all".
  std::vector<EvalView> eval_views(const std::string& split) const;
  std::vector<int> split_ids(const std::string& split) const;
  PromptDictionary prompts() const;
  MatX<float> negative_embeddings() const;
};

struct SyntheticPrepareOptions {
  SyntheticSpec spec;
  int scale_count = 3;
  std::vector<double> scales_m;  // explicit scales override scale_count
};

// Renders the labeled scene, derives masks and oracle features, writes a complete workspace.
Workspace prepare_synthetic(const std::filesystem::path& root, const SyntheticPrepareOptions& options);

struct ColmapPrepareOptions {
  std::filesystem::path colmap_dir;    // cameras.txt, images.txt, points3D.txt
  std::filesystem::path images_dir;
  std::filesystem::path features_dir;  // FileProvider layout with precomputed crops
  std::filesystem::path masks_dir;     // optional, same per-image layout as the workspace
  std::filesystem::path gt_dir;        // optional
  std::filesystem::path prompts_file;  // optional
  std::vector<std::string> negatives = {"object", "things", "stuff", "texture"};
  std::vector<double> scales_m;
  int scale_count = 4;
  std::vector<int> val_ids;
};

Workspace prepare_colmap(const std::filesystem::path& root, const ColmapPrepareOptions& options);

// Default physical scales: the smallest keeps an 8+ px window in the farthest view, the largest
// stays well inside the closest view.
std::vector<double> default_scales(const Scene& scene, double smallest_structure_m, int count);

TrainState fresh_state(const Workspace& ws, const TrainConfig& config);

struct TrainRunOptions {
  std::ostream* log = nullptr;       // JSONL records
  std::ostream* progress = nullptr;  // human-readable status lines
  int progress_every = 100;
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;  // empty disables intermediate checkpoints
};

// Runs from state.step up to config.iterations.
void run_training(TrainState& state, const std::vector<TrainingView>& views, const TrainConfig& config,
                  const TrainRunOptions& options = {});

SceneBundle make_bundle(const Workspace& ws, const TrainState& state);

APTable evaluate_split(const Workspace& ws, const GaussianModel<float>& gaussians, const SemanticEncoder<float>& encoder,
                       const std::string& split, const QueryOptions& options = {});

}  // namespace l3x
