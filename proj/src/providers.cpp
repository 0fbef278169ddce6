#include "l3x/providers.hpp"

#include "l3x/binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace l3x {

namespace {

VecX<float> unit(const VecX<double>& v, const char* what) {
  const double n = v.norm();
  if (!(n > 0) || !std::isfinite(n)) throw Error(std::string(what) + ": embedding has zero or non-finite norm");
  return (v / n).cast<float>();
}

}  // namespace

SyntheticOracle::SyntheticOracle(MatX<double> clip_classes, VecX<double> clip_background, MatX<double> dino_classes,
                                 VecX<double> dino_background, int dino_cell)
    : clip_classes_(std::move(clip_classes)), dino_classes_(std::move(dino_classes)), dino_cell_(dino_cell) {
  if (clip_classes_.cols() != dino_classes_.cols()) throw Error("oracle: CLIP and DINO class counts differ");
  if (clip_background.size() != clip_classes_.rows() || dino_background.size() != dino_classes_.rows())
    throw Error("oracle: background embedding dimension mismatch");
  if (dino_cell_ < 1) throw Error("oracle: DINO cell size must be positive");
  clip_table_.resize(clip_classes_.rows(), clip_classes_.cols() + 1);
  clip_table_ << clip_classes_, clip_background;
  dino_table_.resize(dino_classes_.rows(), dino_classes_.cols() + 1);
  dino_table_ << dino_classes_, dino_background;
}

void SyntheticOracle::set_coverage(int image_id, FeatureMap<float> coverage) {
  if (coverage.channels() != clip_table_.cols())
    throw Error("oracle: coverage map needs " + std::to_string(clip_table_.cols()) + " channels");
  coverage_[image_id] = std::move(coverage);
}

const FeatureMap<float>& SyntheticOracle::coverage(int image_id) const {
  auto it = coverage_.find(image_id);
  if (it == coverage_.end()) throw Error("oracle: no coverage registered for image " + std::to_string(image_id));
  return it->second;
}

void SyntheticOracle::add_text(const std::string& text, VecX<double> embedding) {
  if (embedding.size() != clip_table_.rows()) throw Error("oracle: text embedding dimension mismatch");
  text_[text] = std::move(embedding);
}

VecX<float> SyntheticOracle::clip_embed(const ImageView& image, const CropRect& crop) const {
  const auto& cov = coverage(image.image_id);
  const int y0 = std::max(0, crop.y), x0 = std::max(0, crop.x);
  const int y1 = std::min(cov.height, crop.y + crop.size), x1 = std::min(cov.width, crop.x + crop.size);
  if (y1 <= y0 || x1 <= x0) throw Error("oracle: crop lies outside the image");
  VecX<double> w = VecX<double>::Zero(cov.channels());
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) w += cov.data.col(cov.pixel(y, x)).cast<double>();
  return unit(clip_table_ * w, "oracle clip_embed");
}

FeatureMap<float> SyntheticOracle::dino_map(const ImageView& image) const {
  const auto& cov = coverage(image.image_id);
  const int hg = std::max(1, cov.height / dino_cell_), wg = std::max(1, cov.width / dino_cell_);
  FeatureMap<float> out(dino_dim(), hg, wg);
  for (int gy = 0; gy < hg; ++gy)
    for (int gx = 0; gx < wg; ++gx) {
      VecX<double> w = VecX<double>::Zero(cov.channels());
      for (int y = gy * cov.height / hg; y < (gy + 1) * cov.height / hg; ++y)
        for (int x = gx * cov.width / wg; x < (gx + 1) * cov.width / wg; ++x)
          w += cov.data.col(cov.pixel(y, x)).cast<double>();
      out.data.col(out.pixel(gy, gx)) = unit(dino_table_ * w, "oracle dino_map");
    }
  return out;
}

std::optional<VecX<float>> SyntheticOracle::text_embed(const std::string& text) const {
  auto it = text_.find(text);
  if (it == text_.end()) return std::nullopt;
  return unit(it->second, "oracle text_embed");
}

// ---------------------------------------------------------------------------------

FileProvider::FileProvider(const std::filesystem::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    clip_dim_ = m.at("clip_dim");
    dino_dim_ = m.at("dino_dim");
    for (const auto& g : m.value("clip_grids", nlohmann::json::array())) {
      ClipGridFile f;
      f.image_id = g.at("image_id");
      f.scale_m = g.at("scale_m");
      f.window_px = g.at("window_px");
      f.stride = g.at("stride");
      f.rows = g.at("rows");
      f.cols = g.at("cols");
      std::ifstream in(dir / g.at("file").get<std::string>(), std::ios::binary);
      if (!in) throw Error("cannot open " + (dir / g.at("file").get<std::string>()).string());
      f.embeddings = read_f32<float>(in, clip_dim_, Index(f.rows) * f.cols);
      grids_.push_back(std::move(f));
    }
    for (const auto& d : m.value("dino_maps", nlohmann::json::array())) {
      FeatureMap<float> map;
      map.height = d.at("height");
      map.width = d.at("width");
      std::ifstream in(dir / d.at("file").get<std::string>(), std::ios::binary);
      if (!in) throw Error("cannot open " + (dir / d.at("file").get<std::string>()).string());
      map.data = read_f32<float>(in, dino_dim_, map.pixels());
      dino_[d.at("image_id").get<int>()] = std::move(map);
    }
    if (m.contains("text")) {
      const auto& t = m["text"];
      const auto names = t.at("names").get<std::vector<std::string>>();
      std::ifstream in(dir / t.at("file").get<std::string>(), std::ios::binary);
      if (!in) throw Error("cannot open text embeddings in " + dir.string());
      MatX<float> e = read_f32<float>(in, clip_dim_, Index(names.size()));
      for (std::size_t i = 0; i < names.size(); ++i) text_[names[i]] = e.col(Index(i));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad feature manifest in " + dir.string() + ": " + e.what());
  }
}

VecX<float> FileProvider::clip_embed(const ImageView& image, const CropRect& crop) const {
  for (const auto& g : grids_) {
    if (g.image_id != image.image_id || g.window_px != crop.size) continue;
    if (crop.y % g.stride || crop.x % g.stride) continue;
    const int r = crop.y / g.stride, c = crop.x / g.stride;
    if (r < g.rows && c < g.cols) return g.embeddings.col(Index(r) * g.cols + c);
  }
  throw Error("no precomputed CLIP embedding for image " + std::to_string(image.image_id) + ", window " +
              std::to_string(crop.size) + " at (" + std::to_string(crop.x) + ", " + std::to_string(crop.y) + ")");
}

FeatureMap<float> FileProvider::dino_map(const ImageView& image) const {
  auto it = dino_.find(image.image_id);
  if (it == dino_.end()) throw Error("no precomputed DINO map for image " + std::to_string(image.image_id));
  return it->second;
}

std::optional<VecX<float>> FileProvider::text_embed(const std::string& text) const {
  auto it = text_.find(text);
  if (it == text_.end()) return std::nullopt;
  return it->second;
}

void write_feature_cache(const FeatureCache& cache, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m = {{"clip_dim", cache.clip_dim}, {"dino_dim", cache.dino_dim}};
  m["clip_grids"] = nlohmann::json::array();
  int k = 0;
  for (const auto& g : cache.grids) {
    if (g.embeddings.rows() != cache.clip_dim || g.embeddings.cols() != Index(g.rows) * g.cols)
      throw Error("feature cache: CLIP grid shape does not match its header");
    const std::string file = "clip_" + std::to_string(g.image_id) + "_" + std::to_string(k++) + ".f32";
    std::ostringstream os;
    write_f32(os, g.embeddings);
    write_file_atomic(dir / file, os.str());
    m["clip_grids"].push_back({{"image_id", g.image_id}, {"scale_m", g.scale_m}, {"window_px", g.window_px},
                               {"stride", g.stride},     {"rows", g.rows},       {"cols", g.cols},
                               {"file", file}});
  }
  m["dino_maps"] = nlohmann::json::array();
  for (const auto& [id, map] : cache.dino) {
    if (map.channels() != cache.dino_dim) throw Error("feature cache: DINO map channel mismatch");
    const std::string file = "dino_" + std::to_string(id) + ".f32";
    std::ostringstream os;
    write_f32(os, map.data);
    write_file_atomic(dir / file, os.str());
    m["dino_maps"].push_back({{"image_id", id}, {"height", map.height}, {"width", map.width}, {"file", file}});
  }
  if (!cache.text.empty()) {
    std::vector<std::string> names;
    MatX<float> e(cache.clip_dim, Index(cache.text.size()));
    for (const auto& [name, v] : cache.text) {
      e.col(Index(names.size())) = v;
      names.push_back(name);
    }
    std::ostringstream os;
    write_f32(os, e);
    write_file_atomic(dir / "text.f32", os.str());
    m["text"] = {{"file", "text.f32"}, {"names", names}};
  }
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace l3x
