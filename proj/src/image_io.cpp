#include "l3x/image_io.hpp"

#include "l3x/binary_io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace l3x {

namespace {

struct PngPixels {
  int height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> bytes;
};

PngPixels load_png(const std::filesystem::path& path, bool gray) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error("cannot read PNG " + path.string() + ": " + image.message);
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  PngPixels px;
  px.height = int(image.height);
  px.width = int(image.width);
  px.channels = gray ? 1 : 3;
  px.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return px;
}

void save_png(const std::filesystem::path& path, int height, int width, int channels,
              const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(width);
  image.height = png_uint_32(height);
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw Error("cannot write PNG " + path.string() + ": " + image.message);
}

std::uint8_t to_byte(float v) {
  if (!(v > 0)) return 0;
  if (v >= 1) return 255;
  return std::uint8_t(std::lround(v * 255.0f));
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".json";
  return p;
}

}  // namespace

FeatureMap<float> read_png_rgb(const std::filesystem::path& path) {
  auto px = load_png(path, false);
  FeatureMap<float> out(3, px.height, px.width);
  for (Index p = 0; p < out.pixels(); ++p)
    for (int c = 0; c < 3; ++c) out.data(c, p) = px.bytes[std::size_t(p) * 3 + c] / 255.0f;
  return out;
}

void write_png(const FeatureMap<float>& image, const std::filesystem::path& path) {
  const int C = image.channels();
  if (C != 1 && C != 3) throw Error("write_png: expected 1 or 3 channels, got " + std::to_string(C));
  std::vector<std::uint8_t> bytes(std::size_t(image.pixels()) * C);
  for (Index p = 0; p < image.pixels(); ++p)
    for (int c = 0; c < C; ++c) bytes[std::size_t(p) * C + c] = to_byte(image.data(c, p));
  save_png(path, image.height, image.width, C, bytes);
}

Mask read_mask_png(const std::filesystem::path& path) {
  auto px = load_png(path, true);
  Mask m(px.height, px.width);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = px.bytes[i] != 0 ? 1 : 0;
  return m;
}

void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(mask.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  save_png(path, mask.height, mask.width, 1, bytes);
}

void write_raw_map(const FeatureMap<float>& map, const std::filesystem::path& path) {
  std::ostringstream os;
  write_f32(os, map.data);  // column-major of C x HW is HWC interleaved
  write_file_atomic(path, os.str());
  nlohmann::json meta = {{"height", map.height},     {"width", map.width},  {"channels", map.channels()},
                         {"dtype", "float32"},       {"byte_order", "little"}, {"layout", "HWC"}};
  write_file_atomic(sidecar(path), meta.dump(2) + "\n");
}

FeatureMap<float> read_raw_map(const std::filesystem::path& path) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(sidecar(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad raw map sidecar for " + path.string() + ": " + e.what());
  }
  const int H = meta.at("height"), W = meta.at("width"), C = meta.at("channels");
  const auto expected = std::uintmax_t(H) * W * C * 4;
  if (std::filesystem::file_size(path) != expected)
    throw IntegrityError("raw map " + path.string() + " has " + std::to_string(std::filesystem::file_size(path)) +
                         " bytes, sidecar implies " + std::to_string(expected));
  std::ifstream in(path, std::ios::binary);
  FeatureMap<float> map;
  map.height = H;
  map.width = W;
  map.data = read_f32<float>(in, C, Index(H) * W);
  return map;
}

std::array<std::uint8_t, 3> viridis(double t) {
  static const double stops[9][3] = {{68, 1, 84},    {71, 44, 122},  {59, 82, 139},  {44, 113, 142}, {33, 145, 140},
                                     {39, 173, 129}, {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};
  if (!(t >= 0)) t = 0;
  if (t > 1) t = 1;
  const double s = t * 8;
  const int i = std::min(int(s), 7);
  const double f = s - i;
  std::array<std::uint8_t, 3> rgb{};
  for (int c = 0; c < 3; ++c) rgb[c] = std::uint8_t(std::lround(stops[i][c] * (1 - f) + stops[i + 1][c] * f));
  return rgb;
}

void write_heatmap_png(const FeatureMap<float>& scores, const std::filesystem::path& path) {
  if (scores.channels() != 1) throw Error("write_heatmap_png: expected a single-channel map");
  std::vector<std::uint8_t> bytes(std::size_t(scores.pixels()) * 3);
  for (Index p = 0; p < scores.pixels(); ++p) {
    auto rgb = viridis(scores.data(0, p));
    std::copy(rgb.begin(), rgb.end(), bytes.begin() + p * 3);
  }
  save_png(path, scores.height, scores.width, 3, bytes);
}

}  // namespace l3x
