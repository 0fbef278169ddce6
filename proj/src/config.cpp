#include "l3x/config.hpp"

#include "l3x/binary_io.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

namespace l3x {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw UsageError("config key '" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "' expects true or false, got '" + v + "'");
}

ConfigKey int_key(std::string name, std::string help, int TrainConfig::*field) {
  return {name, std::move(help),
          [name, field](RunSettings& s, const std::string& v) { s.train.*field = parse_int(name, v); },
          [field](const RunSettings& s) { return std::to_string(s.train.*field); }};
}

ConfigKey double_key(std::string name, std::string help, double TrainConfig::*field) {
  return {name, std::move(help),
          [name, field](RunSettings& s, const std::string& v) { s.train.*field = parse_double(name, v); },
          [field](const RunSettings& s) { return format_double(s.train.*field); }};
}

ConfigKey weight_key(std::string name, std::string help, double LossWeights::*field) {
  return {name, std::move(help),
          [name, field](RunSettings& s, const std::string& v) { s.train.weights.*field = parse_double(name, v); },
          [field](const RunSettings& s) { return format_double(s.train.weights.*field); }};
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, n, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(source, n, "missing key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    kv.values[key] = value;
    kv.lines[key] = n;
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_text_file(path), path.string());
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    k.push_back({"preset", "starting point: desk or paper",
                 [](RunSettings& s, const std::string& v) { s = settings_for_preset(v); },
                 [](const RunSettings& s) { return s.preset; }});
    k.push_back(int_key("iterations", "training iterations", &TrainConfig::iterations));
    k.push_back({"seed", "seed for view order, render sizes and splits",
                 [](RunSettings& s, const std::string& v) { s.train.seed = parse_u64("seed", v); },
                 [](const RunSettings& s) { return std::to_string(s.train.seed); }});
    k.push_back(double_key("lr_position_init", "position learning rate at step 0 (times scene extent)", &TrainConfig::lr_position_init));
    k.push_back(double_key("lr_position_final", "position learning rate at the last step", &TrainConfig::lr_position_final));
    k.push_back(double_key("lr_color", "base color learning rate", &TrainConfig::lr_color));
    k.push_back(double_key("lr_opacity", "opacity learning rate", &TrainConfig::lr_opacity));
    k.push_back(double_key("lr_scale", "log-scale learning rate", &TrainConfig::lr_scale));
    k.push_back(double_key("lr_rotation", "rotation learning rate", &TrainConfig::lr_rotation));
    k.push_back(double_key("lr_feature", "bottleneck feature learning rate", &TrainConfig::lr_feature));
    k.push_back(double_key("lr_encoder", "hash table and decoder learning rate", &TrainConfig::lr_encoder));
    k.push_back(double_key("lr_downsampler", "downsampler learning rate", &TrainConfig::lr_downsampler));
    k.push_back(double_key("lr_appearance_net", "appearance network learning rate", &TrainConfig::lr_appearance_net));
    k.push_back(double_key("lr_appearance_embedding", "appearance embedding learning rate", &TrainConfig::lr_appearance_embedding));
    k.push_back(double_key("mlp_weight_decay", "L2 weight decay on the decoder", &TrainConfig::mlp_weight_decay));
    k.push_back(int_key("densify_from", "first iteration eligible for densification", &TrainConfig::densify_from));
    k.push_back(int_key("densify_interval", "iterations between densification passes", &TrainConfig::densify_interval));
    k.push_back(int_key("densify_until", "densification stops at this iteration", &TrainConfig::densify_until));
    k.push_back(double_key("densify_grad_threshold", "view-space gradient threshold", &TrainConfig::densify_grad_threshold));
    k.push_back(double_key("percent_dense", "clone/split boundary as a fraction of scene extent", &TrainConfig::percent_dense));
    k.push_back(double_key("prune_opacity", "Gaussians below this opacity are removed", &TrainConfig::prune_opacity));
    k.push_back(int_key("opacity_reset_interval", "iterations between opacity resets (0 = never)", &TrainConfig::opacity_reset_interval));
    k.push_back(int_key("max_gaussians", "cap on the Gaussian count (0 = none)", &TrainConfig::max_gaussians));
    k.push_back(int_key("feat_size_min", "smallest feature render size", &TrainConfig::feat_size_min));
    k.push_back(int_key("feat_size_max", "largest feature render size", &TrainConfig::feat_size_max));
    k.push_back(weight_key("lambda_clip", "CLIP loss weight", &LossWeights::clip));
    k.push_back(weight_key("lambda_dino", "DINO loss weight", &LossWeights::dino));
    k.push_back(weight_key("lambda_sam", "SAM variance loss weight", &LossWeights::sam));
    k.push_back(weight_key("lambda_dssim", "D-SSIM share of the photometric loss", &LossWeights::dssim));
    k.push_back({"appearance", "enable per-image appearance adaptation",
                 [](RunSettings& s, const std::string& v) { s.train.appearance = parse_bool("appearance", v); },
                 [](const RunSettings& s) { return std::string(s.train.appearance ? "true" : "false"); }});
    k.push_back({"downsample", "attenuated or bilinear",
                 [](RunSettings& s, const std::string& v) {
                   if (v == "attenuated") s.train.downsample = DownsampleMode::Attenuated;
                   else if (v == "bilinear") s.train.downsample = DownsampleMode::Bilinear;
                   else throw UsageError("config key 'downsample' expects attenuated or bilinear, got '" + v + "'");
                 },
                 [](const RunSettings& s) {
                   return std::string(s.train.downsample == DownsampleMode::Attenuated ? "attenuated" : "bilinear");
                 }});
    k.push_back(int_key("threads", "rasterizer worker threads", &TrainConfig::threads));
    k.push_back({"checkpoint_every", "iterations between checkpoints (0 = only at the end)",
                 [](RunSettings& s, const std::string& v) { s.checkpoint_every = parse_int("checkpoint_every", v); },
                 [](const RunSettings& s) { return std::to_string(s.checkpoint_every); }});
    return k;
  }();
  return keys;
}

RunSettings settings_for_preset(const std::string& preset) {
  RunSettings s;
  s.preset = preset;
  if (preset == "desk") {
    s.train = TrainConfig::desk();
  } else if (preset == "paper") {
    s.train = TrainConfig();
    s.checkpoint_every = 5000;
  } else {
    throw UsageError("unknown preset '" + preset + "' (expected desk or paper)");
  }
  return s;
}

void apply_key_values(RunSettings& s, const KeyValues& kv) {
  const auto& keys = config_keys();
  auto find = [&](const std::string& name) -> const ConfigKey* {
    for (const auto& k : keys)
      if (k.name == name) return &k;
    return nullptr;
  };
  if (auto it = kv.values.find("preset"); it != kv.values.end()) find("preset")->set(s, it->second);
  for (const auto& [name, value] : kv.values) {
    if (name == "preset") continue;
    const ConfigKey* k = find(name);
    const int line = kv.lines.count(name) ? kv.lines.at(name) : 0;
    if (!k) throw UsageError("unknown config key '" + name + "'" + (line ? " (line " + std::to_string(line) + ")" : ""));
    k->set(s, value);
  }
}

std::string dump_settings(const RunSettings& s) {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k.name << " = " << k.get(s) << "\n";
  return os.str();
}

}  // namespace l3x
