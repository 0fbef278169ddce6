#include "l3x/checkpoint.hpp"

#include "detail/json_config.hpp"
#include "l3x/binary_io.hpp"

#include <fstream>
#include <sstream>

namespace l3x {

namespace {
constexpr char kMagic[4] = {'L', '3', 'X', 'C'};
}

void save_checkpoint(const TrainState& state_in, const std::filesystem::path& path) {
  auto& state = const_cast<TrainState&>(state_in);  // refs are only read
  const auto params = parameter_refs(state);
  nlohmann::json header = {{"step", state.step},
                           {"scene_extent", state.scene_extent},
                           {"gaussians", state.gaussians.size()},
                           {"feature_dim", state.gaussians.feature_dim()},
                           {"encoder", detail::encoder_to_json(state.encoder.config())},
                           {"appearance", detail::appearance_to_json(state.appearance.config())},
                           {"appearance_images", state.appearance.images()},
                           {"downsampler_hidden", state.downsampler.layers()[0].out_channels()}};
  header["tensors"] = nlohmann::json::array();
  for (const auto& p : params) {
    auto it = state.moments.find(p.name);
    const bool has = it != state.moments.end() && it->second.m.size() == p.rows * p.cols;
    header["tensors"].push_back(
        {{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"moments", has}, {"adam_step", has ? it->second.step : 0}});
  }
  const std::string hs = header.dump();
  std::ostringstream os;
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_le<std::uint32_t>(os, std::uint32_t(hs.size()));
  os.write(hs.data(), std::streamsize(hs.size()));
  for (const auto& p : params) {
    write_f32(os, p.map());
    auto it = state.moments.find(p.name);
    if (it != state.moments.end() && it->second.m.size() == p.rows * p.cols) {
      write_f32(os, it->second.m);
      write_f32(os, it->second.v);
    }
  }
  write_f32(os, state.grad_accum);
  write_f32(os, state.grad_count);
  write_file_atomic(path, os.str());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4))
    throw IntegrityError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = read_le<std::uint32_t>(in);
  std::string hs(hlen, '\0');
  if (!in.read(hs.data(), hlen)) throw IntegrityError("truncated checkpoint header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad checkpoint header: ") + e.what());
  }

  TrainState s;
  s.step = h.at("step");
  s.scene_extent = h.at("scene_extent");
  const EncoderConfig enc = detail::encoder_from_json(h.at("encoder"));
  s.gaussians.resize(h.at("feature_dim"), h.at("gaussians").get<Index>());
  s.encoder = SemanticEncoder<float>(enc);
  s.downsampler = AttenuatedDownsampler<float>(enc.clip_dim, h.at("downsampler_hidden"));
  s.appearance = AppearanceModel<float>(detail::appearance_from_json(h.at("appearance")), h.at("appearance_images"));

  auto params = parameter_refs(s);
  const auto& tensors = h.at("tensors");
  if (tensors.size() != params.size()) throw IntegrityError("checkpoint tensor list does not match this build");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    auto& p = params[i];
    if (t.at("name") != p.name || t.at("rows").get<Index>() != p.rows || t.at("cols").get<Index>() != p.cols)
      throw IntegrityError("checkpoint tensor " + t.at("name").get<std::string>() + " has an unexpected shape");
    p.map() = read_f32<float>(in, p.rows, p.cols);
    if (t.at("moments").get<bool>()) {
      auto& mom = s.moments[p.name];
      mom.m = read_f32<float>(in, p.rows, p.cols);
      mom.v = read_f32<float>(in, p.rows, p.cols);
      mom.step = t.at("adam_step");
    }
  }
  const Index n = s.gaussians.size();
  s.grad_accum = read_f32<float>(in, n, 1);
  s.grad_count = read_f32<float>(in, n, 1);
  if (in.peek() != std::char_traits<char>::eof()) throw IntegrityError("trailing bytes in checkpoint");
  return s;
}

}  // namespace l3x
