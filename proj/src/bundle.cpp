#include "l3x/bundle.hpp"

#include "detail/json_config.hpp"
#include "l3x/binary_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace l3x {

namespace {

constexpr char kMagic[4] = {'L', '3', 'X', 'B'};

void write_chunk(std::ostream& os, const char tag[4], const std::string& payload) {
  os.write(tag, 4);
  write_le<std::uint64_t>(os, payload.size());
  os.write(payload.data(), std::streamsize(payload.size()));
}

std::uint64_t expect(const std::map<std::string, std::string>& chunks, const std::string& tag, std::uint64_t bytes) {
  auto it = chunks.find(tag);
  if (it == chunks.end()) throw IntegrityError("bundle is missing the " + tag + " chunk");
  if (it->second.size() != bytes)
    throw IntegrityError(tag + " chunk has " + std::to_string(it->second.size()) + " bytes, manifest implies " +
                         std::to_string(bytes));
  return bytes;
}

}  // namespace

const Camera& SceneBundle::camera(int id) const {
  for (const auto& c : cameras)
    if (c.id == id) return c;
  throw Error("bundle has no camera " + std::to_string(id));
}

void export_bundle(const SceneBundle& b, const std::filesystem::path& path) {
  const auto& G = b.gaussians;
  const EncoderConfig& enc = b.encoder.config();
  const Index N = G.size();
  const int d = G.feature_dim();
  if (d != enc.grid.bottleneck_dim)
    throw IntegrityError("refusing to export: Gaussians carry " + std::to_string(d) + " feature values, encoder expects " +
                         std::to_string(enc.grid.bottleneck_dim));
  if (b.encoder.grid().table().rows() != enc.grid.features_per_entry ||
      b.encoder.grid().table().cols() != Index(enc.grid.levels) * enc.grid.table_size())
    throw IntegrityError("refusing to export: hash table shape does not match the encoder configuration");
  if (b.negatives.rows() != enc.clip_dim || b.negatives.cols() == 0)
    throw IntegrityError("refusing to export: negatives must be non-empty clip_dim vectors");
  for (const auto& p : b.prompts.prompts()) p.validate(enc.clip_dim);

  // GAUS: mean, log-scale, rotation, opacity logit, rgb. Raw parameters keep the round trip exact.
  std::ostringstream gaus;
  {
    MatX<float> rec(kGaussianRecordFloats, N);
    for (Index i = 0; i < N; ++i) {
      rec.col(i).segment<3>(0) = G.means.col(i);
      rec.col(i).segment<3>(3) = G.log_scales.col(i);
      rec.col(i).segment<4>(6) = G.rotations.col(i);
      rec(10, i) = G.opacity_logits(i);
      rec.col(i).segment<3>(11) = G.colors.col(i);
    }
    write_f32(gaus, rec);
  }
  std::ostringstream feat, hash, mlpw, prmt, negs, cams;
  write_f32(feat, G.features);
  write_f32(hash, b.encoder.grid().table());
  const auto& layers = b.encoder.mlp().layers();
  nlohmann::json layer_meta = nlohmann::json::array();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    write_le<std::uint32_t>(mlpw, std::uint32_t(k));
    write_le<std::uint32_t>(mlpw, std::uint32_t(layers[k].out_dim()));
    write_le<std::uint32_t>(mlpw, std::uint32_t(layers[k].in_dim()));
    write_f32(mlpw, layers[k].weight.transpose());  // row-major
    write_f32(mlpw, layers[k].bias);
    layer_meta.push_back({{"out", layers[k].out_dim()}, {"in", layers[k].in_dim()}, {"relu_after", k == 2}});
  }
  nlohmann::json prompt_meta = nlohmann::json::array();
  write_le<std::uint32_t>(prmt, std::uint32_t(b.prompts.prompts().size()));
  for (const auto& p : b.prompts.prompts()) {
    write_string(prmt, p.name);
    write_le<std::uint32_t>(prmt, std::uint32_t(p.embeddings.cols()));
    write_f32(prmt, p.embeddings);
    prompt_meta.push_back({{"name", p.name}, {"synonyms", p.synonyms}});
  }
  write_f32(negs, b.negatives);
  write_le<std::uint32_t>(cams, std::uint32_t(b.cameras.size()));
  nlohmann::json cam_meta = nlohmann::json::array();
  for (const auto& c : b.cameras) {
    write_le<std::int32_t>(cams, c.id);
    // float64 so reloaded cameras project exactly as before export
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) write_le<double>(cams, c.R(r, k));
    for (int k = 0; k < 3; ++k) write_le<double>(cams, c.t(k));
    for (double v : {c.fx, c.fy, c.cx, c.cy}) write_le<double>(cams, v);
    write_le<std::uint32_t>(cams, std::uint32_t(c.width));
    write_le<std::uint32_t>(cams, std::uint32_t(c.height));
    cam_meta.push_back({{"id", c.id}, {"name", c.name}});
  }

  nlohmann::json manifest = {{"format", "L3XB"},
                             {"version", kBundleVersion},
                             {"gaussians", N},
                             {"feature_dim", d},
                             {"encoder", detail::encoder_to_json(enc)},
                             {"mlp_layers", layer_meta},
                             {"cameras", cam_meta},
                             {"prompts", prompt_meta},
                             {"negatives", b.negative_names},
                             {"gaussian_record", {"mean3", "log_scale3", "rotation_wxyz4", "opacity_logit1", "rgb3"}}};
  manifest["chunks"] = {{"GAUS", gaus.str().size()}, {"FEAT", feat.str().size()}, {"HASH", hash.str().size()},
                        {"MLPW", mlpw.str().size()}, {"PRMT", prmt.str().size()}, {"NEGS", negs.str().size()},
                        {"CAMS", cams.str().size()}};
  const std::string ms = manifest.dump();
  std::ostringstream os;
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kBundleVersion);
  write_le<std::uint32_t>(os, std::uint32_t(ms.size()));
  os.write(ms.data(), std::streamsize(ms.size()));
  write_chunk(os, "GAUS", gaus.str());
  write_chunk(os, "FEAT", feat.str());
  write_chunk(os, "HASH", hash.str());
  write_chunk(os, "MLPW", mlpw.str());
  write_chunk(os, "PRMT", prmt.str());
  write_chunk(os, "NEGS", negs.str());
  write_chunk(os, "CAMS", cams.str());
  write_file_atomic(path, os.str());
}

SceneBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open bundle " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "L3XB") throw IntegrityError(path.string() + ": bad magic");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kBundleVersion) throw IntegrityError("unsupported bundle version " + std::to_string(version));
  const auto mlen = read_le<std::uint32_t>(in);
  std::string ms(mlen, '\0');
  if (!in.read(ms.data(), mlen)) throw IntegrityError("truncated bundle manifest");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad bundle manifest: ") + e.what());
  }

  std::map<std::string, std::string> chunks;
  const auto file_size = std::filesystem::file_size(path);
  while (in.peek() != std::char_traits<char>::eof()) {
    char tag[4];
    if (!in.read(tag, 4)) throw IntegrityError("truncated chunk tag");
    const auto len = read_le<std::uint64_t>(in);
    const auto pos = std::uint64_t(in.tellg());
    if (len > file_size - pos) throw IntegrityError("chunk " + std::string(tag, 4) + " runs past the end of the file");
    std::string payload(len, '\0');
    if (!in.read(payload.data(), std::streamsize(len))) throw IntegrityError("truncated chunk payload");
    chunks[std::string(tag, 4)] = std::move(payload);
  }

  SceneBundle b;
  try {
    const Index N = m.at("gaussians");
    const int d = m.at("feature_dim");
    const EncoderConfig enc = detail::encoder_from_json(m.at("encoder"));
    if (d != enc.grid.bottleneck_dim) throw IntegrityError("manifest feature_dim does not match the encoder");
    for (const auto& [tag, bytes] : m.at("chunks").items()) expect(chunks, tag, bytes.get<std::uint64_t>());

    expect(chunks, "GAUS", std::uint64_t(N) * kGaussianRecordFloats * 4);
    expect(chunks, "FEAT", std::uint64_t(N) * d * 4);
    expect(chunks, "HASH", std::uint64_t(enc.grid.levels) * enc.grid.table_size() * enc.grid.features_per_entry * 4);

    std::istringstream gs(chunks["GAUS"]);
    const MatX<float> rec = read_f32<float>(gs, kGaussianRecordFloats, N);
    b.gaussians.resize(d, N);
    for (Index i = 0; i < N; ++i) {
      b.gaussians.means.col(i) = rec.col(i).segment<3>(0);
      b.gaussians.log_scales.col(i) = rec.col(i).segment<3>(3);
      b.gaussians.rotations.col(i) = rec.col(i).segment<4>(6);
      b.gaussians.opacity_logits(i) = rec(10, i);
      b.gaussians.colors.col(i) = rec.col(i).segment<3>(11);
    }
    std::istringstream fs(chunks["FEAT"]);
    b.gaussians.features = read_f32<float>(fs, d, N);

    b.encoder = SemanticEncoder<float>(enc);
    std::istringstream hs(chunks["HASH"]);
    b.encoder.grid().table() = read_f32<float>(hs, enc.grid.features_per_entry, Index(enc.grid.levels) * enc.grid.table_size());

    auto& layers = b.encoder.mlp().layers();
    std::uint64_t mlp_bytes = 0;
    for (const auto& l : layers) mlp_bytes += 12 + 4 * std::uint64_t(l.out_dim()) * (l.in_dim() + 1);
    expect(chunks, "MLPW", mlp_bytes);
    std::istringstream ws(chunks["MLPW"]);
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto idx = read_le<std::uint32_t>(ws), out = read_le<std::uint32_t>(ws), inp = read_le<std::uint32_t>(ws);
      if (idx != k || out != layers[k].out_dim() || inp != layers[k].in_dim())
        throw IntegrityError("MLPW layer " + std::to_string(k) + " header does not match the encoder");
      layers[k].weight = read_f32<float>(ws, inp, out).transpose();
      layers[k].bias = read_f32<float>(ws, out, 1);
    }

    const int clip = enc.clip_dim;
    std::istringstream ps(chunks.at("PRMT"));
    const auto n_prompts = read_le<std::uint32_t>(ps);
    const auto& pm = m.at("prompts");
    if (pm.size() != n_prompts) throw IntegrityError("PRMT prompt count does not match the manifest");
    for (std::uint32_t i = 0; i < n_prompts; ++i) {
      PromptEmbedding p;
      p.name = read_string(ps);
      const auto k = read_le<std::uint32_t>(ps);
      p.embeddings = read_f32<float>(ps, clip, k);
      p.synonyms = pm[i].at("synonyms").get<std::vector<std::string>>();
      if (pm[i].at("name") != p.name || p.synonyms.size() != k)
        throw IntegrityError("PRMT entry " + p.name + " does not match the manifest");
      b.prompts.add(std::move(p));
    }
    if (ps.peek() != std::char_traits<char>::eof()) throw IntegrityError("trailing bytes in PRMT");

    b.negative_names = m.at("negatives").get<std::vector<std::string>>();
    const Index n_neg = Index(b.negative_names.size());
    expect(chunks, "NEGS", std::uint64_t(n_neg) * clip * 4);
    std::istringstream ns(chunks["NEGS"]);
    b.negatives = read_f32<float>(ns, clip, n_neg);

    const auto& cm = m.at("cameras");
    expect(chunks, "CAMS", 4 + cm.size() * (4 + 16 * 8 + 8));
    std::istringstream cs(chunks["CAMS"]);
    if (read_le<std::uint32_t>(cs) != cm.size()) throw IntegrityError("CAMS count does not match the manifest");
    for (const auto& cj : cm) {
      Camera c;
      c.id = read_le<std::int32_t>(cs);
      if (c.id != cj.at("id").get<int>()) throw IntegrityError("CAMS camera id does not match the manifest");
      c.name = cj.at("name");
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) c.R(r, k) = read_le<double>(cs);
      for (int k = 0; k < 3; ++k) c.t(k) = read_le<double>(cs);
      c.fx = read_le<double>(cs);
      c.fy = read_le<double>(cs);
      c.cx = read_le<double>(cs);
      c.cy = read_le<double>(cs);
      c.width = int(read_le<std::uint32_t>(cs));
      c.height = int(read_le<std::uint32_t>(cs));
      const Eigen::Quaterniond q(c.R);
      c.qvec = Vec4<double>(q.w(), q.x(), q.y(), q.z());
      b.cameras.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("bad bundle manifest: ") + e.what());
  }
  return b;
}

}  // namespace l3x
