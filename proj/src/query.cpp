#include "l3x/query.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace l3x {

void PromptEmbedding::validate(int clip_dim) const {
  if (name.empty()) throw Error("prompt has an empty name");
  if (embeddings.cols() < 1) throw Error("prompt " + name + " has no embeddings");
  if (embeddings.rows() != clip_dim)
    throw Error("prompt " + name + " has " + std::to_string(embeddings.rows()) + "-D embeddings, expected " +
                std::to_string(clip_dim));
  if (Index(synonyms.size()) != embeddings.cols()) throw Error("prompt " + name + ": synonym count mismatch");
  for (Index j = 0; j < embeddings.cols(); ++j)
    if (std::abs(embeddings.col(j).norm() - 1.0f) > 1e-4f) throw Error("prompt " + name + ": embedding is not unit-norm");
}

std::vector<std::vector<std::string>> parse_synonyms(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
  };
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> group;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (!tok.empty()) group.push_back(tok);
    }
    if (!group.empty()) out.push_back(std::move(group));
  }
  return out;
}

void PromptDictionary::add(PromptEmbedding prompt) {
  if (contains(prompt.name)) throw Error("duplicate prompt " + prompt.name);
  prompts_.push_back(std::move(prompt));
}

bool PromptDictionary::contains(const std::string& name) const {
  for (const auto& p : prompts_)
    if (std::find(p.synonyms.begin(), p.synonyms.end(), name) != p.synonyms.end() || p.name == name) return true;
  return false;
}

const PromptEmbedding& PromptDictionary::find(const std::string& name) const {
  for (const auto& p : prompts_)
    if (p.name == name) return p;
  for (const auto& p : prompts_)
    if (std::find(p.synonyms.begin(), p.synonyms.end(), name) != p.synonyms.end()) return p;
  std::string list;
  for (const auto& n : names()) list += (list.empty() ? "" : ", ") + n;
  throw Error("unknown prompt '" + name + "'; available: " + (list.empty() ? "(none)" : list));
}

std::vector<std::string> PromptDictionary::names() const {
  std::vector<std::string> n;
  for (const auto& p : prompts_) n.push_back(p.name);
  return n;
}

PromptDictionary build_prompts(const std::vector<std::vector<std::string>>& groups, const FeatureProvider& provider) {
  PromptDictionary dict;
  for (const auto& g : groups) {
    PromptEmbedding p;
    p.name = g.front();
    p.synonyms = g;
    p.embeddings.resize(provider.clip_dim(), Index(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto e = provider.text_embed(g[i]);
      if (!e) throw Error("no text embedding available for '" + g[i] + "'");
      p.embeddings.col(Index(i)) = *e;
    }
    dict.add(std::move(p));
  }
  return dict;
}

template <class S>
VecX<S> relevancy(const MatX<S>& features, const VecX<S>& query, const MatX<S>& negatives) {
  if (negatives.cols() == 0) throw Error("relevancy needs at least one negative embedding");
  if (features.rows() != query.size() || negatives.rows() != query.size())
    throw Error("relevancy: embedding dimension mismatch");
  const VecX<S> norms = features.colwise().norm().transpose();
  const VecX<S> fq = (query.transpose() * features).transpose();
  const MatX<S> fn = negatives.transpose() * features;  // negatives x pixels
  VecX<S> out(features.cols());
  for (Index p = 0; p < features.cols(); ++p) {
    const S inv = norms(p) > S(0) ? S(1) / norms(p) : S(0);
    // min over n of e^a / (e^a + e^b) = sigmoid(a - max b)
    out(p) = sigmoid((fq(p) - fn.col(p).maxCoeff()) * inv);
  }
  return out;
}

QueryEngine::QueryEngine(const GaussianModel<float>& gaussians, const SemanticEncoder<float>& encoder,
                         MatX<float> negatives)
    : gaussians_(gaussians), encoder_(encoder), folded_(encoder.mlp()), negatives_(std::move(negatives)) {
  if (negatives_.cols() == 0) throw Error("query engine needs at least one negative embedding");
  if (negatives_.rows() != encoder.config().clip_dim) throw Error("negative embeddings have the wrong dimension");
  if (gaussians.feature_dim() != encoder.config().grid.bottleneck_dim)
    throw Error("Gaussian feature dimension does not match the encoder");
}

MatX<float> QueryEngine::clip_features(const Camera& cam, const Mask* building_mask, Mask& used,
                                       const QueryOptions& options) const {
  VecX<float> opacities(gaussians_.size());
  for (Index i = 0; i < gaussians_.size(); ++i) opacities(i) = sigmoid(gaussians_.opacity_logits(i));
  CompositeOptions co;
  co.threads = options.threads;
  const auto pass = composite(gaussians_, cam, gaussians_.features, opacities, co);
  if (building_mask && building_mask->data.size()) {
    used = (building_mask->height == cam.height && building_mask->width == cam.width)
               ? *building_mask
               : resample_nearest(*building_mask, cam.height, cam.width);
  } else {
    used = Mask(cam.height, cam.width);
    for (Index p = 0; p < pass.alpha.pixels(); ++p) used.data[std::size_t(p)] = pass.alpha.data(0, p) >= options.alpha_threshold;
  }
  std::vector<Index> idx;
  for (Index p = 0; p < pass.image.pixels(); ++p)
    if (used.data[std::size_t(p)]) idx.push_back(p);
  MatX<float> m(gaussians_.feature_dim(), Index(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) m.col(Index(k)) = pass.image.data.col(idx[k]);

  const int clip_dim = encoder_.config().clip_dim;
  MatX<float> f(clip_dim, m.cols());
  constexpr Index kChunk = 2048;
  const int chunks = int((m.cols() + kChunk - 1) / kChunk);
  parallel_for(chunks, options.threads, [&](int c) {
    const Index b = Index(c) * kChunk, n = std::min(kChunk, m.cols() - b);
    f.middleCols(b, n) = folded_.clip(encoder_.grid().encode(m.middleCols(b, n)));
  });
  return f;
}

RelevancyMap QueryEngine::query(const Camera& cam, const PromptEmbedding& prompt, const Mask* building_mask,
                                const QueryOptions& options) const {
  return query_all(cam, {&prompt}, building_mask, options).front();
}

std::vector<RelevancyMap> QueryEngine::query_all(const Camera& cam, const std::vector<const PromptEmbedding*>& prompts,
                                                 const Mask* building_mask, const QueryOptions& options) const {
  const FlushSubnormals flush;
  for (const auto* p : prompts) p->validate(encoder_.config().clip_dim);
  Mask used;
  const MatX<float> f = clip_features(cam, building_mask, used, options);
  std::vector<RelevancyMap> out;
  for (const auto* p : prompts) {
    VecX<float> best = VecX<float>::Zero(f.cols());
    for (Index s = 0; s < p->embeddings.cols(); ++s)
      best = best.cwiseMax(relevancy<float>(f, p->embeddings.col(s), negatives_));
    RelevancyMap r;
    r.prompt = p->name;
    r.camera_id = cam.id;
    r.scores = FeatureMap<float>(1, cam.height, cam.width);
    Index k = 0;
    for (Index px = 0; px < r.scores.pixels(); ++px)
      if (used.data[std::size_t(px)]) r.scores.data(0, px) = best(k++);
    out.push_back(std::move(r));
  }
  return out;
}

double average_precision(const std::vector<float>& scores, const std::vector<std::uint8_t>& gt) {
  if (scores.size() != gt.size()) throw Error("average_precision: score and label counts differ");
  const std::size_t positives = std::size_t(std::count_if(gt.begin(), gt.end(), [](std::uint8_t v) { return v != 0; }));
  if (positives == 0) throw Error("average_precision is undefined without positives");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, group_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_tp += gt[order[j++]] != 0;
    tp += group_tp;
    seen = j;
    ap += double(group_tp) / double(positives) * double(tp) / double(seen);
    i = j;
  }
  return ap;
}

APTable evaluate(const QueryEngine& engine, const std::vector<EvalView>& views, const PromptDictionary& prompts,
                 const std::vector<std::string>& prompt_names, const QueryOptions& options) {
  APTable table;
  std::vector<const PromptEmbedding*> ps;
  for (const auto& n : prompt_names) ps.push_back(&prompts.find(n));
  std::vector<std::vector<float>> scores(ps.size());
  std::vector<std::vector<std::uint8_t>> labels(ps.size());
  for (const auto& v : views) {
    bool complete = true;
    for (const auto* p : ps)
      if (!v.gt_masks.count(p->name)) {
        table.warnings.push_back("view " + std::to_string(v.camera.id) + " has no ground-truth mask for '" + p->name +
                                 "', skipped");
        complete = false;
        break;
      }
    if (!complete) continue;
    const Mask* building = v.building.data.empty() ? nullptr : &v.building;
    const auto maps = engine.query_all(v.camera, ps, building, options);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const Mask& gt = v.gt_masks.at(ps[k]->name);
      if (gt.height != v.camera.height || gt.width != v.camera.width)
        throw Error("ground-truth mask size does not match view " + std::to_string(v.camera.id));
      for (Index px = 0; px < maps[k].scores.pixels(); ++px) {
        if (building && !building->data[std::size_t(px)]) continue;
        scores[k].push_back(maps[k].scores.data(0, px));
        labels[k].push_back(gt.data[std::size_t(px)] ? 1 : 0);
      }
    }
  }
  double sum = 0;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const double ap = average_precision(scores[k], labels[k]);
    table.ap.emplace_back(ps[k]->name, ap);
    sum += ap;
  }
  table.mean_ap = ps.empty() ? 0 : sum / double(ps.size());
  return table;
}

std::string ap_table_csv(const APTable& table) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << "prompt,ap\n";
  for (const auto& [name, ap] : table.ap) os << name << "," << ap << "\n";
  os << "mAP," << table.mean_ap << "\n";
  return os.str();
}

template VecX<float> relevancy(const MatX<float>&, const VecX<float>&, const MatX<float>&);
template VecX<double> relevancy(const MatX<double>&, const VecX<double>&, const MatX<double>&);

}  // namespace l3x
