#pragma once

#include "l3x/common.hpp"
#include "l3x/providers.hpp"
#include "l3x/rasterizer.hpp"
#include "l3x/semantic_encoder.hpp"

#include <map>
#include <string>
#include <vector>

namespace l3x {

struct PromptEmbedding {
  std::string name;
  std::vector<std::string> synonyms;  // includes the canonical name first
  MatX<float> embeddings;             // clip_dim x synonyms, unit columns

  void validate(int clip_dim) const;
};

// Synonym file: one prompt per line, comma-separated, canonical name first. Blank lines and lines
// starting with '#' are ignored.
std::vector<std::vector<std::string>> parse_synonyms(const std::string& text);

class PromptDictionary {
 public:
  void add(PromptEmbedding prompt);
  // Matches the canonical name or any synonym; throws listing the available prompts.
  const PromptEmbedding& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<PromptEmbedding>& prompts() const { return prompts_; }
  std::vector<std::string> names() const;

 private:
  std::vector<PromptEmbedding> prompts_;
};

// Embeds each synonym group through the provider; unknown phrases are an error.
PromptDictionary build_prompts(const std::vector<std::vector<std::string>>& groups, const FeatureProvider& provider);

// Per column of `features`: min over negatives of the pairwise softmax between the query and the
// negative, on per-pixel normalized features. Throws when `negatives` is empty.
template <class S>
VecX<S> relevancy(const MatX<S>& features, const VecX<S>& query, const MatX<S>& negatives);

struct RelevancyMap {
  FeatureMap<float> scores;  // 1 x H x W
  std::string prompt;
  int camera_id = 0;
};

struct QueryOptions {
  int threads = 1;
  // Used when no building mask is supplied: pixels with rendered alpha below this score 0.
  float alpha_threshold = 0.5f;
};

// Read-only scoring over a frozen Gaussian set and decoder.
class QueryEngine {
 public:
  QueryEngine(const GaussianModel<float>& gaussians, const SemanticEncoder<float>& encoder, MatX<float> negatives);

  // Normalized CLIP features at the pixels selected by `mask` (camera resolution); also returns the mask used.
  MatX<float> clip_features(const Camera& cam, const Mask* building_mask, Mask& used, const QueryOptions& options = {}) const;
  RelevancyMap query(const Camera& cam, const PromptEmbedding& prompt, const Mask* building_mask = nullptr,
                     const QueryOptions& options = {}) const;
  // Several prompts sharing one render and decode.
  std::vector<RelevancyMap> query_all(const Camera& cam, const std::vector<const PromptEmbedding*>& prompts,
                                      const Mask* building_mask = nullptr, const QueryOptions& options = {}) const;

  const MatX<float>& negatives() const { return negatives_; }

 private:
  const GaussianModel<float>& gaussians_;
  const SemanticEncoder<float>& encoder_;
  DecoderMLP<float>::Folded folded_;
  MatX<float> negatives_;
};

// All-points interpolated AP; samples with equal scores form one threshold step. Throws on zero positives.
double average_precision(const std::vector<float>& scores, const std::vector<std::uint8_t>& gt);

struct EvalView {
  Camera camera;
  Mask building;                          // pixels pooled for evaluation; empty = every pixel
  std::map<std::string, Mask> gt_masks;   // per canonical prompt name
};

struct APTable {
  std::vector<std::pair<std::string, double>> ap;
  double mean_ap = 0;
  std::vector<std::string> warnings;
};

APTable evaluate(const QueryEngine& engine, const std::vector<EvalView>& views, const PromptDictionary& prompts,
                 const std::vector<std::string>& prompt_names, const QueryOptions& options = {});

std::string ap_table_csv(const APTable& table);

}  // namespace l3x
