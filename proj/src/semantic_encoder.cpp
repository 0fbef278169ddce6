#include "l3x/semantic_encoder.hpp"

namespace l3x {

void EncoderConfig::validate() const {
  grid.validate();
  if (clip_dim < 1 || dino_dim < 0) throw Error("encoder: invalid output dimensions");
}

template <class S>
SemanticEncoder<S>::SemanticEncoder(const EncoderConfig& config)
    : config_(config), grid_(config.grid), mlp_(config.grid.output_dim(), config.clip_dim, config.dino_dim) {
  config_.validate();
}

template <class S>
void SemanticEncoder<S>::initialize(Rng& rng) {
  grid_.initialize(rng);
  mlp_.initialize(rng);
}

template <class S>
MatX<S> SemanticEncoder<S>::forward(const MatX<S>& m, Cache* cache, Index rows) const {
  MatX<S> e = grid_.encode(m);
  if (!cache) return mlp_.forward(e, nullptr, rows);
  cache->bottleneck = m;
  return mlp_.forward(e, &cache->mlp, rows);
}

template <class S>
MatX<S> SemanticEncoder<S>::backward(const Cache& cache, const MatX<S>& d_out, Gradients& grads) const {
  MatX<S> d_e = mlp_.backward(cache.mlp, d_out, grads.mlp);
  MatX<S> d_m;
  grid_.backward(cache.bottleneck, d_e, grads.table, d_m);
  return d_m;
}

template <class S>
typename SemanticEncoder<S>::Gradients SemanticEncoder<S>::zero_gradients() const {
  Gradients g;
  g.table.setZero(grid_.table().rows(), grid_.table().cols());
  g.mlp = mlp_.zero_gradients();
  return g;
}

template <class S>
FeatureMap<S> SemanticEncoder<S>::decode_map(const FeatureMap<S>& feat) const {
  FeatureMap<S> out;
  out.height = feat.height;
  out.width = feat.width;
  out.data = forward(feat.data);
  return out;
}

template class SemanticEncoder<float>;
template class SemanticEncoder<double>;

}  // namespace l3x
