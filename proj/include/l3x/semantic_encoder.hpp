#pragma once

#include "l3x/common.hpp"
#include "l3x/decoder_mlp.hpp"
#include "l3x/hash_grid.hpp"

namespace l3x {

struct EncoderConfig {
  HashGridConfig grid;
  int clip_dim = 512;
  int dino_dim = 384;

  void validate() const;
};

// Elementwise sigmoid mapping bottleneck values into the hash grid's unit domain.
template <class Derived>
auto squash(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  return m.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

// Bottleneck decoder: feature-space hash encoding followed by the shared MLP.
template <class S>
class SemanticEncoder {
 public:
  struct Cache {
    MatX<S> bottleneck;
    typename DecoderMLP<S>::Cache mlp;
  };
  struct Gradients {
    MatX<S> table;
    typename DecoderMLP<S>::Gradients mlp;
  };

  SemanticEncoder() = default;
  explicit SemanticEncoder(const EncoderConfig& config);

  void initialize(Rng& rng);
  const EncoderConfig& config() const { return config_; }
  HashGrid<S>& grid() { return grid_; }
  const HashGrid<S>& grid() const { return grid_; }
  DecoderMLP<S>& mlp() { return mlp_; }
  const DecoderMLP<S>& mlp() const { return mlp_; }

  // bottleneck_dim x N -> grid output x N
  MatX<S> encode(const MatX<S>& m) const { return grid_.encode(m); }
  // grid output x N -> (clip_dim + dino_dim) x N
  MatX<S> decode(const MatX<S>& e) const { return mlp_.forward(e); }

  MatX<S> forward(const MatX<S>& m, Cache* cache = nullptr, Index rows = -1) const;
  // Returns d(bottleneck); accumulates parameter gradients.
  MatX<S> backward(const Cache& cache, const MatX<S>& d_out, Gradients& grads) const;
  Gradients zero_gradients() const;

  // Per-pixel decode of a bottleneck map; resolution is preserved.
  FeatureMap<S> decode_map(const FeatureMap<S>& feat) const;

 private:
  EncoderConfig config_;
  HashGrid<S> grid_;
  DecoderMLP<S> mlp_;
};

}  // namespace l3x
