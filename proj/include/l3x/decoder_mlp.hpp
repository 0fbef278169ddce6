#pragma once

#include "l3x/common.hpp"

#include <array>

namespace l3x {

template <class S>
struct LinearLayer {
  MatX<S> weight;  // out x in
  VecX<S> bias;

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

// Fills weight and bias from U(-1/sqrt(in), 1/sqrt(in)).
template <class S>
LinearLayer<S> make_linear(Index in, Index out, Rng& rng);

// Shared decoder: three linear maps, a ReLU, then a linear head whose first clip_dim outputs
// are the CLIP-space prediction and the remaining dino_dim the DINO-space prediction.
template <class S>
class DecoderMLP {
 public:
  struct Cache {
    MatX<S> input, h3;  // h3 is the pre-activation of the ReLU
  };
  struct Gradients {
    std::array<MatX<S>, 4> weight;
    std::array<VecX<S>, 4> bias;
  };

  DecoderMLP() = default;
  DecoderMLP(int input_dim, int clip_dim, int dino_dim);

  void initialize(Rng& rng);
  int input_dim() const { return input_dim_; }
  int clip_dim() const { return clip_dim_; }
  int dino_dim() const { return dino_dim_; }
  int output_dim() const { return clip_dim_ + dino_dim_; }

  std::array<LinearLayer<S>, 4>& layers() { return layers_; }
  const std::array<LinearLayer<S>, 4>& layers() const { return layers_; }

  // rows >= 0 computes only the first `rows` outputs.
  MatX<S> forward(const MatX<S>& x, Cache* cache = nullptr, Index rows = -1) const;
  // Returns d(input); accumulates parameter gradients into grads. d_out may cover a leading subset of outputs.
  MatX<S> backward(const Cache& cache, const MatX<S>& d_out, Gradients& grads) const;

  // The same network in two stages. hidden() is ReLU(W2 W1 W0 x + ...) evaluated through the
  // product of the three linear maps; head() applies output rows [row0, row0 + rows).
  // The head is linear, so it commutes with any resampling whose weights sum to one.
  MatX<S> hidden(const MatX<S>& x, Cache* cache = nullptr) const;
  MatX<S> head(const MatX<S>& r, Index row0, Index rows) const;
  // Returns d(r) and accumulates the head's parameter gradients.
  MatX<S> head_backward(const MatX<S>& r, const MatX<S>& d_out, Index row0, Gradients& grads) const;
  // Returns d(input) for upstream d(r); the three stacked layers get their exact gradients.
  MatX<S> hidden_backward(const Cache& cache, const MatX<S>& d_r, Gradients& grads) const;
  Gradients zero_gradients() const;

  // CLIP-channel output only, with the three stacked linear maps folded into one; used by
  // read-only inference, where intermediate activations are not needed.
  class Folded {
   public:
    Folded() = default;
    explicit Folded(const DecoderMLP& mlp);
    MatX<S> clip(const MatX<S>& x) const;

   private:
    MatX<S> weight_in_;
    VecX<S> bias_in_;
    MatX<S> weight_out_;
    VecX<S> bias_out_;
  };

 private:
  int input_dim_ = 0, clip_dim_ = 0, dino_dim_ = 0;
  std::array<LinearLayer<S>, 4> layers_;
};

}  // namespace l3x
