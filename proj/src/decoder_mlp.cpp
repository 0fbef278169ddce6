#include "l3x/decoder_mlp.hpp"

#include <cmath>

namespace l3x {

template <class S>
LinearLayer<S> make_linear(Index in, Index out, Rng& rng) {
  LinearLayer<S> layer;
  const double bound = 1.0 / std::sqrt(double(in));
  layer.weight.resize(out, in);
  layer.bias.resize(out);
  for (Index j = 0; j < in; ++j)
    for (Index i = 0; i < out; ++i) layer.weight(i, j) = S(rng.uniform(-bound, bound));
  for (Index i = 0; i < out; ++i) layer.bias(i) = S(rng.uniform(-bound, bound));
  return layer;
}

template LinearLayer<float> make_linear(Index, Index, Rng&);
template LinearLayer<double> make_linear(Index, Index, Rng&);

template <class S>
DecoderMLP<S>::DecoderMLP(int input_dim, int clip_dim, int dino_dim)
    : input_dim_(input_dim), clip_dim_(clip_dim), dino_dim_(dino_dim) {
  const int hidden = clip_dim;
  const Index ins[4] = {input_dim, hidden, hidden, hidden};
  const Index outs[4] = {hidden, hidden, hidden, clip_dim + dino_dim};
  for (int k = 0; k < 4; ++k) {
    layers_[k].weight.setZero(outs[k], ins[k]);
    layers_[k].bias.setZero(outs[k]);
  }
}

template <class S>
void DecoderMLP<S>::initialize(Rng& rng) {
  for (auto& layer : layers_) layer = make_linear<S>(layer.in_dim(), layer.out_dim(), rng);
}

template <class S>
MatX<S> DecoderMLP<S>::hidden(const MatX<S>& x, Cache* cache) const {
  if (x.rows() != input_dim_) throw Error("decoder: input has wrong dimension");
  const auto& L = layers_;
  const MatX<S> w21 = L[2].weight * L[1].weight;
  const VecX<S> b = w21 * L[0].bias + L[2].weight * L[1].bias + L[2].bias;
  MatX<S> h3 = ((w21 * L[0].weight) * x).colwise() + b;
  MatX<S> r = h3.cwiseMax(S(0));
  if (cache) {
    cache->input = x;
    cache->h3 = std::move(h3);
  }
  return r;
}

template <class S>
MatX<S> DecoderMLP<S>::head(const MatX<S>& r, Index row0, Index rows) const {
  return (layers_[3].weight.middleRows(row0, rows) * r).colwise() + layers_[3].bias.segment(row0, rows);
}

template <class S>
MatX<S> DecoderMLP<S>::forward(const MatX<S>& x, Cache* cache, Index rows) const {
  if (rows < 0 || rows > output_dim()) rows = output_dim();
  return head(hidden(x, cache), 0, rows);
}

template <class S>
typename DecoderMLP<S>::Gradients DecoderMLP<S>::zero_gradients() const {
  Gradients g;
  for (int k = 0; k < 4; ++k) {
    g.weight[k].setZero(layers_[k].weight.rows(), layers_[k].weight.cols());
    g.bias[k].setZero(layers_[k].bias.size());
  }
  return g;
}

template <class S>
MatX<S> DecoderMLP<S>::head_backward(const MatX<S>& r, const MatX<S>& d_out, Index row0, Gradients& grads) const {
  const Index rows = d_out.rows();
  grads.weight[3].middleRows(row0, rows).noalias() += d_out * r.transpose();
  grads.bias[3].segment(row0, rows) += d_out.rowwise().sum();
  return layers_[3].weight.middleRows(row0, rows).transpose() * d_out;
}

template <class S>
MatX<S> DecoderMLP<S>::hidden_backward(const Cache& cache, const MatX<S>& d_r, Gradients& grads) const {
  const auto& L = layers_;
  const MatX<S> d3 = (cache.h3.array() > S(0)).select(d_r, S(0));
  // Every stacked-layer gradient is a fixed linear map of d3 x^T and d3 1, so one outer product
  // over the pixels replaces three.
  const MatX<S> outer = d3 * cache.input.transpose();
  const VecX<S> dsum = d3.rowwise().sum();
  const MatX<S> w10 = L[1].weight * L[0].weight;
  const VecX<S> h2_bias = L[1].weight * L[0].bias + L[1].bias;
  grads.weight[2].noalias() += outer * w10.transpose() + dsum * h2_bias.transpose();
  grads.bias[2] += dsum;
  const MatX<S> w2t = L[2].weight.transpose();
  const MatX<S> outer2 = w2t * outer;
  const VecX<S> dsum2 = w2t * dsum;
  grads.weight[1].noalias() += outer2 * L[0].weight.transpose() + dsum2 * L[0].bias.transpose();
  grads.bias[1] += dsum2;
  const MatX<S> w1t = L[1].weight.transpose();
  grads.weight[0].noalias() += w1t * outer2;
  grads.bias[0] += w1t * dsum2;
  return (L[0].weight.transpose() * (w1t * w2t)) * d3;
}

template <class S>
MatX<S> DecoderMLP<S>::backward(const Cache& cache, const MatX<S>& d_out, Gradients& grads) const {
  const MatX<S> r = cache.h3.cwiseMax(S(0));
  return hidden_backward(cache, head_backward(r, d_out, 0, grads), grads);
}

template <class S>
DecoderMLP<S>::Folded::Folded(const DecoderMLP& mlp) {
  const auto& L = mlp.layers_;
  // Accumulate in double so the fold adds as little rounding as possible.
  MatX<double> w = L[2].weight.template cast<double>() * L[1].weight.template cast<double>();
  VecX<double> b = L[2].weight.template cast<double>() * L[1].bias.template cast<double>() + L[2].bias.template cast<double>();
  b = w * L[0].bias.template cast<double>() + b;
  w = w * L[0].weight.template cast<double>();
  weight_in_ = w.cast<S>();
  bias_in_ = b.cast<S>();
  weight_out_ = L[3].weight.topRows(mlp.clip_dim_);
  bias_out_ = L[3].bias.head(mlp.clip_dim_);
}

template <class S>
MatX<S> DecoderMLP<S>::Folded::clip(const MatX<S>& x) const {
  MatX<S> h = (weight_in_ * x).colwise() + bias_in_;
  h = h.cwiseMax(S(0));
  return (weight_out_ * h).colwise() + bias_out_;
}

template class DecoderMLP<float>;
template class DecoderMLP<double>;

}  // namespace l3x
