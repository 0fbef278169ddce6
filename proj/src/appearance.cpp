#include "l3x/appearance.hpp"

#include <cmath>
#include <numbers>

namespace l3x {

void AppearanceConfig::validate() const {
  if (embedding_dim < 1 || pe_bands < 0 || hidden < 1) throw Error("invalid appearance configuration");
}

template <class S>
MatX<S> positional_encoding(const Mat3X<S>& x, int bands) {
  MatX<S> out(6 * bands, x.cols());
  for (int k = 0; k < bands; ++k) {
    const S f = S(std::ldexp(std::numbers::pi, k));
    for (int d = 0; d < 3; ++d) {
      out.row(6 * k + d) = (f * x.row(d).array()).sin().matrix();
      out.row(6 * k + 3 + d) = (f * x.row(d).array()).cos().matrix();
    }
  }
  return out;
}

template <class S>
AppearanceModel<S>::AppearanceModel(const AppearanceConfig& config, int images) : config_(config) {
  config_.validate();
  if (images < 1) throw Error("appearance model needs at least one image");
  embeddings_.setZero(config_.embedding_dim, images);
  const int in[3] = {config_.input_dim(), config_.hidden, config_.hidden};
  const int out[3] = {config_.hidden, config_.hidden, 4};
  for (int k = 0; k < 3; ++k) {
    layers_[k].weight.setZero(out[k], in[k]);
    layers_[k].bias.setZero(out[k]);
  }
}

template <class S>
void AppearanceModel<S>::initialize(Rng& rng) {
  for (int k = 0; k < 2; ++k) layers_[k] = make_linear<S>(layers_[k].in_dim(), layers_[k].out_dim(), rng);
  layers_[2].weight.setZero();
  layers_[2].bias.setZero();
  embeddings_.setZero();
}

template <class S>
ColorOpacityShift<S> AppearanceModel<S>::shift(const GaussianModel<S>& model, int image, Cache* cache) const {
  if (image >= images()) throw Error("appearance: unknown image index " + std::to_string(image));
  const VecX<S> e = image < 0 ? VecX<S>::Zero(config_.embedding_dim) : VecX<S>(embeddings_.col(image));
  auto s = shift_with(model, e, cache);
  if (cache) cache->image = image;
  return s;
}

template <class S>
ColorOpacityShift<S> AppearanceModel<S>::shift_with(const GaussianModel<S>& model, const VecX<S>& e,
                                                    Cache* cache) const {
  const Index n = model.size();
  MatX<S> x(config_.input_dim(), n);
  x.topRows(3) = model.colors;
  x.middleRows(3, 6 * config_.pe_bands) = positional_encoding(model.means, config_.pe_bands);
  x.bottomRows(config_.embedding_dim) = e.replicate(1, n);
  MatX<S> pre1 = (layers_[0].weight * x).colwise() + layers_[0].bias;
  MatX<S> pre2 = (layers_[1].weight * pre1.cwiseMax(S(0))).colwise() + layers_[1].bias;
  MatX<S> y = (layers_[2].weight * pre2.cwiseMax(S(0))).colwise() + layers_[2].bias;
  ColorOpacityShift<S> s;
  s.color = y.topRows(3);
  s.opacity = y.row(3).transpose();
  if (cache) {
    cache->image = -1;
    cache->input = std::move(x);
    cache->pre1 = std::move(pre1);
    cache->pre2 = std::move(pre2);
  }
  return s;
}

template <class S>
typename AppearanceModel<S>::Gradients AppearanceModel<S>::zero_gradients() const {
  Gradients g;
  g.embeddings.setZero(embeddings_.rows(), embeddings_.cols());
  for (int k = 0; k < 3; ++k) {
    g.weight[k].setZero(layers_[k].weight.rows(), layers_[k].weight.cols());
    g.bias[k].setZero(layers_[k].bias.size());
  }
  return g;
}

template <class S>
void AppearanceModel<S>::backward(const Cache& cache, const GaussianModel<S>& model,
                                  const ColorOpacityShift<S>& d_shift, Gradients& grads,
                                  GaussianGradients<S>* d_model) const {
  const Index n = cache.input.cols();
  MatX<S> dy(4, n);
  dy.topRows(3) = d_shift.color;
  dy.row(3) = d_shift.opacity.transpose();
  const MatX<S> h2 = cache.pre2.cwiseMax(S(0));
  grads.weight[2].noalias() += dy * h2.transpose();
  grads.bias[2] += dy.rowwise().sum();
  MatX<S> d2 = layers_[2].weight.transpose() * dy;
  d2 = (cache.pre2.array() > S(0)).select(d2, S(0));
  const MatX<S> h1 = cache.pre1.cwiseMax(S(0));
  grads.weight[1].noalias() += d2 * h1.transpose();
  grads.bias[1] += d2.rowwise().sum();
  MatX<S> d1 = layers_[1].weight.transpose() * d2;
  d1 = (cache.pre1.array() > S(0)).select(d1, S(0));
  grads.weight[0].noalias() += d1 * cache.input.transpose();
  grads.bias[0] += d1.rowwise().sum();
  const MatX<S> dx = layers_[0].weight.transpose() * d1;
  if (cache.image >= 0) grads.embeddings.col(cache.image) += dx.bottomRows(config_.embedding_dim).rowwise().sum();
  if (d_model) {
    d_model->colors += dx.topRows(3);
    const int B = config_.pe_bands;
    for (int k = 0; k < B; ++k) {
      const S f = S(std::ldexp(std::numbers::pi, k));
      for (int d = 0; d < 3; ++d) {
        const auto arg = (f * model.means.row(d).array()).eval();
        d_model->means.row(d).array() += f * (dx.row(3 + 6 * k + d).array() * arg.cos() -
                                              dx.row(3 + 6 * k + 3 + d).array() * arg.sin());
      }
    }
  }
}

template <class S>
void color_pass_backward(const GaussianModel<S>& model, const ColorOpacityShift<S>* shift, const MatX<S>& d_colors,
                         const VecX<S>& d_opacities, GaussianGradients<S>& out, ColorOpacityShift<S>* d_shift) {
  const Index n = model.size();
  const S eps = S(1e-6);
  if (d_shift) {
    d_shift->color.setZero(3, n);
    d_shift->opacity.setZero(n);
  }
  for (Index i = 0; i < n; ++i) {
    const S base = sigmoid(model.opacity_logits(i));
    S d_op = d_opacities(i);
    if (shift) {
      const S v = base + shift->opacity(i);
      if (v <= eps || v >= S(1) - eps) d_op = 0;
      if (d_shift) d_shift->opacity(i) = d_op;
    }
    out.opacity_logits(i) += d_op * base * (S(1) - base);
    for (int c = 0; c < 3; ++c) {
      S d = d_colors(c, i);
      if (shift) {
        const S v = model.colors(c, i) + shift->color(c, i);
        if (v < S(0) || v > S(1)) d = 0;
        if (d_shift) d_shift->color(c, i) = d;
      }
      out.colors(c, i) += d;
    }
  }
}

#define L3X_INSTANTIATE(S)                                                                                       \
  template MatX<S> positional_encoding(const Mat3X<S>&, int);                                                   \
  template class AppearanceModel<S>;                                                                            \
  template void color_pass_backward(const GaussianModel<S>&, const ColorOpacityShift<S>*, const MatX<S>&,        \
                                    const VecX<S>&, GaussianGradients<S>&, ColorOpacityShift<S>*);

L3X_INSTANTIATE(float)
L3X_INSTANTIATE(double)
#undef L3X_INSTANTIATE

}  // namespace l3x
