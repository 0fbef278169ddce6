#include "l3x/downsampler.hpp"

#include <cmath>
#include <limits>

namespace l3x {

namespace {

// Visits every (tap k, destination row y, source row sy, column span) such that destination pixels
// (y, x0..x0+len) read source pixels (sy, sx0..sx0+len) through tap k.
template <class Fn>
void for_each_tap_span(int H, int W, Fn&& fn) {
  for (int k = 0; k < 9; ++k) {
    const int dy = k / 3 - 1, dx = k % 3 - 1;
    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
    if (x1 <= x0) continue;
    for (int y = 0; y < H; ++y) {
      const int sy = y + dy;
      if (sy < 0 || sy >= H) continue;
      fn(k, y, sy, x0, x0 + dx, x1 - x0);
    }
  }
}

}  // namespace

template <class S>
MatX<S> conv3x3_forward(const Conv3x3<S>& conv, const FeatureMap<S>& x) {
  const int out = conv.out_channels();
  const int H = x.height, W = x.width;
  const MatX<S> z = conv.weight * x.data;  // (9 out) x HW
  MatX<S> y = conv.bias.replicate(1, x.pixels());
  for_each_tap_span(H, W, [&](int k, int yy, int sy, int x0, int sx0, int len) {
    y.middleCols(Index(yy) * W + x0, len) += z.block(Index(k) * out, Index(sy) * W + sx0, out, len);
  });
  return y;
}

template <class S>
MatX<S> conv3x3_backward(const Conv3x3<S>& conv, const FeatureMap<S>& x, const MatX<S>& d_out, MatX<S>& d_weight,
                         VecX<S>& d_bias) {
  const int out = conv.out_channels();
  const int H = x.height, W = x.width;
  MatX<S> dz = MatX<S>::Zero(9 * out, x.pixels());
  for_each_tap_span(H, W, [&](int k, int yy, int sy, int x0, int sx0, int len) {
    dz.block(Index(k) * out, Index(sy) * W + sx0, out, len) = d_out.middleCols(Index(yy) * W + x0, len);
  });
  d_bias += d_out.rowwise().sum();
  d_weight.noalias() += dz * x.data.transpose();
  return conv.weight.transpose() * dz;
}

template <class S>
AttenuatedDownsampler<S>::AttenuatedDownsampler(int channels, int hidden) {
  const int ins[3] = {channels, hidden, hidden};
  const int outs[3] = {hidden, hidden, 1};
  for (int k = 0; k < 3; ++k) {
    layers_[k].weight.setZero(9 * outs[k], ins[k]);
    layers_[k].bias.setZero(outs[k]);
  }
}

template <class S>
void AttenuatedDownsampler<S>::initialize(Rng& rng) {
  for (auto& layer : layers_) {
    const double bound = 1.0 / std::sqrt(9.0 * layer.in_channels());
    for (Index j = 0; j < layer.weight.cols(); ++j)
      for (Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = S(rng.uniform(-bound, bound));
    for (Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = S(rng.uniform(-bound, bound));
  }
}

template <class S>
FeatureMap<S> AttenuatedDownsampler<S>::predict_weights(const FeatureMap<S>& features, Cache* cache) const {
  if (features.channels() != channels()) throw Error("downsampler: input channel count mismatch");
  FeatureMap<S> h = features;
  for (int k = 0; k < 3; ++k) {
    MatX<S> pre = conv3x3_forward(layers_[k], h);
    FeatureMap<S> next;
    next.height = features.height;
    next.width = features.width;
    if (k < 2) {
      next.data = pre.cwiseMax(S(0));
      if (cache) cache->pre[k] = std::move(pre);
    } else {
      next.data = std::move(pre);
    }
    if (cache) {
      if (k == 0) cache->input = features;
      else cache->hidden[k - 1] = h;
    }
    h = std::move(next);
  }
  return h;
}

template <class S>
typename AttenuatedDownsampler<S>::Gradients AttenuatedDownsampler<S>::zero_gradients() const {
  Gradients g;
  for (int k = 0; k < 3; ++k) {
    g.weight[k].setZero(layers_[k].weight.rows(), layers_[k].weight.cols());
    g.bias[k].setZero(layers_[k].bias.size());
  }
  return g;
}

template <class S>
FeatureMap<S> AttenuatedDownsampler<S>::backward(const Cache& cache, const FeatureMap<S>& d_weights,
                                                 Gradients& grads) const {
  MatX<S> d = d_weights.data;
  for (int k = 2; k >= 0; --k) {
    const FeatureMap<S>& in = k == 0 ? cache.input : cache.hidden[k - 1];
    d = conv3x3_backward(layers_[k], in, d, grads.weight[k], grads.bias[k]);
    if (k > 0) d = (cache.pre[k - 1].array() > S(0)).select(d, S(0));
  }
  FeatureMap<S> out;
  out.height = cache.input.height;
  out.width = cache.input.width;
  out.data = std::move(d);
  return out;
}

template <class S>
DownsampleResult<S> attenuated_downsample(const FeatureMap<S>& features, const FeatureMap<S>& weights, int height,
                                          int width, std::optional<SourceRegion> region) {
  const int H = features.height, W = features.width, C = features.channels();
  if (weights.height != H || weights.width != W || weights.channels() != 1)
    throw Error("attenuated_downsample: weight map must be H x W x 1 matching the features");
  if (height < 1 || width < 1) throw Error("attenuated_downsample: invalid target size");
  const SourceRegion r = region.value_or(SourceRegion{0, 0, double(H), double(W)});
  if (height > r.height || width > r.width)
    throw Error("attenuated_downsample: target " + std::to_string(height) + "x" + std::to_string(width) +
                " is larger than the source " + std::to_string(H) + "x" + std::to_string(W));

  const double cell_h = r.height / height, cell_w = r.width / width;
  std::vector<int> row_owner(H, -1), col_owner(W, -1);
  for (int y = 0; y < H; ++y) {
    const double c = (y + 0.5 - r.y0) / cell_h;
    if (c >= 0 && c < height) row_owner[y] = int(std::floor(c));
  }
  for (int x = 0; x < W; ++x) {
    const double c = (x + 0.5 - r.x0) / cell_w;
    if (c >= 0 && c < width) col_owner[x] = int(std::floor(c));
  }

  DownsampleResult<S> res;
  res.owner.assign(std::size_t(H) * W, -1);
  res.softmax.setZero(Index(H) * W);
  const Index n_out = Index(height) * width;
  VecX<S> wmax = VecX<S>::Constant(n_out, -std::numeric_limits<S>::infinity());
  std::vector<int> owned(std::size_t(n_out), 0);
  for (int y = 0; y < H; ++y) {
    if (row_owner[y] < 0) continue;
    for (int x = 0; x < W; ++x) {
      if (col_owner[x] < 0) continue;
      const int o = row_owner[y] * width + col_owner[x];
      const Index p = Index(y) * W + x;
      res.owner[p] = o;
      ++owned[std::size_t(o)];
      wmax(o) = std::max(wmax(o), weights.data(0, p));
    }
  }
  // NaN weights pass through to the output; only empty cells are an error here.
  for (Index o = 0; o < n_out; ++o)
    if (!owned[std::size_t(o)])
      throw Error("attenuated_downsample: an output cell owns no source pixels (target too large)");

  VecX<S> denom = VecX<S>::Zero(n_out);
  for (Index p = 0; p < Index(H) * W; ++p) {
    const int o = res.owner[p];
    if (o < 0) continue;
    res.softmax(p) = std::exp(weights.data(0, p) - wmax(o));
    denom(o) += res.softmax(p);
  }
  res.output = FeatureMap<S>(C, height, width);
  for (Index p = 0; p < Index(H) * W; ++p) {
    const int o = res.owner[p];
    if (o < 0) continue;
    res.softmax(p) /= denom(o);
    res.output.data.col(o) += res.softmax(p) * features.data.col(p);
  }
  return res;
}

template <class S>
void attenuated_downsample_backward(const FeatureMap<S>& features, const DownsampleResult<S>& result,
                                    const FeatureMap<S>& d_output, FeatureMap<S>& d_features,
                                    FeatureMap<S>& d_weights) {
  const Index n = features.pixels();
  if (d_features.data.size() == 0) d_features = FeatureMap<S>(features.channels(), features.height, features.width);
  if (d_weights.data.size() == 0) d_weights = FeatureMap<S>(1, features.height, features.width);
  for (Index p = 0; p < n; ++p) {
    const int o = result.owner[p];
    if (o < 0) continue;
    const S a = result.softmax(p);
    const auto g = d_output.data.col(o);
    d_features.data.col(p) += a * g;
    // d out / d w_p = a_p (f_p - out)
    d_weights.data(0, p) += a * (features.data.col(p) - result.output.data.col(o)).dot(g);
  }
}

#define L3X_INSTANTIATE(S)                                                                                     \
  template MatX<S> conv3x3_forward(const Conv3x3<S>&, const FeatureMap<S>&);                                  \
  template MatX<S> conv3x3_backward(const Conv3x3<S>&, const FeatureMap<S>&, const MatX<S>&, MatX<S>&,        \
                                    VecX<S>&);                                                                \
  template class AttenuatedDownsampler<S>;                                                                   \
  template DownsampleResult<S> attenuated_downsample(const FeatureMap<S>&, const FeatureMap<S>&, int, int,    \
                                                     std::optional<SourceRegion>);                            \
  template void attenuated_downsample_backward(const FeatureMap<S>&, const DownsampleResult<S>&,              \
                                               const FeatureMap<S>&, FeatureMap<S>&, FeatureMap<S>&);

L3X_INSTANTIATE(float)
L3X_INSTANTIATE(double)
#undef L3X_INSTANTIATE

}  // namespace l3x
