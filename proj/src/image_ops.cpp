#include "l3x/image_ops.hpp"

#include <array>
#include <cmath>

namespace l3x {

namespace {

struct Tap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = double(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = std::max(0.0, (i + 0.5) * scale - 0.5);
    int i0 = std::min(int(s), src - 1);
    int i1 = std::min(i0 + 1, src - 1);
    taps[i] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

template <class S>
FeatureMap<S> bilinear_resize(const FeatureMap<S>& src, int height, int width) {
  if (src.height == height && src.width == width) return src;
  auto ty = bilinear_taps(src.height, height);
  auto tx = bilinear_taps(src.width, width);
  FeatureMap<S> dst(src.channels(), height, width);
  for (int y = 0; y < height; ++y) {
    const S wy = S(ty[y].w1);
    for (int x = 0; x < width; ++x) {
      const S wx = S(tx[x].w1);
      dst.data.col(dst.pixel(y, x)) = (S(1) - wy) * ((S(1) - wx) * src.data.col(src.pixel(ty[y].i0, tx[x].i0)) +
                                                     wx * src.data.col(src.pixel(ty[y].i0, tx[x].i1))) +
                                      wy * ((S(1) - wx) * src.data.col(src.pixel(ty[y].i1, tx[x].i0)) +
                                            wx * src.data.col(src.pixel(ty[y].i1, tx[x].i1)));
    }
  }
  return dst;
}

template <class S>
void bilinear_resize_backward(const FeatureMap<S>& d_dst, FeatureMap<S>& d_src) {
  if (d_src.height == d_dst.height && d_src.width == d_dst.width) {
    d_src.data += d_dst.data;
    return;
  }
  auto ty = bilinear_taps(d_src.height, d_dst.height);
  auto tx = bilinear_taps(d_src.width, d_dst.width);
  for (int y = 0; y < d_dst.height; ++y) {
    const S wy = S(ty[y].w1);
    for (int x = 0; x < d_dst.width; ++x) {
      const S wx = S(tx[x].w1);
      const auto g = d_dst.data.col(d_dst.pixel(y, x));
      d_src.data.col(d_src.pixel(ty[y].i0, tx[x].i0)) += (S(1) - wy) * (S(1) - wx) * g;
      d_src.data.col(d_src.pixel(ty[y].i0, tx[x].i1)) += (S(1) - wy) * wx * g;
      d_src.data.col(d_src.pixel(ty[y].i1, tx[x].i0)) += wy * (S(1) - wx) * g;
      d_src.data.col(d_src.pixel(ty[y].i1, tx[x].i1)) += wy * wx * g;
    }
  }
}

template <class S>
FeatureMap<S> gaussian_blur(const FeatureMap<S>& x) {
  constexpr int R = 5;
  std::array<S, 2 * R + 1> k{};
  S sum = 0;
  for (int i = -R; i <= R; ++i) {
    k[i + R] = S(std::exp(-double(i * i) / (2.0 * 1.5 * 1.5)));
    sum += k[i + R];
  }
  for (auto& v : k) v /= sum;
  const int H = x.height, W = x.width;
  FeatureMap<S> tmp(x.channels(), H, W), out(x.channels(), H, W);
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx)
      for (int i = -R; i <= R; ++i) {
        const int sx = xx + i;
        if (sx < 0 || sx >= W) continue;
        tmp.data.col(tmp.pixel(y, xx)) += k[i + R] * x.data.col(x.pixel(y, sx));
      }
  for (int y = 0; y < H; ++y)
    for (int xx = 0; xx < W; ++xx)
      for (int i = -R; i <= R; ++i) {
        const int sy = y + i;
        if (sy < 0 || sy >= H) continue;
        out.data.col(out.pixel(y, xx)) += k[i + R] * tmp.data.col(tmp.pixel(sy, xx));
      }
  return out;
}

template <class S>
S ssim(const FeatureMap<S>& x, const FeatureMap<S>& y, FeatureMap<S>* grad) {
  const S C1 = S(0.01 * 0.01), C2 = S(0.03 * 0.03);
  FeatureMap<S> xx = x, yy = y, xy = x;
  xx.data = x.data.cwiseProduct(x.data);
  yy.data = y.data.cwiseProduct(y.data);
  xy.data = x.data.cwiseProduct(y.data);
  const auto mx = gaussian_blur(x), my = gaussian_blur(y);
  const auto exx = gaussian_blur(xx), eyy = gaussian_blur(yy), exy = gaussian_blur(xy);

  const auto& ux = mx.data.array();
  const auto& uy = my.data.array();
  const auto a1 = (S(2) * ux * uy + C1).eval();
  const auto a2 = (S(2) * (exy.data.array() - ux * uy) + C2).eval();
  const auto b1 = (ux * ux + uy * uy + C1).eval();
  const auto b2 = (exx.data.array() - ux * ux + eyy.data.array() - uy * uy + C2).eval();
  const auto s = (a1 * a2 / (b1 * b2)).eval();
  const S n = S(s.size());
  const S value = s.sum() / n;
  if (grad) {
    FeatureMap<S> g_mu = x, g_xx = x, g_xy = x;
    g_mu.data = ((S(2) * uy * (a2 - a1) / (b1 * b2) - S(2) * ux * s * (S(1) / b1 - S(1) / b2)) / n).matrix();
    g_xx.data = (-s / b2 / n).matrix();
    g_xy.data = (S(2) * a1 / (b1 * b2) / n).matrix();
    *grad = gaussian_blur(g_mu);
    grad->data.array() += S(2) * x.data.array() * gaussian_blur(g_xx).data.array() +
                          y.data.array() * gaussian_blur(g_xy).data.array();
  }
  return value;
}

template <class S>
S l1_loss(const FeatureMap<S>& x, const FeatureMap<S>& y, FeatureMap<S>* grad) {
  const S n = S(x.data.size());
  if (grad) {
    *grad = x;
    grad->data = (x.data - y.data).unaryExpr([n](S d) { return (d > 0 ? S(1) : d < 0 ? S(-1) : S(0)) / n; });
  }
  return (x.data - y.data).cwiseAbs().sum() / n;
}

#define L3X_INSTANTIATE(S)                                                               \
  template FeatureMap<S> bilinear_resize(const FeatureMap<S>&, int, int);                \
  template void bilinear_resize_backward(const FeatureMap<S>&, FeatureMap<S>&);          \
  template FeatureMap<S> gaussian_blur(const FeatureMap<S>&);                            \
  template S ssim(const FeatureMap<S>&, const FeatureMap<S>&, FeatureMap<S>*);           \
  template S l1_loss(const FeatureMap<S>&, const FeatureMap<S>&, FeatureMap<S>*);

L3X_INSTANTIATE(float)
L3X_INSTANTIATE(double)
#undef L3X_INSTANTIATE

}  // namespace l3x
