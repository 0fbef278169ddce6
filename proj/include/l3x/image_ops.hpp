#pragma once

#include "l3x/common.hpp"

namespace l3x {

// Bilinear resampling with half-pixel centers (no corner alignment, no antialiasing).
template <class S>
FeatureMap<S> bilinear_resize(const FeatureMap<S>& src, int height, int width);

// Adjoint of bilinear_resize: accumulates d(src) for upstream d(dst).
template <class S>
void bilinear_resize_backward(const FeatureMap<S>& d_dst, FeatureMap<S>& d_src);

// Separable 11x11 Gaussian (sigma 1.5) with zero padding, applied per channel.
template <class S>
FeatureMap<S> gaussian_blur(const FeatureMap<S>& x);

// Mean SSIM over pixels and channels; fills d(ssim)/d(x) when grad is given.
template <class S>
S ssim(const FeatureMap<S>& x, const FeatureMap<S>& y, FeatureMap<S>* grad = nullptr);

// Mean absolute error over pixels and channels; fills d/d(x) when grad is given.
template <class S>
S l1_loss(const FeatureMap<S>& x, const FeatureMap<S>& y, FeatureMap<S>* grad = nullptr);

}  // namespace l3x
