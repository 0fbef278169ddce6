#pragma once

#include "l3x/common.hpp"

#include <array>
#include <optional>
#include <vector>

namespace l3x {

// 3x3 convolution with zero padding 1 (spatial size preserved).
template <class S>
struct Conv3x3 {
  // (9 * out) x in; row block k is the tap at offset (k / 3 - 1, k % 3 - 1).
  MatX<S> weight;
  VecX<S> bias;

  int in_channels() const { return int(weight.cols()); }
  int out_channels() const { return int(bias.size()); }
};

template <class S>
MatX<S> conv3x3_forward(const Conv3x3<S>& conv, const FeatureMap<S>& x);
// Returns d(x); accumulates d(weight), d(bias).
template <class S>
MatX<S> conv3x3_backward(const Conv3x3<S>& conv, const FeatureMap<S>& x, const MatX<S>& d_out, MatX<S>& d_weight,
                         VecX<S>& d_bias);

// Learned per-pixel attention weights followed by softmax-weighted window pooling.
template <class S>
class AttenuatedDownsampler {
 public:
  struct Cache {
    FeatureMap<S> input;
    std::array<FeatureMap<S>, 2> hidden;  // post-activation outputs of the first two layers
    std::array<MatX<S>, 2> pre;           // their pre-activations
  };
  struct Gradients {
    std::array<MatX<S>, 3> weight;
    std::array<VecX<S>, 3> bias;
  };

  AttenuatedDownsampler() = default;
  explicit AttenuatedDownsampler(int channels, int hidden = 64);

  void initialize(Rng& rng);
  std::array<Conv3x3<S>, 3>& layers() { return layers_; }
  const std::array<Conv3x3<S>, 3>& layers() const { return layers_; }
  int channels() const { return layers_[0].in_channels(); }

  // H x W x C -> H x W x 1
  FeatureMap<S> predict_weights(const FeatureMap<S>& features, Cache* cache = nullptr) const;
  // Returns d(features); accumulates parameter gradients.
  FeatureMap<S> backward(const Cache& cache, const FeatureMap<S>& d_weights, Gradients& grads) const;
  Gradients zero_gradients() const;

 private:
  std::array<Conv3x3<S>, 3> layers_;
};

// Continuous source rectangle (in source pixel units) that is partitioned into output cells.
struct SourceRegion {
  double y0 = 0, x0 = 0, height = 0, width = 0;
};

template <class S>
struct DownsampleResult {
  FeatureMap<S> output;
  std::vector<int> owner;  // per source pixel: output pixel index, or -1 when outside the region
  VecX<S> softmax;         // per source pixel: normalized weight inside its window
};

// Each output pixel is the exp(w)-weighted mean of the source pixels whose centers fall in its
// back-projected cell. Throws when the target is larger than the source region.
template <class S>
DownsampleResult<S> attenuated_downsample(const FeatureMap<S>& features, const FeatureMap<S>& weights, int height,
                                          int width, std::optional<SourceRegion> region = std::nullopt);

// Accumulates into d_features and d_weights.
template <class S>
void attenuated_downsample_backward(const FeatureMap<S>& features, const DownsampleResult<S>& result,
                                    const FeatureMap<S>& d_output, FeatureMap<S>& d_features,
                                    FeatureMap<S>& d_weights);

}  // namespace l3x
