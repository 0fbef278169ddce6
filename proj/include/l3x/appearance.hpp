#pragma once

#include "l3x/common.hpp"
#include "l3x/decoder_mlp.hpp"
#include "l3x/rasterizer.hpp"
#include "l3x/scene.hpp"

#include <array>

namespace l3x {

struct AppearanceConfig {
  int embedding_dim = 24;
  int pe_bands = 4;
  int hidden = 64;

  int input_dim() const { return 3 + 6 * pe_bands + embedding_dim; }
  void validate() const;
};

// sin/cos(2^k pi x) for every coordinate and band: 6 * bands rows per column of `x`.
template <class S>
MatX<S> positional_encoding(const Mat3X<S>& x, int bands);

// Per-image embeddings and a small MLP mapping (base color, PE(mean), embedding) to color and
// opacity offsets for the RGB pass. The last layer starts at zero, so shifts start at zero.
template <class S>
class AppearanceModel {
 public:
  struct Cache {
    int image = -1;
    MatX<S> input, pre1, pre2;
  };
  struct Gradients {
    MatX<S> embeddings;
    std::array<MatX<S>, 3> weight;
    std::array<VecX<S>, 3> bias;
  };

  AppearanceModel() = default;
  AppearanceModel(const AppearanceConfig& config, int images);

  void initialize(Rng& rng);
  const AppearanceConfig& config() const { return config_; }
  int images() const { return int(embeddings_.cols()); }
  MatX<S>& embeddings() { return embeddings_; }
  const MatX<S>& embeddings() const { return embeddings_; }
  std::array<LinearLayer<S>, 3>& layers() { return layers_; }
  const std::array<LinearLayer<S>, 3>& layers() const { return layers_; }

  // image < 0 selects the zero embedding (novel views).
  ColorOpacityShift<S> shift(const GaussianModel<S>& model, int image, Cache* cache = nullptr) const;
  ColorOpacityShift<S> shift_with(const GaussianModel<S>& model, const VecX<S>& embedding, Cache* cache) const;

  // Accumulates parameter gradients; adds gradients for base colors and means into d_model when given.
  void backward(const Cache& cache, const GaussianModel<S>& model, const ColorOpacityShift<S>& d_shift,
                Gradients& grads, GaussianGradients<S>* d_model = nullptr) const;
  Gradients zero_gradients() const;

 private:
  AppearanceConfig config_;
  MatX<S> embeddings_;  // embedding_dim x images
  std::array<LinearLayer<S>, 3> layers_;
};

// Gradient of the clamped color-pass inputs: routes d(colors)/d(opacities) of the RGB pass to the
// base parameters and, when a shift was applied, to the shift.
template <class S>
void color_pass_backward(const GaussianModel<S>& model, const ColorOpacityShift<S>* shift, const MatX<S>& d_colors,
                         const VecX<S>& d_opacities, GaussianGradients<S>& out,
                         ColorOpacityShift<S>* d_shift = nullptr);

}  // namespace l3x
