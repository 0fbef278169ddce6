#pragma once

#include "l3x/common.hpp"

#include <algorithm>
#include <cmath>

namespace l3x {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

// First and second moments of one parameter tensor.
template <class S>
struct AdamMoments {
  MatX<S> m;
  MatX<S> v;
  int step = 0;

  void reset(Index rows, Index cols) {
    m.setZero(rows, cols);
    v.setZero(rows, cols);
    step = 0;
  }
};

// One Adam update with bias correction. Weight decay is added to the gradient (L2 form).
template <class S, class P, class G>
void adam_step(Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad, AdamMoments<S>& mom, double lr,
               double weight_decay = 0, const AdamHyper& h = {}) {
  if (mom.m.rows() != param.rows() || mom.m.cols() != param.cols())
    throw Error("adam: moment shape does not match its parameter");
  ++mom.step;
  const S b1 = S(h.beta1), b2 = S(h.beta2);
  const S c1 = S(1.0 - std::pow(h.beta1, mom.step));
  const S c2 = S(std::sqrt(1.0 - std::pow(h.beta2, mom.step)));
  const S step_size = S(lr) / c1;
  const S eps = S(h.eps);
  if (weight_decay != 0) {
    const auto g = (grad.derived() + S(weight_decay) * param.derived()).eval();
    mom.m = b1 * mom.m + (S(1) - b1) * g;
    mom.v = b2 * mom.v + (S(1) - b2) * g.cwiseProduct(g);
  } else {
    mom.m = b1 * mom.m + (S(1) - b1) * grad.derived();
    mom.v = b2 * mom.v + (S(1) - b2) * grad.derived().cwiseProduct(grad.derived());
  }
  param.derived().array() -= step_size * mom.m.array() / (mom.v.array().sqrt() / c2 + eps);
}

// Log-linear interpolation from lr_init to lr_final over max_steps.
inline double exponential_lr(double lr_init, double lr_final, int step, int max_steps) {
  if (max_steps <= 0) return lr_final;
  const double t = std::clamp(double(step) / max_steps, 0.0, 1.0);
  return std::exp(std::log(lr_init) * (1 - t) + std::log(lr_final) * t);
}

}  // namespace l3x
