#pragma once

// Property checks shared by the unit tests and the acceptance runner.

#include "l3x/common.hpp"
#include "l3x/scene.hpp"
#include "l3x/workspace.hpp"

#include <string>
#include <vector>

namespace l3x::test {

struct CheckResult {
  bool pass = false;
  double value = 0;  // the measured quantity the threshold applies to
  std::string detail;
};

// Brute-force reference: projects every Gaussian independently of the library's tiling and
// composites each pixel over the full depth-sorted list.
struct OracleImage {
  MatX<double> image;  // C x pixels
  VecX<double> alpha;
};
OracleImage oracle_composite(const GaussianModel<double>& model, const Camera& cam, const MatX<double>& values,
                             const VecX<double>& opacities);

// Analytic gradients against central differences in double precision; value = worst relative error.
CheckResult check_rasterizer_gradients(std::uint64_t seed);
CheckResult check_hash_grid_gradients(std::uint64_t seed);
CheckResult check_decoder_gradients(std::uint64_t seed);
CheckResult check_downsampler_gradients(std::uint64_t seed);
CheckResult check_appearance_gradients(std::uint64_t seed);

// value = worst absolute difference over `scenes` random scenes (RGB and features).
CheckResult check_compositing_oracle(int scenes, std::uint64_t seed);

CheckResult check_uniform_weights_average_pool(std::uint64_t seed);
CheckResult check_softmax_shift_invariance(std::uint64_t seed);
CheckResult check_convex_hull(int windows, std::uint64_t seed);

CheckResult check_sam_identities(std::uint64_t seed);

// value = worst relative error against an extended-precision evaluation.
CheckResult check_pixel_size_oracle(int fixtures, std::uint64_t seed);
CheckResult check_pixel_size_linearity(std::uint64_t seed);

// Multi-threaded tiles vs a single thread, forward and backward, bit for bit.
CheckResult check_parallel_bitwise(std::uint64_t seed, int threads);

// The 2-class, 20-view, 128x128 synthetic scene behind the end-to-end criteria and golden files.
SyntheticPrepareOptions synthetic_fixture();

}  // namespace l3x::test
