#include "doctest.h"

#include "checks.hpp"

using namespace l3x::test;

namespace {

void expect(const CheckResult& r) {
  INFO(r.detail);
  CHECK(r.pass);
}

}  // namespace

TEST_CASE("rasterizer gradients match central differences") {
  for (std::uint64_t seed : {1, 2, 3}) expect(check_rasterizer_gradients(seed));
}

TEST_CASE("hash grid gradients match central differences") { expect(check_hash_grid_gradients(4)); }

TEST_CASE("decoder gradients match central differences") {
  for (std::uint64_t seed : {5, 6}) expect(check_decoder_gradients(seed));
}

TEST_CASE("downsampler gradients match central differences") {
  for (std::uint64_t seed : {7, 8}) expect(check_downsampler_gradients(seed));
}

TEST_CASE("appearance gradients match central differences") { expect(check_appearance_gradients(9)); }

TEST_CASE("tiled compositing equals the brute-force oracle") { expect(check_compositing_oracle(8, 10)); }

TEST_CASE("uniform attention weights reduce to average pooling") { expect(check_uniform_weights_average_pool(11)); }

TEST_CASE("downsampling ignores a constant weight offset") { expect(check_softmax_shift_invariance(12)); }

TEST_CASE("downsampled values stay inside their window's range") { expect(check_convex_hull(300, 13)); }

TEST_CASE("SAM loss identities") { expect(check_sam_identities(14)); }

TEST_CASE("pixel size against extended precision") { expect(check_pixel_size_oracle(40, 15)); }

TEST_CASE("pixel size is linear in distance") { expect(check_pixel_size_linearity(16)); }

TEST_CASE("tile threads do not change results") { expect(check_parallel_bitwise(17, 4)); }
