#include "doctest.h"

#include "support.hpp"

#include "l3x/downsampler.hpp"

#include <cmath>

using namespace l3x;

TEST_CASE("weighted window mean") {
  FeatureMap<double> f(1, 1, 2), w(1, 1, 2);
  f.data << 1, 3;
  w.data << std::log(3.0), 0;
  const auto res = attenuated_downsample(f, w, 1, 1);
  CHECK(res.output.data(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(res.softmax.sum() == doctest::Approx(1.0));
}

TEST_CASE("invalid targets") {
  FeatureMap<double> f(2, 4, 4), w(1, 4, 4);
  CHECK_THROWS_AS(attenuated_downsample(f, w, 5, 4), Error);
  CHECK_THROWS_AS(attenuated_downsample(f, w, 0, 2), Error);
  CHECK_THROWS_AS(attenuated_downsample(f, FeatureMap<double>(1, 3, 4), 2, 2), Error);
  // A region narrower than the target.
  CHECK_THROWS_AS(attenuated_downsample(f, w, 2, 2, SourceRegion{0, 0, 1.5, 4}), Error);
}

TEST_CASE("regions exclude pixels outside them") {
  Rng rng(1);
  const auto f = l3x::test::random_map<double>(rng, 2, 10, 10);
  FeatureMap<double> w(1, 10, 10);
  const auto res = attenuated_downsample(f, w, 2, 2, SourceRegion{1, 2, 8, 6});
  int outside = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      const int o = res.owner[std::size_t(y) * 10 + x];
      const bool in = y >= 1 && y < 9 && x >= 2 && x < 8;
      CHECK((o >= 0) == in);
      outside += o < 0;
    }
  CHECK(outside == 100 - 48);
  // Top-left cell: rows 1..4, cols 2..4.
  double mean = 0;
  for (int y = 1; y < 5; ++y)
    for (int x = 2; x < 5; ++x) mean += f.at(0, y, x) / 12;
  CHECK(res.output.data(0, 0) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("zero network predicts zero weights") {
  Rng rng(2);
  AttenuatedDownsampler<double> ds(5, 4);
  const auto f = l3x::test::random_map<double>(rng, 5, 6, 7);
  const auto w = ds.predict_weights(f);
  CHECK(w.channels() == 1);
  CHECK(w.height == 6);
  CHECK(w.width == 7);
  CHECK(w.data.isZero());
}

TEST_CASE("convolution matches a direct sum") {
  Rng rng(3);
  Conv3x3<double> conv;
  conv.weight = MatX<double>::NullaryExpr(9 * 2, 3, [&] { return rng.normal(); });
  conv.bias = VecX<double>::NullaryExpr(2, [&] { return rng.normal(); });
  const auto x = l3x::test::random_map<double>(rng, 3, 5, 6);
  const MatX<double> y = conv3x3_forward(conv, x);
  for (int oy = 0; oy < 5; ++oy)
    for (int ox = 0; ox < 6; ++ox)
      for (int o = 0; o < 2; ++o) {
        double s = conv.bias(o);
        for (int k = 0; k < 9; ++k) {
          const int sy = oy + k / 3 - 1, sx = ox + k % 3 - 1;
          if (sy < 0 || sy >= 5 || sx < 0 || sx >= 6) continue;
          for (int c = 0; c < 3; ++c) s += conv.weight(k * 2 + o, c) * x.at(c, sy, sx);
        }
        CHECK(y(o, x.pixel(oy, ox)) == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("interior weights are translation equivariant") {
  Rng rng(4);
  AttenuatedDownsampler<double> ds(3, 4);
  ds.initialize(rng);
  const auto f = l3x::test::random_map<double>(rng, 3, 12, 12);
  FeatureMap<double> g(3, 12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 1; x < 12; ++x)
      for (int c = 0; c < 3; ++c) g.at(c, y, x) = f.at(c, y, x - 1);
  const auto wf = ds.predict_weights(f), wg = ds.predict_weights(g);
  // Three stacked 3x3 layers see 3 pixels in each direction.
  for (int y = 3; y < 9; ++y)
    for (int x = 3; x < 8; ++x) CHECK(wg.at(0, y, x + 1) == doctest::Approx(wf.at(0, y, x)).epsilon(1e-12));
}

TEST_CASE("non-integer ratios cover every source pixel once") {
  Rng rng(5);
  const auto f = l3x::test::random_map<double>(rng, 1, 37, 23);
  const auto w = l3x::test::random_map<double>(rng, 1, 37, 23);
  const auto res = attenuated_downsample(f, w, 5, 4);
  std::vector<int> count(20, 0);
  for (int o : res.owner) {
    REQUIRE(o >= 0);
    ++count[std::size_t(o)];
  }
  for (int c : count) CHECK((c >= 7 * 5 && c <= 8 * 6));
  VecX<double> per_cell = VecX<double>::Zero(20);
  for (std::size_t p = 0; p < res.owner.size(); ++p) per_cell(res.owner[p]) += res.softmax(Index(p));
  CHECK((per_cell.array() - 1).abs().maxCoeff() < 1e-12);
}
