#include "doctest.h"

#include "l3x/config.hpp"

using namespace l3x;

TEST_CASE("key value parsing") {
  const auto kv = parse_key_values("# comment\niterations = 30  # trailing\n\nname = \"a # b\"\niterations=40\n");
  CHECK(kv.values.at("iterations") == "40");
  CHECK(kv.lines.at("iterations") == 5);
  CHECK(kv.values.at("name") == "a # b");
  try {
    parse_key_values("a = 1\nnot a pair\n", "x.cfg");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_key_values(" = 3\n"), ParseError);
}

TEST_CASE("settings from key values") {
  RunSettings s;
  apply_key_values(s, parse_key_values("lambda_dino = 0\niterations = 12\nappearance = false\ndownsample = bilinear\n"));
  CHECK(s.train.weights.dino == 0);
  CHECK(s.train.iterations == 12);
  CHECK_FALSE(s.train.appearance);
  CHECK(s.train.downsample == DownsampleMode::Bilinear);

  // The preset applies first wherever it appears.
  RunSettings p;
  apply_key_values(p, parse_key_values("iterations = 7\npreset = paper\n"));
  CHECK(p.preset == "paper");
  CHECK(p.train.iterations == 7);
  CHECK(settings_for_preset("paper").train.iterations > settings_for_preset("desk").train.iterations);

  try {
    apply_key_values(s, parse_key_values("iterations = 3\nbogus = 1\n"));
    FAIL("expected a usage error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_key_values(s, parse_key_values("iterations = many\n")), UsageError);
  CHECK_THROWS_AS(apply_key_values(s, parse_key_values("appearance = maybe\n")), UsageError);
  CHECK_THROWS_AS(apply_key_values(s, parse_key_values("preset = huge\n")), UsageError);
}

TEST_CASE("dumped settings parse back to the same settings") {
  RunSettings s = settings_for_preset("desk");
  apply_key_values(s, parse_key_values("lr_feature = 0.0123\nseed = 99\nmax_gaussians = 77\n"));
  const std::string text = dump_settings(s);
  RunSettings t;
  apply_key_values(t, parse_key_values(text));
  CHECK(dump_settings(t) == text);
  for (const auto& k : config_keys()) CHECK(text.find(k.name + " = ") != std::string::npos);
}
