#include "doctest.h"

#include "checks.hpp"
#include "support.hpp"

#include "l3x/binary_io.hpp"
#include "l3x/bundle.hpp"
#include "l3x/image_io.hpp"

using namespace l3x;
namespace fs = std::filesystem;

// Shipped golden bundle: the recorded AP table and 64x64 relevancy maps must be reproduced.
TEST_CASE("golden bundle reproduces its AP table and maps") {
  const fs::path golden = fs::path(L3X_SOURCE_DIR) / "tests" / "golden";
  REQUIRE(fs::exists(golden / "synthetic.l3xb"));
  l3x::test::TempDir dir("golden");
  const Workspace ws = prepare_synthetic(dir / "ws", l3x::test::synthetic_fixture());
  const SceneBundle b = load_bundle(golden / "synthetic.l3xb");

  const APTable t = evaluate_split(ws, b.gaussians, b.encoder, "val");
  CHECK(ap_table_csv(t) == read_text_file(golden / "ap_val.csv"));

  QueryEngine engine(b.gaussians, b.encoder, b.negatives);
  const int id = ws.val_ids.front();
  const Camera cam = b.camera(id).resized(64, 64);
  int maps = 0;
  for (const auto& name : b.prompts.names()) {
    const fs::path path = golden / ("relevancy_" + name + "_" + std::to_string(id) + "_64.f32");
    REQUIRE(fs::exists(path));
    const auto expect = read_raw_map(path);
    const auto got = engine.query(cam, b.prompts.find(name)).scores;
    CHECK((got.data - expect.data).cwiseAbs().maxCoeff() < 1e-6f);
    ++maps;
  }
  CHECK(maps == 2);
}
