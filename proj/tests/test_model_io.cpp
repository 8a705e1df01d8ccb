#include "doctest.h"

#include <cstdio>
#include <string>

#include "specmult/model_io.hpp"
#include "specmult/operator_model.hpp"

using namespace specmult;

namespace {

void expect_same(const ModelInstance& a, const ModelInstance& b) {
  REQUIRE(a.dim() == b.dim());
  REQUIRE(a.block_count() == b.block_count());
  // Bitwise: the json layer must not perturb a single matrix entry.
  CHECK((a.a.entries.array() == b.a.entries.array()).all());
  for (int n = 0; n < a.block_count(); ++n) {
    CHECK(a.blocks[n].support == b.blocks[n].support);
    CHECK((a.blocks[n].c.array() == b.blocks[n].c.array()).all());
    CHECK(a.blocks[n].rank == b.blocks[n].rank);
  }
  CHECK(a.disorder.family == b.disorder.family);
  CHECK(a.disorder.params == b.disorder.params);
  CHECK(a.disorder.seed == b.disorder.seed);
  CHECK(a.has_omega() == b.has_omega());
  if (a.has_omega()) CHECK((a.omega.array() == b.omega.array()).all());
}

}  // namespace

TEST_CASE("json round trip is bitwise over the builders") {
  for (ModelInstance m : {build_strip(3, 2), build_shell_model(2, 2), build_nested_model(2),
                          build_canopy_bethe(3, 2, 1)}) {
    m.disorder = {"gaussian", {0.25, 1.5}, 42};
    expect_same(m, model_from_json(model_to_json(m)));
  }
}

TEST_CASE("omega survives the round trip and assembly matches") {
  ModelInstance m = with_disorder(build_strip(3, 2), 4);
  const ModelInstance back = model_from_json(model_to_json(m));
  expect_same(m, back);
  REQUIRE(back.is_assembled());
  CHECK((m.assembled.array() == back.assembled.array()).all());
}

TEST_CASE("save and load through a file") {
  const std::string path = "model_io_roundtrip.json";
  const ModelInstance m = with_disorder(build_shell_model(2, 1), 9);
  save_model(m, path);
  const ModelInstance back = load_model(path);
  expect_same(m, back);
  std::remove(path.c_str());
}

TEST_CASE("unknown fields are rejected with their path") {
  ojson j = model_to_json(build_strip(2, 2));
  j["extra"] = 1;
  CHECK_THROWS_WITH_AS(model_from_json(j), doctest::Contains("extra"), std::invalid_argument);

  ojson j2 = model_to_json(build_strip(2, 2));
  j2["blocks"][0]["color"] = "red";
  CHECK_THROWS_WITH_AS(model_from_json(j2), doctest::Contains("color"),
                       std::invalid_argument);
}

TEST_CASE("non-hermitian couplings are rejected") {
  ojson j = model_to_json(build_strip(2, 2));
  j["a"][0][1] = {0.5, 0.0};  // breaks a(0,1) == conj(a(1,0))
  CHECK_THROWS_AS(model_from_json(j), std::invalid_argument);

  ojson j2 = model_to_json(build_strip(2, 2));
  j2["blocks"][0]["c"][0][0] = {0.0, 0.3};  // imaginary diagonal
  CHECK_THROWS_AS(model_from_json(j2), std::invalid_argument);
}

TEST_CASE("support order and omega length are validated") {
  ojson j = model_to_json(build_strip(2, 2));
  std::swap(j["blocks"][0]["support"][0], j["blocks"][0]["support"][1]);
  CHECK_THROWS_WITH_AS(model_from_json(j), doctest::Contains("support"),
                       std::invalid_argument);

  ojson j2 = model_to_json(with_disorder(build_strip(2, 2), 0));
  j2["omega"].push_back(0.5);
  CHECK_THROWS_WITH_AS(model_from_json(j2), doctest::Contains("omega"),
                       std::invalid_argument);
}

TEST_CASE("disorder family and params are validated") {
  ojson j = model_to_json(build_strip(2, 2));
  j["disorder"]["family"] = "cauchy";
  CHECK_THROWS_WITH_AS(model_from_json(j), doctest::Contains("family"),
                       std::invalid_argument);

  ojson j2 = model_to_json(build_strip(2, 2));
  j2["disorder"]["params"] = {0.0, 1.0, 2.0};
  CHECK_THROWS_WITH_AS(model_from_json(j2), doctest::Contains("params"),
                       std::invalid_argument);
}
