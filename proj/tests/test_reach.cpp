// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stpc/reach.hpp"
#include "util.hpp"

using namespace stpc;

namespace {

ReachConfig small_config() {
  ReachConfig cfg;
  cfg.n_star = 2;
  cfg.N_i = 30;
  cfg.N = 6;
  cfg.T_ini = 2;
  cfg.seed = 5;
  cfg.prune = true;
  return cfg;
}

const NestedFamily& small_family() {
  static const NestedFamily fam = build_family(testutil::benchmark_archive(),
                                               testutil::benchmark_plant(),
                                               testutil::benchmark_boxes(), small_config());
  return fam;
}

std::string temp_path(const char* name) {
  return std::string("reach_test_") + name + ".json";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("configuration validation names the broken assumption") {
  ReachConfig cfg = small_config();
  cfg.n_star = 0;
  CHECK_THROWS_AS(build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                               testutil::benchmark_boxes(), cfg),
                  std::invalid_argument);
  cfg = small_config();
  cfg.N_i = 0;
  CHECK_THROWS_AS(build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                               testutil::benchmark_boxes(), cfg),
                  std::invalid_argument);
  cfg = small_config();
  cfg.N = 4;  // two windows no longer fit
  CHECK_THROWS_AS(build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                               testutil::benchmark_boxes(), cfg),
                  std::invalid_argument);
}

TEST_CASE("built family: seed level, nestedness, box containment") {
  const NestedFamily& fam = small_family();
  REQUIRE(fam.size() == 3);  // origin + two expansion levels
  REQUIRE(fam.levels[0].count() == 1);
  CHECK(fam.levels[0].vertices[0] == Vec(4, 0.0));
  CHECK(fam.T_ini == 2);
  CHECK(fam.N == 6);

  CHECK_FALSE(nestedness_violation(fam, 1e-7).has_value());

  for (const VRepSet& lvl : fam.levels) {
    CHECK(lvl.count() >= 1);
    for (const Vec& v : lvl.vertices) {
      CHECK(std::fabs(v[0]) <= 0.5 + 1e-12);
      CHECK(std::fabs(v[1]) <= 0.5 + 1e-12);
      CHECK(std::fabs(v[2]) <= 4.0 + 1e-12);
      CHECK(std::fabs(v[3]) <= 4.0 + 1e-12);
    }
  }
  // The expansion actually grew the safe set beyond the origin.
  CHECK(fam.levels[1].count() > 1);
  CHECK(membership(fam.levels[1], Vec(4, 0.0)));
  CHECK(membership(fam.levels[2], Vec(4, 0.0)));
}

TEST_CASE("degenerate budget still yields a well-formed family") {
  ReachConfig cfg = small_config();
  cfg.n_star = 1;
  cfg.N_i = 1;
  NestedFamily fam = build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                                  testutil::benchmark_boxes(), cfg);
  REQUIRE(fam.size() == 2);
  CHECK(membership(fam.levels[1], Vec(4, 0.0)));
  CHECK_FALSE(nestedness_violation(fam).has_value());
}

TEST_CASE("family construction is deterministic") {
  NestedFamily a = build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                                testutil::benchmark_boxes(), small_config());
  NestedFamily b = build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                                testutil::benchmark_boxes(), small_config());
  REQUIRE(a.size() == b.size());
  for (std::size_t l = 0; l < a.size(); ++l) CHECK(a.levels[l].vertices == b.levels[l].vertices);
}

TEST_CASE("build reports per-level accounting") {
  std::vector<LevelBuildInfo> info;
  NestedFamily fam = build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                                  testutil::benchmark_boxes(), small_config(), &info);
  REQUIRE(info.size() == 2);
  CHECK(info[0].level == 1);
  CHECK(info[1].level == 2);
  for (const LevelBuildInfo& li : info) {
    CHECK(li.collected_states > 0);
    CHECK(li.kept_vertices == fam.levels[li.level].count());
  }
}

TEST_CASE("vertex cap keeps the family nested and flags the clip") {
  ReachConfig cfg = small_config();
  cfg.n_star = 1;
  cfg.vertex_cap = 6;
  std::vector<LevelBuildInfo> info;
  NestedFamily fam = build_family(testutil::benchmark_archive(), testutil::benchmark_plant(),
                                  testutil::benchmark_boxes(), cfg, &info);
  REQUIRE(info.size() == 1);
  CHECK(info[0].cap_hit);
  CHECK(fam.levels[1].count() <= 6);
  CHECK_FALSE(nestedness_violation(fam).has_value());
}

TEST_CASE("defining-property spot check passes on a built family") {
  VerifyReport rep = verify_family(small_family(), testutil::benchmark_archive(), 5, 99);
  CHECK(rep.attempts == 10);  // five vertices for each of the two outer levels
  CHECK(rep.passes == rep.attempts);
  CHECK(rep.all_passed());
  CHECK(rep.max_span_residual < 1e-7);

  // A seed-only family has nothing to verify.
  NestedFamily seed;
  seed.levels.resize(1);
  seed.levels[0].vertices = {Vec(4, 0.0)};
  seed.T_ini = 2;
  seed.m = seed.p = 1;
  seed.N = 6;
  seed.boxes = testutil::benchmark_boxes();
  VerifyReport empty = verify_family(seed, testutil::benchmark_archive(), 5, 99);
  CHECK(empty.attempts == 0);
  CHECK(empty.all_passed());
}

TEST_CASE("save and load round-trip bit for bit") {
  const NestedFamily& fam = small_family();
  const std::string path = temp_path("roundtrip");
  save_family(fam, path);
  NestedFamily back = load_family(path);
  REQUIRE(back.size() == fam.size());
  for (std::size_t l = 0; l < fam.size(); ++l)
    CHECK(back.levels[l].vertices == fam.levels[l].vertices);
  CHECK(back.T_ini == fam.T_ini);
  CHECK(back.m == fam.m);
  CHECK(back.p == fam.p);
  CHECK(back.N == fam.N);
  CHECK(back.boxes.u_hi == fam.boxes.u_hi);
  std::remove(path.c_str());
}

TEST_CASE("loader rejects damaged files") {
  const NestedFamily& fam = small_family();
  const std::string path = temp_path("damage");
  save_family(fam, path);
  const std::string good = slurp(path);

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_family("no_such_family.json"), doctest::Contains("cannot open"),
                         std::runtime_error);
  }
  SUBCASE("truncated") {
    spit(path, good.substr(0, good.size() / 2));
    CHECK_THROWS_WITH_AS(load_family(path), doctest::Contains("malformed"), std::runtime_error);
  }
  SUBCASE("version mismatch names both versions") {
    std::string bumped = good;
    const std::string needle = "\"version\": 1";
    const auto pos = bumped.find(needle);
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, needle.size(), "\"version\": 99");
    spit(path, bumped);
    try {
      load_family(path);
      FAIL("expected a version error");
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("99") != std::string::npos);
      CHECK(msg.find("1") != std::string::npos);
    }
  }
  SUBCASE("vertex outside the output box") {
    NestedFamily broken = fam;
    broken.levels[1].vertices[0][2] = 100.0;
    save_family(broken, path);
    CHECK_THROWS_WITH_AS(load_family(path), doctest::Contains("output box"), std::runtime_error);
  }
  SUBCASE("nestedness broken") {
    NestedFamily broken = fam;
    broken.levels[2] = broken.levels[0];  // outer level no longer contains level 1
    save_family(broken, path);
    CHECK_THROWS_WITH_AS(load_family(path), doctest::Contains("nestedness"), std::runtime_error);
  }
  std::remove(path.c_str());
}
