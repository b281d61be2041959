#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ran/arch.hpp"

using namespace ran;

TEST_CASE("receptive_field_size and capture_range") {
  CHECK(receptive_field_size({1, {1, 1}}) == 5);
  CHECK(receptive_field_size({4, {1}}) == 12);
  CHECK(receptive_field_size({1, {}}) == 1);

  CHECK(capture_range({1, {1, 1}}) == 2.0);
  CHECK(capture_range({16, {1}}) == 23.5);
  CHECK(capture_range({1, {}}) == 0.0);

  CHECK_THROWS_AS(receptive_field_size({0, {1}}), std::invalid_argument);
  CHECK_THROWS_AS(receptive_field_size({2, {0}}), std::invalid_argument);
}

TEST_CASE("covers_whole_image") {
  ArchitectureConfig a{{{16, {2}}}, 0, 1};
  CHECK(covers_whole_image(a, {32, 32, 32}));  // 80 >= 65

  ArchitectureConfig b{{{16, {1}}}, 0, 1};
  CHECK_FALSE(covers_whole_image(b, {32, 32, 32}));  // 48 < 65

  ArchitectureConfig c{{{1, {}}}, 0, 1};
  CHECK_FALSE(covers_whole_image(c, {1, 1, 1}));  // 1 < 3

  ArchitectureConfig empty;
  CHECK_THROWS_AS(covers_whole_image(empty, {8, 8, 8}), std::invalid_argument);
}

TEST_CASE("separability_profile: single level") {
  ArchitectureConfig cfg{{{1, {1}}}, 0, 1};  // a1 = 1
  const auto prof = separability_profile(cfg);
  REQUIRE(prof.breakpoints.size() == 1);
  CHECK(prof.breakpoints[0] == 1.0);
  CHECK(prof.values[0] == 2.0);
  CHECK(prof.value_at(0.0) == 0.0);
  CHECK(prof.value_at(0.999) == 0.0);
  CHECK(prof.value_at(1.0) == 2.0);
  CHECK(prof.value_at(100.0) == 2.0);
}

TEST_CASE("separability_profile: two-level pyramid, hand table") {
  // (p1=2, r1=[1]), (p2=1, r2=[1]): a1 = 2.5, a2 = 1
  ArchitectureConfig cfg{{{2, {1}}, {1, {1}}}, 0, 1};
  const auto prof = separability_profile(cfg);
  REQUIRE(prof.breakpoints.size() == 2);
  CHECK(prof.breakpoints[0] == 1.0);  // p2
  CHECK(prof.values[0] == 2.0);       // 2*a2
  CHECK(prof.breakpoints[1] == 4.0);  // p1 + 2*a2
  CHECK(prof.values[1] == 7.0);       // 2*(a1 + a2)
  CHECK(prof.value_at(0.5) == 0.0);
  CHECK(prof.value_at(3.999) == 2.0);
  CHECK(prof.value_at(4.0) == 7.0);
}

TEST_CASE("separability_profile is monotone with exact terminal plateau") {
  for (Index q : {Index(0), Index(2), Index(4)}) {
    const auto cfg = ma_config(4, q, {1});
    const auto prof = separability_profile(cfg);
    double prev_b = -1.0, prev_v = -1.0;
    for (size_t i = 0; i < prof.breakpoints.size(); ++i) {
      CHECK(prof.breakpoints[i] > prev_b);
      CHECK(prof.values[i] >= prev_v);
      prev_b = prof.breakpoints[i];
      prev_v = prof.values[i];
    }
    double twice_sum_a = 0.0;
    for (const auto& lvl : cfg.levels) twice_sum_a += 2.0 * capture_range(lvl);
    CHECK(prof.values.back() == twice_sum_a);
  }
}

TEST_CASE("ma_config schedules") {
  const auto fp = ma_config(4, 0, {1});
  REQUIRE(fp.levels.size() == 4);
  CHECK(fp.levels[0].pool_size == 8);
  CHECK(fp.levels[1].pool_size == 4);
  CHECK(fp.levels[2].pool_size == 2);
  CHECK(fp.levels[3].pool_size == 1);
  for (const auto& lvl : fp.levels) CHECK(lvl.dilation == std::vector<Index>{1});

  const auto ma = ma_config(4, 4, {1});
  for (const auto& lvl : ma.levels) CHECK(lvl.pool_size == 1);
  CHECK(ma.levels[0].dilation == std::vector<Index>{8});
  CHECK(ma.levels[1].dilation == std::vector<Index>{4});
  CHECK(ma.levels[2].dilation == std::vector<Index>{2});
  CHECK(ma.levels[3].dilation == std::vector<Index>{1});

  CHECK_THROWS_AS(ma_config(4, 5, {1}), std::invalid_argument);
  CHECK_THROWS_AS(ma_config(4, -1, {1}), std::invalid_argument);
  CHECK_THROWS_AS(ma_config(4, 2, {}), std::invalid_argument);
}

TEST_CASE("profile_area: rectangles and the q ordering") {
  SeparabilityProfile zero;
  CHECK(profile_area(zero, 5.0) == 0.0);

  SeparabilityProfile single{{1.0}, {2.0}};
  CHECK(profile_area(single, 3.0) == 4.0);
  CHECK_THROWS_AS(profile_area(single, 0.0), std::invalid_argument);

  const double a0 = profile_area(separability_profile(ma_config(4, 0, {1})), 16.0);
  const double a3 = profile_area(separability_profile(ma_config(4, 3, {1})), 16.0);
  const double a4 = profile_area(separability_profile(ma_config(4, 4, {1})), 16.0);
  CHECK(a4 > a3);
  CHECK(a3 > a0);
  // hand-integrated values for the three schedules
  CHECK(a0 == 145.0);
  CHECK(a3 == 153.0);
  CHECK(a4 == 170.0);
}

TEST_CASE("pool-dilation products match across q by construction") {
  for (Index q : {Index(0), Index(1), Index(2), Index(3), Index(4)}) {
    const auto cfg = ma_config(4, q, {1, 1});
    const auto fp = ma_config(4, 0, {1, 1});
    for (size_t k = 0; k < cfg.levels.size(); ++k)
      CHECK(cfg.levels[k].pool_size * dilation_l1(cfg.levels[k]) ==
            fp.levels[k].pool_size * dilation_l1(fp.levels[k]));
  }
}

TEST_CASE("coverage check is monotone in the coarsest dilation") {
  const Dims dims{24, 24, 24};
  bool covered = false;
  for (Index r = 1; r <= 40; ++r) {
    ArchitectureConfig cfg{{{2, {r}}}, 0, 1};
    const bool now = covers_whole_image(cfg, dims);
    CHECK((!covered || now));  // once true, never flips back
    covered = now;
  }
  CHECK(covered);
}

TEST_CASE("config invariants are enforced") {
  ArchitectureConfig increasing{{{2, {1}}, {4, {1}}}, 0, 1};
  CHECK_THROWS_AS(increasing.validate(), std::invalid_argument);
  ArchitectureConfig bad_heads{{{2, {1}}}, 0, 0};
  CHECK_THROWS_AS(bad_heads.validate(), std::invalid_argument);
}
