// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cminv/schedules.hpp"

using namespace cminv;

TEST_CASE("karras schedule endpoints and spacing") {
  const auto two = make_karras_schedule(2, 0.002, 80.0, 7.0);
  CHECK(two.levels() == std::vector<double>{80.0, 0.002});

  const auto linear = make_karras_schedule(3, 1.0, 3.0, 1.0);
  REQUIRE(linear.size() == 3);
  CHECK(linear.levels()[0] == 3.0);
  CHECK(linear.levels()[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(linear.levels()[2] == 1.0);

  const auto k18 = make_karras_schedule(18, 0.002, 80.0, 7.0);
  const double hi = std::pow(80.0, 1.0 / 7.0);
  const double lo = std::pow(0.002, 1.0 / 7.0);
  const double second = std::pow(hi + (lo - hi) / 17.0, 7.0);
  CHECK(k18.levels()[0] == 80.0);
  CHECK(k18.levels()[1] == doctest::Approx(second).epsilon(1e-14));
  CHECK(k18.levels().back() == 0.002);
  for (std::size_t i = 1; i < k18.size(); ++i) CHECK(k18.levels()[i] < k18.levels()[i - 1]);
  CHECK(k18.rho() == 7.0);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(make_karras_schedule(1, 0.002, 80.0, 7.0), std::invalid_argument);
  CHECK_THROWS_AS(make_karras_schedule(3, 0.0, 80.0, 7.0), std::invalid_argument);
  CHECK_THROWS_AS(make_karras_schedule(3, 1.0, 0.5, 7.0), std::invalid_argument);
  CHECK_THROWS_AS(make_karras_schedule(3, 0.002, 80.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule({3.0, 3.0, 1.0}, 1.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule({4.0, 1.0}, 1.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule({3.0, 0.5}, 1.0, 3.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule({3.0}, 1.0, 3.0), std::invalid_argument);
  const NoiseSchedule explicit_levels({3.0, 2.0, 1.0}, 1.0, 3.0);
  CHECK_FALSE(explicit_levels.rho().has_value());
  CHECK_THROWS_AS(explicit_levels.with_levels(5), std::logic_error);
  CHECK(make_karras_schedule(3, 0.002, 80.0, 7.0).with_levels(5).size() == 5);
}

TEST_CASE("step pairs") {
  const NoiseSchedule s({3.0, 2.0, 1.0}, 1.0, 3.0);
  const auto pairs = step_pairs(s);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].t == 3.0);
  CHECK(pairs[0].s == 2.0);
  CHECK(pairs[1].t == 2.0);
  CHECK(pairs[1].s == 1.0);
  const auto single = step_pairs(make_karras_schedule(2, 0.002, 80.0, 7.0));
  REQUIRE(single.size() == 1);
  CHECK(single[0].t == 80.0);
  CHECK(single[0].s == 0.002);
}
