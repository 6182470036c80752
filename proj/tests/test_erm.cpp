#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mdlnoise/erm.hpp"

using namespace mdln;

namespace {

// Oracle: scan every member and keep the first minimum in enumeration order
// (f_0 first, then blocks in order).
std::uint64_t brute_force_min(const HypothesisClass& cls, const PointCounts& c) {
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  for (const auto& h : cls.enumerate()) best = std::min(best, count_mistakes(h, c));
  return best;
}

PointCounts random_counts(CounterStream& s, std::size_t n, std::uint64_t max_per_point) {
  PointCounts c(n);
  for (std::size_t x = 0; x < n; ++x) {
    const auto ones = s.below(max_per_point + 1);
    const auto zeros = s.below(max_per_point + 1);
    for (std::uint64_t i = 0; i < ones; ++i) c.add(static_cast<Point>(x), 1);
    for (std::uint64_t i = 0; i < zeros; ++i) c.add(static_cast<Point>(x), 0);
  }
  if (c.total == 0) c.add(0, 0);
  return c;
}

}  // namespace

TEST_CASE("explicit ERM picks the unique minimizer") {
  auto cls = HypothesisClass::explicit_list(2, {Hypothesis::zero(2), Hypothesis::subset(2, {1})}, 1);
  const Sample s{{1, 1}, {1, 1}, {0, 0}};
  const auto r = erm_detailed(cls, PointCounts::from(2, s));
  CHECK(r.hypothesis == Hypothesis::subset(2, {1}));
  CHECK(r.mistakes == 0);
  CHECK(empirical_error(Hypothesis::zero(2), s) == Rational(2, 3));
}

TEST_CASE("explicit ERM breaks ties by lowest index") {
  auto cls = HypothesisClass::explicit_list(2, {Hypothesis::subset(2, {0}), Hypothesis::subset(2, {1})}, 1);
  const Sample s{{0, 1}, {1, 1}};
  CHECK(erm(cls, s) == Hypothesis::subset(2, {0}));
}

TEST_CASE("all-zero labels give f_0") {
  auto cls = HypothesisClass::fixed_size_blocks(6, {{1, 2, 3}, {4, 5}}, 2);
  const Sample s{{1, 0}, {2, 0}, {4, 0}, {0, 0}};
  const auto r = erm_detailed(cls, PointCounts::from(6, s));
  CHECK(r.hypothesis.is_zero());
  CHECK(r.mistakes == 0);
}

TEST_CASE("fixed-size block ERM on a worked example") {
  auto cls = HypothesisClass::fixed_size_blocks(5, {{1, 2, 3, 4}}, 2);
  Sample s;
  for (int i = 0; i < 3; ++i) s.push_back({1, 1});
  s.push_back({2, 1});
  s.push_back({2, 0});
  s.push_back({2, 0});
  s.push_back({3, 0});
  s.push_back({4, 1});
  s.push_back({4, 1});
  const auto c = PointCounts::from(5, s);
  const auto r = erm_detailed(cls, c);
  CHECK(r.hypothesis == Hypothesis::subset(5, {1, 4}));
  CHECK(r.mistakes == brute_force_min(cls, c));
}

TEST_CASE("any-size ERM keeps only strictly positive gains") {
  auto cls = HypothesisClass::any_subset_blocks(4, {{0, 1, 2, 3}});
  const Sample s{{0, 1}, {1, 1}, {1, 0}, {2, 0}};
  CHECK(erm(cls, s) == Hypothesis::subset(4, {0}));
}

TEST_CASE("f_0 wins ties against blocks, earlier blocks win ties against later ones") {
  auto cls = HypothesisClass::fixed_size_blocks(4, {{0, 1}, {2, 3}}, 1);
  const Sample tie{{0, 1}, {0, 0}};
  CHECK(erm(cls, tie).is_zero());
  const Sample both{{0, 1}, {2, 1}};
  CHECK(erm(cls, both) == Hypothesis::subset(4, {0}));
}

TEST_CASE("structured ERM matches brute force on random cases") {
  CounterStream s(2024);
  for (int rep = 0; rep < 400; ++rep) {
    const std::size_t n = 2 + s.below(9);
    std::vector<Point> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = static_cast<Point>(i);
    // Random partition of a random subset of points into blocks.
    std::vector<std::vector<Point>> blocks;
    std::vector<Point> cur;
    for (Point x : pts) {
      if (s.below(4) == 0) continue;
      cur.push_back(x);
      if (s.below(3) == 0) {
        blocks.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) blocks.push_back(cur);
    if (blocks.empty()) blocks.push_back({0});
    const auto c = random_counts(s, n, 4);
    if (s.below(2) == 0) {
      auto cls = HypothesisClass::any_subset_blocks(n, blocks);
      const auto r = erm_detailed(cls, c);
      REQUIRE(cls.contains(r.hypothesis));
      REQUIRE(r.mistakes == count_mistakes(r.hypothesis, c));
      REQUIRE(r.mistakes == brute_force_min(cls, c));
    } else {
      std::size_t smallest = blocks.front().size();
      for (const auto& b : blocks) smallest = std::min(smallest, b.size());
      auto cls = HypothesisClass::fixed_size_blocks(n, blocks, 1 + s.below(smallest));
      const auto r = erm_detailed(cls, c);
      REQUIRE(cls.contains(r.hypothesis));
      REQUIRE(r.mistakes == count_mistakes(r.hypothesis, c));
      REQUIRE(r.mistakes == brute_force_min(cls, c));
    }
  }
}

TEST_CASE("ERM rejects empty samples and mismatched domains") {
  auto cls = HypothesisClass::any_subset_blocks(3, {{0, 1}});
  CHECK_THROWS_AS(erm(cls, PointCounts(3)), std::invalid_argument);
  CHECK_THROWS_AS(erm(cls, Sample{}), std::invalid_argument);
  PointCounts other(4);
  other.add(0, 1);
  CHECK_THROWS_AS(erm(cls, other), std::invalid_argument);
}

TEST_CASE("sample sizes against hand-evaluated formulas") {
  CHECK(sample_size_sl(10, 0.0, 0.1, 0.1, SampleSizeParams(1.0)) == 254);
  CHECK(sample_size_test(0.0, 0.1, 0.1) == 480);
  CHECK(sample_size_test(0.25, 0.1, 0.05) == 12395);
  // 72 ln 40 / 0.01 = 26559.93...
  CHECK(sample_size_agnostic(0.1, 0.05) == 26560);
  CHECK(sample_size_learned(0.25, 0.1, 0.1) == 7862);
}

TEST_CASE("sample size identities") {
  CHECK(sample_size_learned_raw(0.0, 0.1, 0.1) * 2.0 == Catch::Approx(sample_size_learned_raw(0.25, 0.1, 0.1)).epsilon(1e-15));
  CHECK(sample_size_learned_raw(0.25, 0.2, 0.3) == Catch::Approx(192.0 * std::log(6.0 / 0.3) / 0.2).epsilon(1e-15));
  for (double nu : {0.0, 0.05, 0.1, 0.3}) {
    CHECK(sample_size_test(nu, 0.1, 0.1) >= sample_size_test(0.0, 0.1, 0.1));
  }
  CHECK(sample_size_sl(3, 0.25, 0.2, 0.2) == static_cast<std::uint64_t>(std::ceil(8.0 * (3 * std::log(5.0) + std::log(5.0)) / 0.1)));
  // Tiny inputs still give at least one draw.
  CHECK(sample_size_test(0.0, 0.99, 0.99) >= 1);
}

TEST_CASE("sample size domain errors") {
  CHECK_THROWS_AS(sample_size_sl(1, 0.5, 0.1, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_size_sl(1, 0.49, 1.0, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_size_sl(0, 0.1, 0.1, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_size_test(-0.1, 0.1, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_size_agnostic(1.0, 0.1), std::domain_error);
  CHECK_THROWS_AS(sample_size_agnostic(0.1, 0.0), std::domain_error);
  CHECK_THROWS_AS(sample_size_learned(0.5, 0.1, 0.1), std::domain_error);
  CHECK_THROWS_AS(SampleSizeParams(0.0), std::invalid_argument);
}
