#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mdlnoise/harness.hpp"

using namespace mdln;

namespace {

// Oracle: Wilson bounds as the two roots of (p - phat)^2 = z^2 p (1 - p) / n.
std::pair<double, double> wilson_roots(double s, double n) {
  const double z = 1.959963984540054;
  const double ph = s / n;
  const double a = 1 + z * z / n;
  const double b = -(2 * ph + z * z / n);
  const double c = ph * ph;
  const double disc = std::sqrt(std::max(0.0, b * b - 4 * a * c));
  return {(-b - disc) / (2 * a), (-b + disc) / (2 * a)};
}

AlgorithmConfig msht_config(Rational eps) {
  AlgorithmConfig a;
  a.id = AlgorithmId::Msht;
  a.eps = eps;
  a.delta = 0.1;
  return a;
}

}  // namespace

TEST_CASE("Wilson interval") {
  for (std::uint64_t n : {1, 7, 50, 1000}) {
    for (std::uint64_t s = 0; s <= n; s += std::max<std::uint64_t>(1, n / 7)) {
      const auto w = wilson_interval(s, n);
      const auto [lo, hi] = wilson_roots(static_cast<double>(s), static_cast<double>(n));
      CHECK(w.lo == Catch::Approx(lo).margin(1e-12));
      CHECK(w.hi == Catch::Approx(hi).margin(1e-12));
      CHECK(w.lo <= static_cast<double>(s) / static_cast<double>(n));
      CHECK(w.hi >= static_cast<double>(s) / static_cast<double>(n));
    }
  }
  CHECK(wilson_interval(0, 0).lo == 0.0);
  CHECK(wilson_interval(0, 0).hi == 1.0);
}

TEST_CASE("Wilson interval covers p = 0.9 at roughly the nominal rate") {
  CounterStream r(77);
  constexpr int meta = 400;
  int covered = 0;
  for (int m = 0; m < meta; ++m) {
    std::uint64_t s = 0;
    for (int i = 0; i < 100; ++i) s += r.bernoulli(Rational(9, 10)) ? 1 : 0;
    const auto w = wilson_interval(s, 100);
    covered += (w.lo <= 0.9 && 0.9 <= w.hi) ? 1 : 0;
  }
  // Nominal 95%; four standard errors below.
  CHECK(covered >= static_cast<int>(meta * (0.95 - 4 * std::sqrt(0.95 * 0.05 / meta))));
}

TEST_CASE("single-trial summary") {
  const auto inst = make_rcn_suite(2, Rational(1, 4), 0);
  AlgorithmConfig a;
  a.eps = Rational(1, 5);
  const auto set = run_trials(a, inst, "suite", 1, 5);
  CHECK(set.summary.trials == 1);
  CHECK(set.summary.mean_total_samples == static_cast<double>(set.records[0].total_samples));
  CHECK(set.summary.max_total_samples == set.records[0].total_samples);
  CHECK((set.summary.success_rate == 0.0 || set.summary.success_rate == 1.0));
  CHECK(set.records[0].samples_per_distribution.size() == 2);
  CHECK_THROWS_AS(run_trials(a, inst, "suite", 0, 5), ConfigError);
}

TEST_CASE("trials are deterministic and independent of thread count") {
  const auto inst = make_rcn_suite(3, Rational(1, 5), 2);
  AlgorithmConfig a;
  a.id = AlgorithmId::MdlMm;
  a.eps = Rational(1, 4);
  const auto one = run_trials(a, inst, "suite", 6, 42, 1);
  const auto many = run_trials(a, inst, "suite", 6, 42, 3);
  REQUIRE(one.records.size() == many.records.size());
  for (std::size_t t = 0; t < one.records.size(); ++t) {
    CHECK(one.records[t].samples_per_distribution == many.records[t].samples_per_distribution);
    CHECK(one.records[t].max_excess == many.records[t].max_excess);
    CHECK(one.records[t].success == many.records[t].success);
    CHECK(one.records[t].seed == derive_key(42, t));
  }
}

TEST_CASE("learning trial records removals and rounds") {
  const auto inst = make_rcn_suite(4, Rational(1, 4), 1);
  AlgorithmConfig a;
  a.eps = Rational(1, 5);
  a.force_cond = false;
  const auto r = run_trial(a, inst, "suite", 3, 0);
  CHECK(r.path == "joint");
  CHECK(r.rounds >= 1);
  CHECK(r.rounds <= halving_rounds(4));
  CHECK(r.sub_rounds_per_round.size() == r.rounds);
  CHECK(r.halving_rounds_ok <= r.rounds);
  CHECK(r.removal_violations == 0);
  std::uint64_t sum = 0;
  for (auto c : r.samples_per_distribution) sum += c;
  CHECK(sum == r.total_samples);
}

TEST_CASE("required decisions") {
  CHECK(required_decision(0.25, 0.12) == Decision::YES);
  CHECK(required_decision(0.26, 0.12) == Decision::YES);
  CHECK_FALSE(required_decision(0.3, 0.12).has_value());
  CHECK(required_decision(0.37, 0.12) == Decision::NO);
}

TEST_CASE("instance builder") {
  InstanceConfig ic;
  ic.generator = "sht-base";
  ic.d = 3;
  const auto a = build_instance(ic, Rational(1, 10));
  CHECK(a.k() == 1);
  CHECK(a.domain_size() == 10);
  CHECK(a.shared_bayes().is_zero());
  ic.alternative = true;
  // gamma = 2 eps, so f_0 has error 1/4 + eps.
  CHECK(exact_error(Hypothesis::zero(10), build_instance(ic, Rational(1, 10)).distribution(0)) ==
        Catch::Approx(0.35).margin(1e-14));
  ic.generator = "nope";
  CHECK_THROWS_AS(build_instance(ic, Rational(1, 10)), ConfigError);
  ic.generator = "sht-base";
  ic.d = 4;
  ic.gamma = Rational(3, 10);
  try {
    (void)build_instance(ic, Rational(1, 10));
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "instance");
  }
  for (const auto& g : generator_names()) {
    InstanceConfig c;
    c.generator = g;
    c.k = 2;
    c.d = 2;
    c.planted_block = g == "mdl-mass" || g == "msht-blocks" ? std::optional<std::size_t>(1) : std::nullopt;
    CHECK_NOTHROW(build_instance(c, Rational(1, 10)));
  }
}

TEST_CASE("calibration returns lo when already good enough") {
  const auto inst = make_rcn_suite(2, Rational(1, 4), 0);
  AlgorithmConfig a;
  a.eps = Rational(1, 5);
  const auto r = calibrate_csl(a, inst, 0.0, 3, 0.5, 4.0, 1);
  CHECK(r.c_sl == 0.5);
  CHECK(r.steps.size() == 1);

  // A class with one member is always learned exactly.
  auto single = HypothesisClass::explicit_list(2, {Hypothesis::zero(2)}, 1);
  const MdlInstance trivial(single, {NoisyDistribution({0.5, 0.5}, {Rational(1, 10), Rational(1, 10)}, Rational(1, 10))},
                            Hypothesis::zero(2), Benchmark::RCN);
  const auto t = calibrate_csl(a, trivial, 1.0, 5, 0.25, 4.0, 1);
  CHECK(t.c_sl == 0.25);
  CHECK(t.success_rate == 1.0);
}

TEST_CASE("calibration reports an exhausted range") {
  // eps far below what a handful of draws can resolve.
  const auto inst = make_rcn_suite(2, Rational(1, 4), 0);
  AlgorithmConfig a;
  a.eps = Rational(1, 100);
  a.force_cond = true;
  try {
    (void)calibrate_csl(a, inst, 1.0, 4, 1e-4, 2e-4, 3);
    FAIL("expected range exhaustion");
  } catch (const CalibrationError& e) {
    CHECK(std::string(e.what()).find("range exhausted") != std::string::npos);
  }
  CHECK_THROWS_AS(calibrate_csl(a, inst, 1.5, 4, 1, 2, 3), ConfigError);
  CHECK_THROWS_AS(calibrate_csl(a, inst, 0.5, 4, 2, 1, 3), ConfigError);
}

TEST_CASE("calibration bisects towards the threshold") {
  const auto inst = make_rcn_suite(2, Rational(1, 4), 0);
  AlgorithmConfig a;
  a.eps = Rational(1, 5);
  a.force_cond = true;
  const auto r = calibrate_csl(a, inst, 0.9, 20, 0.01, 8.0, 11);
  CHECK(r.success_rate >= 0.9);
  CHECK(r.steps.size() == 2 + kCalibrationIterations);
  // Every probed point at or above the answer reached the target.
  for (const auto& s : r.steps) {
    if (s.c_sl > r.c_sl) CHECK(s.success_rate >= 0.9);
  }
}

TEST_CASE("agnostic MSHT sweep over k costs k T_C per row") {
  SweepSpec s;
  s.parameter = SweepParameter::K;
  s.grid = {"1", "2", "4"};
  s.algorithm = msht_config(Rational(3, 20));
  s.instance.generator = "msht-blocks";
  s.instance.d = 3;
  s.trials = 2;
  s.seed_base = 9;
  // With VC dimension 3 and eps = 3/20 the learned branch runs.
  const auto rows = sweep(s);
  REQUIRE(rows.size() == 3);
  const double per = static_cast<double>(sample_size_sl(3, 0.25, 0.15 / 48, 0.1 / 3) + sample_size_learned(0.25, 0.15, 0.1));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(rows[j].summary.mean_total_samples == std::stod(s.grid[j]) * per);
    CHECK(rows[j].grid_value == s.grid[j]);
  }
  s.grid.clear();
  CHECK_THROWS_AS(sweep(s), ConfigError);
  s.grid = {"0"};
  CHECK_THROWS_AS(sweep(s), ConfigError);
}

TEST_CASE("agnostic MSHT rows equal k T_C") {
  // Inline instance built on a class with VC dimension 9 so d eps >= 1.
  for (std::size_t k : {1, 3}) {
    const auto blocks = make_msht_blocks({k, 3, Rational(3, 20), std::nullopt});
    std::vector<std::vector<Point>> bl;
    for (std::size_t b = 0; b < k; ++b) {
      std::vector<Point> pts;
      for (std::size_t o = 1; o <= 9; ++o) pts.push_back(static_cast<Point>(b * 10 + o));
      bl.push_back(pts);
    }
    InstanceConfig ic;
    ic.inline_instance = MdlInstance(HypothesisClass::any_subset_blocks(blocks.domain_size(), bl),
                                     blocks.distributions(), blocks.shared_bayes(), Benchmark::RCN);
    const auto set = run_trials(msht_config(Rational(3, 20)), build_instance(ic, Rational(3, 20)), "inline", 3, 1);
    for (const auto& r : set.records) {
      CHECK(r.path == "agnostic");
      CHECK(r.total_samples == k * sample_size_agnostic(0.15, 0.1));
      CHECK(r.success);
    }
  }
}

TEST_CASE("grid values") {
  AlgorithmConfig a;
  InstanceConfig ic;
  apply_grid_value(SweepParameter::Epsilon, "1/8", a, ic);
  CHECK(a.eps == Rational(1, 8));
  CHECK_FALSE(ic.eps.has_value());
  apply_grid_value(SweepParameter::Eta, "0.2", a, ic);
  CHECK(ic.eta == Rational(1, 5));
  apply_grid_value(SweepParameter::D, "7", a, ic);
  CHECK(ic.d == 7);
  CHECK_THROWS_AS(apply_grid_value(SweepParameter::K, "3x", a, ic), ConfigError);
  CHECK(parse_algorithm("mdl-to-msht") == AlgorithmId::MdlToMsht);
  CHECK_THROWS_AS(parse_algorithm("x"), ConfigError);
  CHECK(parse_sweep_parameter("eta") == SweepParameter::Eta);
}
