#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "mdlnoise/instances.hpp"
#include "mdlnoise/verify.hpp"

using namespace mdln;

namespace {

double total_mass(const NoisyDistribution& P) {
  return std::accumulate(P.marginal().begin(), P.marginal().end(), 0.0);
}

}  // namespace

TEST_CASE("SHT-Base null and alternative errors") {
  for (std::size_t d : {1, 2, 3, 4}) {
    const Rational gamma(1, static_cast<std::int64_t>(2 * d + 1));
    const auto h0 = make_sht_base({d, gamma, std::nullopt});
    CHECK(total_mass(h0.dist) == Catch::Approx(1.0).margin(1e-12));
    CHECK(h0.dist.is_exact_rcn(Rational(1, 4)));
    CHECK(h0.bayes.is_zero());
    CHECK(exact_error(Hypothesis::zero(d * d + 1), h0.dist) == Catch::Approx(0.25).margin(1e-15));

    const auto R = random_subset(d * d, d, 11 + d, 1);
    const auto h1 = make_sht_base({d, gamma, R});
    CHECK(h1.dist.is_exact_rcn(Rational(1, 4)));
    CHECK(h1.cls.contains(h1.bayes));
    CHECK(h1.bayes.ones() == R);
    CHECK(exact_error(Hypothesis::zero(d * d + 1), h1.dist) ==
          Catch::Approx(0.25 + gamma.to_double() / 2).margin(1e-15));
    CHECK(exact_error(h1.bayes, h1.dist) == Catch::Approx(0.25).margin(1e-15));
  }
}

TEST_CASE("SHT-Base class representation follows the enumeration limit") {
  CHECK(make_sht_base({2, Rational(1, 4), std::nullopt}).cls.kind() == HypothesisClass::Kind::Explicit);
  CHECK(make_sht_base({3, Rational(1, 4), std::nullopt}).cls.kind() == HypothesisClass::Kind::Explicit);
  // C(16, 4) = 1820 is still listed; C(25, 5) = 53130 is not.
  CHECK(make_sht_base({4, Rational(1, 5), std::nullopt}).cls.kind() == HypothesisClass::Kind::Explicit);
  const auto big = make_sht_base({5, Rational(1, 10), std::nullopt});
  CHECK(big.cls.kind() == HypothesisClass::Kind::ZeroPlusFixedSizeBlockSubsets);
  CHECK(big.cls.vc_dim() == 5);
  CHECK(make_sht_base({2, Rational(1, 4), std::nullopt}).cls.cardinality() == 1 + 6);
  CHECK(brute_force_vc_dim(make_sht_base({2, Rational(1, 4), std::nullopt}).cls) == 2);
}

TEST_CASE("SHT-Base rejects infeasible parameters") {
  CHECK_THROWS_AS(make_sht_base({4, Rational(3, 10), std::nullopt}), InvariantError);
  CHECK_THROWS_AS(make_sht_base({2, Rational(1, 4), std::vector<Point>{0, 1}}), InvariantError);
  CHECK_THROWS_AS(make_sht_base({2, Rational(1, 4), std::vector<Point>{1}}), InvariantError);
  CHECK_THROWS_AS(make_sht_base({2, Rational(1, 4), std::vector<Point>{1, 5}}), InvariantError);
}

TEST_CASE("MSHT blocks") {
  const std::size_t k = 4, d = 3;
  const Rational eps(3, 20);
  const auto null = make_msht_blocks({k, d, eps, std::nullopt});
  CHECK(null.domain_size() == k * (d * d + 1));
  CHECK(null.hypothesis_class().vc_dim() == d);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& P = null.distribution(i);
    CHECK(total_mass(P) == Catch::Approx(1.0).margin(1e-12));
    CHECK(P.is_exact_rcn(Rational(1, 4)));
    CHECK(exact_error(Hypothesis::zero(null.domain_size()), P) == Catch::Approx(0.25).margin(1e-15));
    // Identical up to a shift of the domain.
    for (std::size_t o = 0; o < d * d + 1; ++o) {
      CHECK(P.marginal()[i * (d * d + 1) + o] == null.distribution(0).marginal()[o]);
    }
  }
  const auto planted = make_msht_blocks({k, d, eps, std::pair<std::size_t, std::vector<Point>>{2, {1, 5, 9}}});
  CHECK(planted.shared_bayes().ones() == std::vector<Point>{21, 25, 29});
  for (std::size_t i = 0; i < k; ++i) {
    const double err = exact_error(Hypothesis::zero(planted.domain_size()), planted.distribution(i));
    CHECK(err == Catch::Approx(i == 2 ? 0.25 + eps.to_double() : 0.25).margin(1e-14));
  }
  CHECK_THROWS_AS(make_msht_blocks({2, 4, Rational(3, 20), std::nullopt}), InvariantError);
  CHECK_THROWS_AS(make_msht_blocks({2, 1, Rational(1, 4), std::nullopt}), InvariantError);
}

TEST_CASE("MSHT class VC dimension by exhaustive shattering") {
  for (std::size_t d : {1, 2}) {
    const auto inst = make_msht_blocks({2, d, Rational(1, 10), std::nullopt});
    CHECK(brute_force_vc_dim(inst.hypothesis_class()) == d);
  }
}

TEST_CASE("mass priors match in the first moment exactly") {
  const MassPriorSpec p;
  CHECK(p.heavy_bias * p.heavy_prob == p.null_bias);
  CHECK(p.null_bias == Rational::parse("0.465"));
}

TEST_CASE("SHT-Mass null has no gap and the alternative clears 3 eps / 10") {
  const auto h0 = make_sht_mass({20, Rational(1, 10), false}, 1);
  CHECK(h0.gap == Rational(0));
  for (const auto& q : h0.light_bias) CHECK(q == Rational(93, 200));
  CHECK(total_mass(h0.dist) == Catch::Approx(1.0).margin(1e-12));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto h1 = make_sht_mass({20, Rational(1, 10), true}, seed);
    CHECK(h1.gap >= Rational(3, 100));
    CHECK(h1.gap == mass_gap(h1.light_bias, Rational(1, 10)));
    for (const auto& q : h1.light_bias) CHECK((q == Rational(3, 4) || q == Rational(0)));
    // The gap equals the excess error of f_0.
    CHECK(excess_error(Hypothesis::zero(21), h1.dist) == Catch::Approx(h1.gap.to_double()).margin(1e-14));
  }
}

TEST_CASE("SHT-Mass prior mean of the gap is 0.31 eps") {
  const std::size_t d = 10;
  const Rational eps(1, 5);
  constexpr int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int a = 0; a < n; ++a) {
    const double g = mass_gap(draw_mass_prior(d, 77, static_cast<std::uint64_t>(a)), eps).to_double();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - 0.31 * eps.to_double()) < 4 * sd);
}

TEST_CASE("MDL-Mass instances") {
  const std::size_t k = 3, d = 4;
  const Rational eps(1, 10);
  const auto null = make_mdl_mass_planted(k, d, eps, std::nullopt, 3);
  CHECK(null.instance.domain_size() == k * (d + 1));
  CHECK(null.instance.shared_bayes().is_zero());
  CHECK(null.instance.benchmark() == Benchmark::Massart);
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(null.gaps[i] == Rational(0));
    CHECK(null.instance.distribution(i).noise_bound() == Rational(49, 100));
    CHECK(null.instance.distribution(i).bayes_error() == Catch::Approx(0.465).margin(1e-14));
  }
  const auto planted = make_mdl_mass_planted(k, d, eps, 1, 3);
  CHECK(planted.gaps[1] >= Rational(3, 100));
  CHECK(excess_error(Hypothesis::zero(planted.instance.domain_size()), planted.instance.distribution(1)) ==
        Catch::Approx(planted.gaps[1].to_double()).margin(1e-14));
  CHECK(planted.instance.hypothesis_class().vc_dim() == d);
  // Two planted blocks cannot share a Bayes classifier in the class.
  MdlMassSpec two{2, 2, eps, {{Rational(3, 4), Rational(0)}, {Rational(3, 4), Rational(0)}}, {}};
  CHECK_THROWS_AS(make_mdl_mass(two), InvariantError);
}

TEST_CASE("generic instances") {
  auto cls = HypothesisClass::any_subset_blocks(3, {{0, 1, 2}});
  // Realizable single source.
  const auto r = make_generic({cls, {{0.5, 0.5, 0.0}}, {{Rational(1), Rational(0), Rational(0)}}, {Rational(0)},
                               Benchmark::RCN});
  CHECK(r.minimax_bayes_error() == 0.0);
  CHECK(r.shared_bayes() == Hypothesis::subset(3, {0}));
  // Exact RCN accepted.
  CHECK_NOTHROW(make_generic({cls, {{0.2, 0.3, 0.5}}, {{Rational(4, 5), Rational(1, 5), Rational(4, 5)}},
                              {Rational(1, 5)}, Benchmark::RCN}));
  // A bias of exactly 1/2 is rejected.
  CHECK_THROWS_AS(make_generic({cls, {{0.2, 0.3, 0.5}}, {{Rational(1, 2), Rational(0), Rational(0)}},
                                {Rational(2, 5)}, Benchmark::Massart}),
                  InvariantError);
}

TEST_CASE("generators are pure functions of their inputs") {
  CHECK(random_subset(16, 4, 5, 1) == random_subset(16, 4, 5, 1));
  CHECK(make_sht_mass({30, Rational(1, 10), true}, 9).light_bias ==
        make_sht_mass({30, Rational(1, 10), true}, 9).light_bias);
  const auto a = random_tiny_instance(4), b = random_tiny_instance(4);
  CHECK(a.shared_bayes() == b.shared_bayes());
  CHECK(a.distribution(0).marginal() == b.distribution(0).marginal());
  const auto s1 = make_rcn_suite(4, Rational(1, 4), 1), s2 = make_rcn_suite(4, Rational(1, 4), 1);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s1.distribution(i).marginal() == s2.distribution(i).marginal());
}

TEST_CASE("random tiny instances are valid and varied") {
  std::size_t rcn = 0;
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto inst = random_tiny_instance(s);
    CHECK(inst.domain_size() <= 8);
    CHECK(inst.k() <= 4);
    CHECK(inst.hypothesis_class().contains(inst.shared_bayes()));
    const auto exact = random_tiny_instance(s, {8, 4, 6, true});
    for (const auto& P : exact.distributions()) rcn += P.is_exact_rcn(P.noise_bound()) ? 1 : 0;
  }
  CHECK(rcn > 0);
}

TEST_CASE("RCN suite") {
  const auto inst = make_rcn_suite(4, Rational(1, 4), 0);
  CHECK(inst.hypothesis_class().vc_dim() == 3);
  CHECK(inst.benchmark() == Benchmark::RCN);
  for (const auto& P : inst.distributions()) {
    CHECK(total_mass(P) == Catch::Approx(1.0).margin(1e-12));
    CHECK(P.bayes_error() == Catch::Approx(0.25).margin(1e-14));
  }
}
