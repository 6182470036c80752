#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdlnoise/core.hpp"
#include "mdlnoise/rng.hpp"
#include "mdlnoise/verify.hpp"

namespace mdln {

/// Classes with at most this many members are listed explicitly.
inline constexpr std::uint64_t kExplicitClassLimit = 10'000;

/// Uniformly random size-m subset of {first, ..., first+n-1}, sorted.
[[nodiscard]] inline std::vector<Point> random_subset(std::size_t n, std::size_t m, std::uint64_t seed,
                                                      Point first = 0) {
  if (m > n) throw std::invalid_argument("subset larger than ground set");
  std::vector<Point> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = first + static_cast<Point>(i);
  CounterStream s(derive_key(seed, 0x5b5e7));
  for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + s.below(n - i)]);
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// ---------------------------------------------------------------------------
// Single-distribution testing: point 0 is heavy, points 1..d^2 are light.
// ---------------------------------------------------------------------------

struct ShtBaseSpec {
  std::size_t d = 1;
  Rational gamma{1, 10};
  /// Empty for the null hypothesis, else the d points (in 1..d^2) labeled 1.
  std::optional<std::vector<Point>> planted;
};

struct ShtInstance {
  HypothesisClass cls;
  NoisyDistribution dist;
  Hypothesis bayes;
};

/// {f_0} plus every size-d subset of `points`, listed explicitly when small.
[[nodiscard]] inline HypothesisClass subset_class(std::size_t domain_size, std::vector<Point> points, std::size_t d) {
  auto structured = HypothesisClass::fixed_size_blocks(domain_size, {std::move(points)}, d);
  if (structured.cardinality() <= kExplicitClassLimit) {
    return HypothesisClass::explicit_list(domain_size, structured.enumerate(kExplicitClassLimit), d);
  }
  return structured;
}

/// p(0) = 1 - d gamma, p(x) = gamma/d on 1..d^2; q = 3/4 on the planted set and
/// 1/4 elsewhere, so the label noise is exactly 1/4.
[[nodiscard]] inline ShtInstance make_sht_base(const ShtBaseSpec& spec) {
  const std::size_t d = spec.d;
  if (d == 0) throw InvariantError("d must be >= 1");
  if (spec.gamma <= Rational(0)) throw InvariantError("gamma must be positive");
  const Rational heavy = Rational(1) - Rational(static_cast<std::int64_t>(d)) * spec.gamma;
  if (heavy < Rational(0)) throw InvariantError("d * gamma = " + (Rational(1) - heavy).str() + " exceeds 1");
  const std::size_t n = d * d + 1;
  std::vector<Point> light(d * d);
  for (std::size_t i = 0; i < light.size(); ++i) light[i] = static_cast<Point>(i + 1);

  Hypothesis bayes = Hypothesis::zero(n);
  if (spec.planted) {
    auto r = *spec.planted;
    std::sort(r.begin(), r.end());
    if (r.size() != d) throw InvariantError("planted set must have exactly d points");
    for (Point x : r) {
      if (x == 0 || x > d * d) throw InvariantError("planted point " + std::to_string(x) + " outside 1..d^2");
    }
    bayes = Hypothesis::subset(n, r);
  }
  std::vector<double> marginal(n, (spec.gamma / Rational(static_cast<std::int64_t>(d))).to_double());
  marginal[0] = heavy.to_double();
  std::vector<Rational> bias(n);
  for (std::size_t x = 0; x < n; ++x) bias[x] = bayes(x) ? Rational(3, 4) : Rational(1, 4);
  return {subset_class(n, light, d), NoisyDistribution(std::move(marginal), std::move(bias), Rational(1, 4)), bayes};
}

// ---------------------------------------------------------------------------
// Multi-distribution testing: k blocks of d^2 + 1 points, anchor first.
// ---------------------------------------------------------------------------

struct MshtBlockSpec {
  std::size_t k = 1;
  std::size_t d = 1;
  Rational eps{1, 10};
  /// Block index and the d planted points, as offsets 1..d^2 inside the block.
  std::optional<std::pair<std::size_t, std::vector<Point>>> planted;
};

[[nodiscard]] inline Point block_start(std::size_t block, std::size_t block_size) {
  return static_cast<Point>(block * block_size);
}

/// P_i lives on block i: 1 - 2 d eps at its anchor, 2 eps/d on the other d^2
/// points. The class holds f_0 and every size-d subset of one block's
/// non-anchor points.
[[nodiscard]] inline MdlInstance make_msht_blocks(const MshtBlockSpec& spec) {
  const std::size_t k = spec.k;
  const std::size_t d = spec.d;
  if (k == 0 || d == 0) throw InvariantError("k and d must be >= 1");
  const Rational two_d_eps = Rational(2 * static_cast<std::int64_t>(d)) * spec.eps;
  if (spec.eps <= Rational(0)) throw InvariantError("epsilon must be positive");
  if (two_d_eps > Rational(1)) throw InvariantError("2 d eps = " + two_d_eps.str() + " exceeds 1");
  if (Rational(static_cast<std::int64_t>(d)) < Rational(8) * spec.eps) throw InvariantError("need d >= 8 eps");
  const std::size_t bs = d * d + 1;
  const std::size_t n = k * bs;

  std::vector<std::vector<Point>> blocks(k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t o = 1; o < bs; ++o) blocks[j].push_back(block_start(j, bs) + static_cast<Point>(o));
  }
  Hypothesis bayes = Hypothesis::zero(n);
  if (spec.planted) {
    const auto& [j, offsets] = *spec.planted;
    if (j >= k) throw InvariantError("planted block " + std::to_string(j) + " out of range");
    if (offsets.size() != d) throw InvariantError("planted set must have exactly d points");
    std::vector<Point> pts;
    for (Point o : offsets) {
      if (o == 0 || o >= bs) throw InvariantError("planted offset " + std::to_string(o) + " outside 1..d^2");
      pts.push_back(block_start(j, bs) + o);
    }
    std::sort(pts.begin(), pts.end());
    bayes = Hypothesis::subset(n, pts);
  }
  std::vector<Rational> bias(n);
  for (std::size_t x = 0; x < n; ++x) bias[x] = bayes(x) ? Rational(3, 4) : Rational(1, 4);
  const double light = (two_d_eps / Rational(static_cast<std::int64_t>(d * d))).to_double();
  std::vector<NoisyDistribution> dists;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> m(n, 0.0);
    m[block_start(i, bs)] = (Rational(1) - two_d_eps).to_double();
    for (std::size_t o = 1; o < bs; ++o) m[block_start(i, bs) + o] = light;
    dists.emplace_back(std::move(m), bias, Rational(1, 4));
  }
  auto cls = HypothesisClass::fixed_size_blocks(n, std::move(blocks), d);
  return {std::move(cls), std::move(dists), bayes, Benchmark::RCN};
}

// ---------------------------------------------------------------------------
// Massart-noise testing: anchor with mass 1 - eps, d light points.
// ---------------------------------------------------------------------------

using MassPriorSpec = MassPriors;

inline const Rational kMassNoiseBound{49, 100};

/// Delta_q = (eps/d) sum_{q_x >= 1/2} (2 q_x - 1), the excess error of f_0.
[[nodiscard]] inline Rational mass_gap(const std::vector<Rational>& light_bias, const Rational& eps) {
  Rational acc(0);
  for (const auto& q : light_bias) {
    if (q >= Rational(1, 2)) acc += Rational(2) * q - Rational(1);
  }
  return eps / Rational(static_cast<std::int64_t>(light_bias.size())) * acc;
}

/// One draw from the alternative prior over the d light points, before any
/// rejection. Draw `attempt` is independent of the others.
[[nodiscard]] inline std::vector<Rational> draw_mass_prior(std::size_t d, std::uint64_t seed, std::uint64_t attempt,
                                                           const MassPriorSpec& prior = MassPriorSpec{}) {
  CounterStream s(derive_key(derive_key(seed, 0x3a55), attempt));
  std::vector<Rational> q(d);
  for (auto& v : q) v = s.bernoulli(prior.heavy_prob) ? prior.heavy_bias : Rational(0);
  return q;
}

struct ShtMassSpec {
  std::size_t d = 1;
  Rational eps{1, 10};
  bool alternative = false;
};

struct ShtMassInstance {
  NoisyDistribution dist;
  /// q over the light points 1..d.
  std::vector<Rational> light_bias;
  Rational gap;
  std::uint64_t attempts = 1;
};

inline constexpr std::uint64_t kMassRejectionLimit = 1'000'000;

/// Null: q = 93/200 everywhere. Alternative: light-point biases drawn from
/// the prior and redrawn until Delta_q >= 3 eps / 10.
[[nodiscard]] inline ShtMassInstance make_sht_mass(const ShtMassSpec& spec, std::uint64_t seed,
                                                   const MassPriorSpec& prior = MassPriorSpec{}) {
  const std::size_t d = spec.d;
  if (d == 0) throw InvariantError("d must be >= 1");
  if (!(spec.eps > Rational(0) && spec.eps < Rational(1))) throw InvariantError("epsilon must lie in (0, 1)");
  std::vector<Rational> q(d, prior.null_bias);
  std::uint64_t attempts = 1;
  if (spec.alternative) {
    const Rational need = Rational(3, 10) * spec.eps;
    for (attempts = 1;; ++attempts) {
      if (attempts > kMassRejectionLimit) throw std::runtime_error("rejection sampling did not reach the gap");
      q = draw_mass_prior(d, seed, attempts - 1, prior);
      if (mass_gap(q, spec.eps) >= need) break;
    }
  }
  std::vector<double> marginal(d + 1, (spec.eps / Rational(static_cast<std::int64_t>(d))).to_double());
  marginal[0] = (Rational(1) - spec.eps).to_double();
  std::vector<Rational> bias{prior.null_bias};
  bias.insert(bias.end(), q.begin(), q.end());
  const Rational gap = mass_gap(q, spec.eps);
  return {NoisyDistribution(std::move(marginal), std::move(bias), kMassNoiseBound), std::move(q), gap, attempts};
}

// ---------------------------------------------------------------------------
// Massart-noise MDL: k blocks of d + 1 points, anchor first.
// ---------------------------------------------------------------------------

struct MdlMassSpec {
  std::size_t k = 1;
  std::size_t d = 1;
  Rational eps{1, 10};
  /// One q-vector of length d per block (light points only).
  std::vector<std::vector<Rational>> light_bias;
  MassPriorSpec prior{};
};

struct MdlMassInstance {
  MdlInstance instance;
  /// Excess error of f_0 on each P_i.
  std::vector<Rational> gaps;
};

/// P_i: 1 - eps at anchor i, eps/d on block i's light points. Anchors carry the
/// null bias. The shared Bayes classifier must fit in one block, so at most
/// one block may have biases >= 1/2.
[[nodiscard]] inline MdlMassInstance make_mdl_mass(const MdlMassSpec& spec) {
  const std::size_t k = spec.k;
  const std::size_t d = spec.d;
  if (k == 0 || d == 0) throw InvariantError("k and d must be >= 1");
  if (!(spec.eps > Rational(0) && spec.eps < Rational(1))) throw InvariantError("epsilon must lie in (0, 1)");
  if (spec.light_bias.size() != k) throw InvariantError("need one bias vector per block");
  const std::size_t bs = d + 1;
  const std::size_t n = k * bs;
  std::vector<Rational> bias(n);
  std::vector<std::vector<Point>> blocks(k);
  std::vector<Rational> gaps;
  for (std::size_t j = 0; j < k; ++j) {
    if (spec.light_bias[j].size() != d) throw InvariantError("block " + std::to_string(j) + " bias vector needs d entries");
    bias[block_start(j, bs)] = spec.prior.null_bias;
    for (std::size_t o = 1; o < bs; ++o) {
      bias[block_start(j, bs) + o] = spec.light_bias[j][o - 1];
      blocks[j].push_back(block_start(j, bs) + static_cast<Point>(o));
    }
    gaps.push_back(mass_gap(spec.light_bias[j], spec.eps));
  }
  std::vector<std::uint8_t> bits(n);
  for (std::size_t x = 0; x < n; ++x) bits[x] = bias[x] > Rational(1, 2) ? 1 : 0;
  const double light = (spec.eps / Rational(static_cast<std::int64_t>(d))).to_double();
  std::vector<NoisyDistribution> dists;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> m(n, 0.0);
    m[block_start(i, bs)] = (Rational(1) - spec.eps).to_double();
    for (std::size_t o = 1; o < bs; ++o) m[block_start(i, bs) + o] = light;
    dists.emplace_back(std::move(m), bias, kMassNoiseBound);
  }
  auto cls = HypothesisClass::any_subset_blocks(n, std::move(blocks));
  return {MdlInstance(std::move(cls), std::move(dists), Hypothesis::dense(std::move(bits)), Benchmark::Massart),
          std::move(gaps)};
}

/// Null environment on every block, optionally with one block drawn from the
/// alternative prior (conditioned on Delta_q >= 3 eps / 10).
[[nodiscard]] inline MdlMassInstance make_mdl_mass_planted(std::size_t k, std::size_t d, const Rational& eps,
                                                           std::optional<std::size_t> planted_block,
                                                           std::uint64_t seed) {
  MdlMassSpec spec{k, d, eps, std::vector<std::vector<Rational>>(k, std::vector<Rational>(d, Rational(93, 200))), {}};
  if (planted_block) {
    if (*planted_block >= k) throw InvariantError("planted block out of range");
    spec.light_bias[*planted_block] = make_sht_mass({d, eps, true}, seed).light_bias;
  }
  return make_mdl_mass(spec);
}

// ---------------------------------------------------------------------------
// Generic and random instances
// ---------------------------------------------------------------------------

struct GenericSpec {
  HypothesisClass cls;
  std::vector<std::vector<double>> marginals;
  std::vector<std::vector<Rational>> biases;
  std::vector<Rational> noise_bounds;
  Benchmark benchmark = Benchmark::Massart;
};

/// Shared Bayes label at x: the first distribution with mass there decides;
/// points without mass anywhere follow distribution 0.
[[nodiscard]] inline MdlInstance make_generic(GenericSpec spec) {
  const std::size_t k = spec.marginals.size();
  if (k == 0) throw InvariantError("instance needs at least one distribution");
  if (spec.biases.size() != k || spec.noise_bounds.size() != k) {
    throw InvariantError("marginals, biases and noise bounds must all have k entries");
  }
  const std::size_t n = spec.cls.domain_size();
  std::vector<NoisyDistribution> dists;
  for (std::size_t i = 0; i < k; ++i) {
    dists.emplace_back(std::move(spec.marginals[i]), std::move(spec.biases[i]), spec.noise_bounds[i]);
  }
  std::vector<std::uint8_t> bits(n);
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t owner = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (dists[i].domain_size() == n && dists[i].has_mass(x)) {
        owner = i;
        break;
      }
    }
    if (dists[owner].domain_size() != n) throw InvariantError("distribution has wrong domain size");
    bits[x] = dists[owner].bayes_label(x) ? 1 : 0;
  }
  return {std::move(spec.cls), std::move(dists), Hypothesis::dense(std::move(bits)), spec.benchmark};
}

struct RandomInstanceSpec {
  std::size_t max_domain = 8;
  std::size_t max_k = 4;
  std::size_t max_extra_members = 6;
  bool exact_rcn = false;
};

/// Tiny random instance: an explicit class of random hypotheses containing a
/// random f*, random marginals (some points may get no mass) and Massart
/// biases agreeing with f*. Noise bounds are multiples of 1/20 below 1/2.
[[nodiscard]] inline MdlInstance random_tiny_instance(std::uint64_t seed, const RandomInstanceSpec& spec = {}) {
  CounterStream s(derive_key(seed, 0x7175));
  const std::size_t n = 1 + s.below(spec.max_domain);
  const std::size_t k = 1 + s.below(spec.max_k);
  auto random_bits = [&] {
    std::vector<std::uint8_t> b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(s.below(2));
    return Hypothesis::dense(std::move(b));
  };
  std::vector<Hypothesis> members{random_bits()};
  const Hypothesis bayes = members.front();
  const std::size_t extra = s.below(spec.max_extra_members + 1);
  for (std::size_t i = 0; i < extra; ++i) {
    auto h = random_bits();
    if (std::find(members.begin(), members.end(), h) == members.end()) members.push_back(std::move(h));
  }
  // Shuffle so f* is not always first.
  for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[s.below(i)]);
  auto probe = HypothesisClass::explicit_list(n, members, 0);
  const std::size_t vc = n <= 20 ? brute_force_vc_dim(probe) : 1;
  auto cls = HypothesisClass::explicit_list(n, std::move(members), std::max<std::size_t>(vc, 1));

  std::vector<NoisyDistribution> dists;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) {
      v = s.below(4) == 0 ? 0.0 : s.uniform() + 1e-3;
      total += v;
    }
    if (total == 0.0) {
      w[s.below(n)] = 1.0;
      total = 1.0;
    }
    for (auto& v : w) v /= total;
    const Rational eta(static_cast<std::int64_t>(s.below(10)), 20);
    std::vector<Rational> q(n);
    for (std::size_t x = 0; x < n; ++x) {
      const Rational flip = spec.exact_rcn ? eta : Rational(static_cast<std::int64_t>(s.below(100)), 99) * eta;
      q[x] = bayes(x) ? Rational(1) - flip : flip;
    }
    dists.emplace_back(std::move(w), std::move(q), eta);
  }
  return {std::move(cls), std::move(dists), bayes, spec.exact_rcn ? Benchmark::RCN : Benchmark::Massart};
}

/// Canonical exact-RCN suite on 10 points: anchor 0 plus one block {1..9}
/// with size-3 subsets (VC dimension 3), f* = {1, 4, 7}. Each distribution
/// keeps 1/10 on the anchor and spreads the rest over the block with seeded
/// random weights, so the k sources see different parts of the block.
[[nodiscard]] inline MdlInstance make_rcn_suite(std::size_t k, const Rational& eta, std::uint64_t seed) {
  if (k == 0) throw InvariantError("k must be >= 1");
  constexpr std::size_t n = 10;
  std::vector<Point> block{1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto cls = HypothesisClass::fixed_size_blocks(n, {block}, 3);
  const Hypothesis bayes = Hypothesis::subset(n, {1, 4, 7});
  std::vector<Rational> q(n);
  for (std::size_t x = 0; x < n; ++x) q[x] = bayes(x) ? Rational(1) - eta : eta;
  std::vector<NoisyDistribution> dists;
  for (std::size_t i = 0; i < k; ++i) {
    CounterStream s(derive_key(derive_key(seed, 0x2c11), i));
    std::vector<double> w(n, 0.0);
    double total = 0.0;
    for (std::size_t x = 1; x < n; ++x) {
      // Squaring skews the weights so the sources differ visibly.
      const double u = s.uniform() + 0.05;
      w[x] = u * u;
      total += w[x];
    }
    for (std::size_t x = 1; x < n; ++x) w[x] *= 0.9 / total;
    w[0] = 0.1;
    dists.emplace_back(std::move(w), q, eta);
  }
  return {std::move(cls), std::move(dists), bayes, Benchmark::RCN};
}

}  // namespace mdln
