#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mdlnoise/core.hpp"

namespace mdln {

// ---------------------------------------------------------------------------
// Population-level errors
// ---------------------------------------------------------------------------

/// err(f; P) = sum_x p(x) * (f(x) = 1 ? 1 - q_x : q_x).
[[nodiscard]] inline double exact_error(const Hypothesis& f, const NoisyDistribution& P) {
  if (f.domain_size() != P.domain_size()) throw std::invalid_argument("hypothesis and distribution domains differ");
  double acc = 0.0;
  const auto& p = P.marginal();
  const auto& q = P.bias_double();
  for (std::size_t x = 0; x < p.size(); ++x) acc += p[x] * (f(x) ? 1.0 - q[x] : q[x]);
  return acc;
}

/// err(f) - err(f*) through the pointwise identity
/// sum_x p(x) (1 - 2 eta*(x)) [f(x) != f*(x)].
[[nodiscard]] inline double excess_error(const Hypothesis& f, const NoisyDistribution& P) {
  if (f.domain_size() != P.domain_size()) throw std::invalid_argument("hypothesis and distribution domains differ");
  double acc = 0.0;
  const auto& p = P.marginal();
  for (std::size_t x = 0; x < p.size(); ++x) {
    if ((f(x) != 0) != P.bayes_label(x)) acc += p[x] * (1.0 - 2.0 * P.pointwise_noise(x).to_double());
  }
  return acc;
}

struct SuccessReport {
  bool success = false;
  double max_excess = 0.0;
  /// err(f_i; P_i) - OPT_i per distribution.
  std::vector<double> per_distribution;
};

/// Absolute slack when comparing a floating excess against epsilon.
inline constexpr double kSuccessTolerance = 1e-12;

/// Benchmark target OPT_i: eta_i (RCN), max_j eta_j* (minimax), eta_i* (Massart).
[[nodiscard]] inline std::vector<double> benchmark_targets(const MdlInstance& inst, Benchmark benchmark) {
  std::vector<double> out;
  const double mm = inst.minimax_bayes_error();
  for (const auto& P : inst.distributions()) {
    switch (benchmark) {
      case Benchmark::RCN: out.push_back(P.noise_bound().to_double()); break;
      case Benchmark::Minimax: out.push_back(mm); break;
      case Benchmark::Massart: out.push_back(P.bayes_error()); break;
    }
  }
  return out;
}

[[nodiscard]] inline SuccessReport check_success(std::span<const Hypothesis> outputs, const MdlInstance& inst,
                                                 double eps, Benchmark benchmark) {
  if (outputs.size() != inst.k()) throw std::invalid_argument("need one output hypothesis per distribution");
  const auto targets = benchmark_targets(inst, benchmark);
  SuccessReport r;
  r.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < inst.k(); ++i) {
    const double e = exact_error(outputs[i], inst.distribution(i)) - targets[i];
    r.per_distribution.push_back(e);
    r.max_excess = std::max(r.max_excess, e);
  }
  r.success = r.max_excess <= eps + kSuccessTolerance;
  return r;
}

[[nodiscard]] inline SuccessReport check_success(std::span<const Hypothesis> outputs, const MdlInstance& inst,
                                                 double eps) {
  return check_success(outputs, inst, eps, inst.benchmark());
}

// ---------------------------------------------------------------------------
// Ingster chi-square for the subset-planting construction
// ---------------------------------------------------------------------------

/// Hypergeometric pmf: j successes in n draws without replacement from a
/// population of N with K successes. Built by the ratio recurrence from
/// pmf(j_min), which keeps it accurate for N in the thousands.
[[nodiscard]] inline std::vector<double> hypergeometric_pmf(std::uint64_t N, std::uint64_t K, std::uint64_t n) {
  if (K > N || n > N) throw std::invalid_argument("hypergeometric parameters out of range");
  const std::uint64_t jmin = (n + K > N) ? n + K - N : 0;
  const std::uint64_t jmax = std::min(n, K);
  std::vector<double> pmf(jmax + 1, 0.0);
  // log pmf(jmin) via lgamma, then multiplicative steps.
  auto lchoose = [](double a, double b) { return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1); };
  const double Nd = static_cast<double>(N);
  const double Kd = static_cast<double>(K);
  const double nd = static_cast<double>(n);
  double cur =
      std::exp(lchoose(Kd, static_cast<double>(jmin)) + lchoose(Nd - Kd, nd - static_cast<double>(jmin)) - lchoose(Nd, nd));
  pmf[jmin] = cur;
  for (std::uint64_t j = jmin; j < jmax; ++j) {
    const double jd = static_cast<double>(j);
    cur *= (Kd - jd) * (nd - jd) / ((jd + 1.0) * (Nd - Kd - nd + jd + 1.0));
    pmf[j + 1] = cur;
  }
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (auto& v : pmf) v /= total;
  return pmf;
}

/// Overlap |R cap R'| of two independent uniform size-d subsets of [d^2].
[[nodiscard]] inline std::vector<double> overlap_pmf(std::uint64_t d) {
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  return hypergeometric_pmf(d * d, d, d);
}

struct IngsterBound {
  double chi_square = 0.0;
  double tv_upper_bound = 0.0;
};

/// chi^2 + 1 = E[(1 + 4 gamma |R cap R'| / (3d))^T], evaluated exactly over
/// the overlap pmf with log-sum-exp; TV <= sqrt(chi^2) / 2.
[[nodiscard]] inline IngsterBound ingster_chi2(std::uint64_t d, double gamma, std::uint64_t T) {
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  if (!(gamma > 0.0) || static_cast<double>(d) * gamma > 1.0 + 1e-15) {
    throw std::domain_error("need gamma > 0 and d * gamma <= 1");
  }
  if (T == 0) return {};
  const auto pmf = overlap_pmf(d);
  const double Td = static_cast<double>(T);
  std::vector<double> logs;
  for (std::size_t j = 0; j < pmf.size(); ++j) {
    if (pmf[j] <= 0.0) continue;
    const double g = 4.0 * gamma * static_cast<double>(j) / (3.0 * static_cast<double>(d));
    logs.push_back(std::log(pmf[j]) + Td * std::log1p(g));
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  const double log_moment = mx + std::log(s);
  IngsterBound b;
  b.chi_square = std::max(0.0, std::expm1(log_moment));
  b.tv_upper_bound = 0.5 * std::sqrt(b.chi_square);
  return b;
}

/// Largest outcome-sequence count exact_tv_sequences will enumerate.
inline constexpr std::uint64_t kTvEnumerationBudget = 10'000'000;

/// Exact TV(P_0^T, E_R[P_R^T]) for the subset-planting construction: marginal
/// 1 - d gamma at 0 and gamma/d on each of [d^2]; labels flip with probability
/// 1/4 around f_0 (null) or around the indicator of a size-d subset R
/// (alternative, R uniform). Enumerates all ((d^2+1) * 2)^T sequences.
[[nodiscard]] inline double exact_tv_sequences(std::uint64_t d, double gamma, std::uint64_t T) {
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  if (!(gamma > 0.0) || static_cast<double>(d) * gamma > 1.0 + 1e-15) {
    throw std::domain_error("need gamma > 0 and d * gamma <= 1");
  }
  const std::uint64_t outcomes = (d * d + 1) * 2;
  {
    unsigned __int128 total = 1;
    for (std::uint64_t t = 0; t < T; ++t) {
      total *= outcomes;
      if (total > kTvEnumerationBudget) throw std::length_error("exact TV enumeration budget exceeded");
    }
  }
  if (T == 0) return 0.0;

  const std::size_t n = d * d + 1;
  std::vector<double> px(n, gamma / static_cast<double>(d));
  px[0] = std::max(0.0, 1.0 - static_cast<double>(d) * gamma);

  // Outcome o = 2x + y. Null likelihoods, then one row per subset R.
  std::vector<double> p0(outcomes);
  for (std::size_t x = 0; x < n; ++x) {
    p0[2 * x] = px[x] * 0.75;
    p0[2 * x + 1] = px[x] * 0.25;
  }
  std::vector<std::vector<double>> pr;
  {
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 1);
    const std::size_t m = d * d;
    while (true) {
      auto row = p0;
      for (auto x : idx) {
        row[2 * x] = px[x] * 0.25;
        row[2 * x + 1] = px[x] * 0.75;
      }
      pr.push_back(std::move(row));
      std::size_t pos = d;
      while (pos > 0 && idx[pos - 1] == m - d + pos) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < d; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  const std::size_t R = pr.size();
  const double inv_r = 1.0 / static_cast<double>(R);

  // Depth-first over sequences; likelihood products are carried down.
  std::vector<std::vector<double>> alt(T + 1, std::vector<double>(R, 1.0));
  double acc = 0.0;
  auto walk = [&](auto&& self, std::uint64_t depth, double null_prod) -> void {
    if (depth == T) {
      double mix = 0.0;
      for (double v : alt[T]) mix += v;
      acc += std::abs(null_prod - mix * inv_r);
      return;
    }
    for (std::uint64_t o = 0; o < outcomes; ++o) {
      if (px[o / 2] == 0.0) continue;  // zero-mass outcomes contribute nothing
      for (std::size_t r = 0; r < R; ++r) alt[depth + 1][r] = alt[depth][r] * pr[r][o];
      self(self, depth + 1, null_prod * p0[o]);
    }
  };
  walk(walk, 0, 1.0);
  return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Poissonized counts for the moment-matched Massart priors
// ---------------------------------------------------------------------------

/// Priors over a coordinate's bias: mu0 is a point mass at `null_bias`;
/// mu1 puts `heavy_prob` on `heavy_bias` and the rest on 0.
struct MassPriors {
  Rational null_bias{93, 200};
  Rational heavy_bias{3, 4};
  Rational heavy_prob{31, 50};

  [[nodiscard]] Rational mean_mu0() const { return null_bias; }
  [[nodiscard]] Rational mean_mu1() const { return heavy_bias * heavy_prob; }
  [[nodiscard]] bool first_moments_match() const { return mean_mu0() == mean_mu1(); }
};

struct PoissonCountTv {
  double lambda = 0.0;
  /// d * TV(P_mu0, P_mu1) on the truncated grid.
  double exact_tv = 0.0;
  /// T^2 eps^2 / (2 d).
  double bound = 0.0;
  double per_coordinate_tv = 0.0;
  /// Counts n + m are enumerated up to this total.
  std::uint64_t truncation = 0;
  /// Poisson mass beyond the truncation (identical under both priors).
  double residual = 0.0;
  /// P_mu(n, m) at (0,0), (1,0), (0,1) under mu0 and mu1.
  std::array<double, 3> rows_mu0{};
  std::array<double, 3> rows_mu1{};
  [[nodiscard]] double max_row_gap() const {
    double g = 0.0;
    for (std::size_t i = 0; i < 3; ++i) g = std::max(g, std::abs(rows_mu0[i] - rows_mu1[i]));
    return g;
  }
};

inline constexpr double kPoissonResidual = 1e-12;

/// Per-coordinate count pair (N, M) ~ Pois(lambda q) x Pois(lambda (1-q)),
/// lambda = T eps / d, mixed over q ~ mu0 or mu1. Reports d times the TV
/// between the two mixtures next to the bound T^2 eps^2 / (2d).
[[nodiscard]] inline PoissonCountTv poisson_count_tv(std::uint64_t d, double eps, std::uint64_t T,
                                                     const MassPriors& priors = MassPriors{}) {
  if (d == 0) throw std::invalid_argument("d must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("epsilon must lie in (0, 1)");
  PoissonCountTv out;
  const double dd = static_cast<double>(d);
  const double Td = static_cast<double>(T);
  out.lambda = Td * eps / dd;
  out.bound = Td * Td * eps * eps / (2.0 * dd);
  if (out.lambda > 50.0) throw std::domain_error("lambda above 50; truncation impractical");
  if (T == 0) {
    out.rows_mu0 = {1.0, 0.0, 0.0};
    out.rows_mu1 = {1.0, 0.0, 0.0};
    return out;
  }
  const double lam = out.lambda;

  // Truncate the total count s = n + m where the Poisson tail drops below the
  // residual target; the tail is summed directly, not as 1 - cdf.
  std::vector<double> pois{std::exp(-lam)};
  auto tail_after = [&](std::size_t L) {
    double term = pois[L];
    double tail = 0.0;
    for (std::size_t s = L + 1; s < L + 400; ++s) {
      term *= lam / static_cast<double>(s);
      tail += term;
      if (term < 1e-300) break;
    }
    return tail;
  };
  std::size_t L = 0;
  while (tail_after(L) > kPoissonResidual) {
    pois.push_back(pois.back() * lam / static_cast<double>(L + 1));
    ++L;
    if (L > 10'000) throw std::runtime_error("truncation residual above 1e-12");
  }
  out.truncation = L;
  out.residual = tail_after(L);
  if (out.residual > kPoissonResidual) throw std::runtime_error("truncation residual above 1e-12");

  const double q0 = priors.null_bias.to_double();
  const double qh = priors.heavy_bias.to_double();
  const double wh = priors.heavy_prob.to_double();
  // P_q(n, m) = Pois(lam)(s) * C(s, n) q^n (1-q)^m with s = n + m.
  auto pq = [&](double q, std::size_t nn, std::size_t mm) {
    const std::size_t s = nn + mm;
    const double logc = std::lgamma(static_cast<double>(s) + 1) - std::lgamma(static_cast<double>(nn) + 1) -
                        std::lgamma(static_cast<double>(mm) + 1);
    const double qn = nn == 0 ? 1.0 : std::pow(q, static_cast<double>(nn));
    const double rm = mm == 0 ? 1.0 : std::pow(1.0 - q, static_cast<double>(mm));
    return pois[s] * std::exp(logc) * qn * rm;
  };
  double tv = 0.0;
  for (std::size_t s = 0; s <= L; ++s) {
    for (std::size_t nn = 0; nn <= s; ++nn) {
      const std::size_t mm = s - nn;
      const double a = pq(q0, nn, mm);
      const double b = wh * pq(qh, nn, mm) + (1.0 - wh) * pq(0.0, nn, mm);
      tv += std::abs(a - b);
      if (s <= 1) {
        const std::size_t row = s == 0 ? 0 : (nn == 1 ? 1 : 2);
        out.rows_mu0[row] = a;
        out.rows_mu1[row] = b;
      }
    }
  }
  out.per_coordinate_tv = 0.5 * tv;
  out.exact_tv = dd * out.per_coordinate_tv;
  return out;
}

}  // namespace mdln
