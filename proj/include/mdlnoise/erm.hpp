#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mdlnoise/core.hpp"

namespace mdln {

struct ErmResult {
  Hypothesis hypothesis;
  std::uint64_t mistakes = 0;
};

namespace detail {

inline std::int64_t gain(const PointCounts& c, Point x) {
  return static_cast<std::int64_t>(c.ones[x]) - static_cast<std::int64_t>(c.zeros[x]);
}

inline std::uint64_t total_ones(const PointCounts& c) {
  return std::accumulate(c.ones.begin(), c.ones.end(), std::uint64_t{0});
}

// Candidate error = (#y=1) - sum of gains over the chosen subset. f_0 wins
// ties, then blocks in index order.
inline ErmResult erm_blocks(const HypothesisClass& cls, const PointCounts& c) {
  const std::uint64_t base = total_ones(c);
  ErmResult best{Hypothesis::zero(cls.domain_size()), base};
  std::vector<Point> chosen;
  for (const auto& block : cls.blocks()) {
    chosen.clear();
    if (cls.kind() == HypothesisClass::Kind::ZeroPlusFixedSizeBlockSubsets) {
      std::vector<Point> order(block.begin(), block.end());
      std::stable_sort(order.begin(), order.end(), [&](Point a, Point b) { return gain(c, a) > gain(c, b); });
      chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cls.subset_size()));
    } else {
      for (Point x : block) {
        if (gain(c, x) > 0) chosen.push_back(x);
      }
      if (chosen.empty()) continue;  // the empty subset is f_0 itself
    }
    std::int64_t g = 0;
    for (Point x : chosen) g += gain(c, x);
    const auto err = static_cast<std::uint64_t>(static_cast<std::int64_t>(base) - g);
    if (err < best.mistakes) {
      std::sort(chosen.begin(), chosen.end());
      best = {Hypothesis::subset(cls.domain_size(), chosen), err};
    }
  }
  return best;
}

}  // namespace detail

/// Exact empirical risk minimizer over the class.
///
/// Explicit classes are scanned in order (lowest index wins ties). For block
/// classes the per-point gain g(x) = #{y=1 at x} - #{y=0 at x} decides: the
/// fixed-size kind takes the `subset_size` largest gains of each block (ties
/// by lower point id), the any-size kind takes every point with g(x) > 0.
[[nodiscard]] inline ErmResult erm_detailed(const HypothesisClass& cls, const PointCounts& c) {
  if (c.total == 0) throw std::invalid_argument("ERM on an empty sample");
  if (c.domain_size() != cls.domain_size()) throw std::invalid_argument("sample and class domains differ");
  if (cls.kind() == HypothesisClass::Kind::Explicit) {
    const auto& members = cls.members();
    ErmResult best{members.front(), count_mistakes(members.front(), c)};
    for (std::size_t i = 1; i < members.size(); ++i) {
      const auto m = count_mistakes(members[i], c);
      if (m < best.mistakes) best = {members[i], m};
    }
    return best;
  }
  return detail::erm_blocks(cls, c);
}

[[nodiscard]] inline Hypothesis erm(const HypothesisClass& cls, const PointCounts& c) {
  return erm_detailed(cls, c).hypothesis;
}

[[nodiscard]] inline Hypothesis erm(const HypothesisClass& cls, std::span<const LabeledExample> s) {
  if (s.empty()) throw std::invalid_argument("ERM on an empty sample");
  return erm(cls, PointCounts::from(cls.domain_size(), s));
}

// ---------------------------------------------------------------------------
// Sample sizes. Natural logarithms throughout; results are ceilings, >= 1.
// ---------------------------------------------------------------------------

struct SampleSizeParams {
  double c_sl = 8.0;

  explicit SampleSizeParams(double c = 8.0) : c_sl(c) {
    if (!(c_sl > 0.0) || !std::isfinite(c_sl)) throw std::invalid_argument("C_SL must be positive");
  }
};

namespace detail {

inline void require_unit_open(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) throw std::domain_error(std::string(name) + " must lie in (0, 1)");
}

inline void require_noise(double eta) {
  if (!(eta >= 0.0 && eta < 0.5)) throw std::domain_error("noise bound must lie in [0, 1/2)");
}

inline std::uint64_t ceil_at_least_one(double v) {
  if (!std::isfinite(v) || v > 9.0e18) throw std::overflow_error("sample size overflows");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(v)));
}

}  // namespace detail

/// C_SL * (d ln(1/eps) + ln(1/delta)) / (eps (1 - 2 eta)), before rounding.
[[nodiscard]] inline double sample_size_sl_raw(std::size_t d, double eta, double eps, double delta,
                                               const SampleSizeParams& params = SampleSizeParams{}) {
  detail::require_unit_open(eps, "epsilon");
  detail::require_unit_open(delta, "delta");
  detail::require_noise(eta);
  if (d == 0) throw std::domain_error("VC dimension must be >= 1");
  return params.c_sl * (static_cast<double>(d) * std::log(1.0 / eps) + std::log(1.0 / delta)) /
         (eps * (1.0 - 2.0 * eta));
}

[[nodiscard]] inline std::uint64_t sample_size_sl(std::size_t d, double eta, double eps, double delta,
                                                  const SampleSizeParams& params = SampleSizeParams{}) {
  return detail::ceil_at_least_one(sample_size_sl_raw(d, eta, eps, delta, params));
}

/// 16 ln(2/delta) (eps + 8 nu) / eps^2: enough draws to tell err <= eps/8 + nu
/// apart from err > eps + nu by thresholding at eps/2 + nu.
[[nodiscard]] inline double sample_size_test_raw(double nu, double eps, double delta) {
  if (!(nu >= 0.0)) throw std::domain_error("target level must be >= 0");
  detail::require_unit_open(eps, "epsilon");
  detail::require_unit_open(delta, "delta");
  return 16.0 * std::log(2.0 / delta) * (eps + 8.0 * nu) / (eps * eps);
}

[[nodiscard]] inline std::uint64_t sample_size_test(double nu, double eps, double delta) {
  return detail::ceil_at_least_one(sample_size_test_raw(nu, eps, delta));
}

/// 72 ln(2/delta) / eps^2.
[[nodiscard]] inline double sample_size_agnostic_raw(double eps, double delta) {
  detail::require_unit_open(eps, "epsilon");
  detail::require_unit_open(delta, "delta");
  return 72.0 * std::log(2.0 / delta) / (eps * eps);
}

[[nodiscard]] inline std::uint64_t sample_size_agnostic(double eps, double delta) {
  return detail::ceil_at_least_one(sample_size_agnostic_raw(eps, delta));
}

/// 96 ln(6/delta) / (eps (1 - 2 eta)).
[[nodiscard]] inline double sample_size_learned_raw(double eta, double eps, double delta) {
  detail::require_noise(eta);
  detail::require_unit_open(eps, "epsilon");
  detail::require_unit_open(delta, "delta");
  return 96.0 / (eps * (1.0 - 2.0 * eta)) * std::log(6.0 / delta);
}

[[nodiscard]] inline std::uint64_t sample_size_learned(double eta, double eps, double delta) {
  return detail::ceil_at_least_one(sample_size_learned_raw(eta, eps, delta));
}

}  // namespace mdln
