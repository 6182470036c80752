#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdlnoise/core.hpp"
#include "mdlnoise/erm.hpp"

namespace mdln {

enum class TesterKind { RCN, MM };
enum class Decision { YES, NO };

inline const char* to_string(TesterKind t) { return t == TesterKind::RCN ? "rcn" : "mm"; }
inline const char* to_string(Decision d) { return d == Decision::YES ? "YES" : "NO"; }

/// Indices of distributions not yet assigned a hypothesis, ascending.
using ActiveSet = std::vector<std::size_t>;

/// Number of rounds that lets repeated halving empty a set of k: each round
/// keeps at most floor(|U|/2), so floor(log2 k) + 1 rounds reach zero.
[[nodiscard]] inline std::size_t halving_rounds(std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  std::size_t r = 0;
  while (k > 0) {
    k >>= 1U;
    ++r;
  }
  return r;
}

/// Both sides of the joint-vs-separate switch. The separate path is taken
/// iff joint > separate; ties go to the joint path.
struct CondTerms {
  double joint = 0.0;
  double separate = 0.0;
  [[nodiscard]] bool use_separate() const { return joint > separate; }
};

/// Switch for the RCN meta-algorithm:
///   joint = ln^2(k/delta) (d ln(1/eps) / (eps (1-2 eta)) + sum_i (eps + eta_i) / eps^2)
///   sep   = sum_i (d ln(1/eps) + ln(k/delta)) / (eps (1 - 2 eta_i))
[[nodiscard]] inline CondTerms rcn_cond_terms(std::size_t d, double eps, double delta,
                                              std::span<const double> etas) {
  const double k = static_cast<double>(etas.size());
  const double eta = *std::max_element(etas.begin(), etas.end());
  const double dl = static_cast<double>(d) * std::log(1.0 / eps);
  const double lk = std::log(k / delta);
  CondTerms c;
  double testing = 0.0;
  for (double e : etas) {
    testing += (eps + e) / (eps * eps);
    c.separate += (dl + lk) / (eps * (1.0 - 2.0 * e));
  }
  c.joint = lk * lk * (dl / (eps * (1.0 - 2.0 * eta)) + testing);
  return c;
}

/// Optional switch for the minimax variant, using eta as a stand-in for the
/// unknown eta*:  d/(eps(1-2eta)) + k(eps+eta)/eps^2  vs  sum_i d/(eps(1-2eta_i)).
[[nodiscard]] inline CondTerms mm_proxy_cond_terms(std::size_t d, double eps, std::span<const double> etas) {
  const double k = static_cast<double>(etas.size());
  const double eta = *std::max_element(etas.begin(), etas.end());
  const double dd = static_cast<double>(d);
  CondTerms c;
  c.joint = dd / (eps * (1.0 - 2.0 * eta)) + k * (eps + eta) / (eps * eps);
  for (double e : etas) c.separate += dd / (eps * (1.0 - 2.0 * e));
  return c;
}

struct MetaParams {
  std::size_t rounds = 1;
  double eps_prime = 0.0;
  double delta_prime = 0.0;
  Rational eps;
  double delta = 0.0;
  bool cond = false;
  TesterKind tester = TesterKind::RCN;
  SampleSizeParams sizes{};

  void validate() const {
    if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
    if (!(eps > Rational(0) && eps < Rational(1))) throw std::invalid_argument("epsilon must lie in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(eps_prime > 0.0 && eps_prime < 1.0)) throw std::invalid_argument("eps' must lie in (0, 1)");
    if (!(delta_prime > 0.0 && delta_prime < 1.0)) throw std::invalid_argument("delta' must lie in (0, 1)");
  }

  /// eps' = eps/16, delta' = delta/(2T); cond from rcn_cond_terms unless forced.
  static MetaParams rcn_preset(const MdlInstance& inst, Rational eps, double delta,
                               SampleSizeParams sizes = SampleSizeParams{}, std::optional<bool> force_cond = {}) {
    MetaParams p = base(inst, eps, delta, sizes);
    p.tester = TesterKind::RCN;
    p.eps_prime = eps.to_double() / 16.0;
    if (force_cond) {
      p.cond = *force_cond;
    } else {
      const auto etas = noise_doubles(inst);
      p.cond = rcn_cond_terms(inst.hypothesis_class().vc_dim(), eps.to_double(), delta, etas).use_separate();
    }
    p.validate();
    return p;
  }

  /// eps' = eps/32, delta' = delta/(2T); cond off unless the eta-proxy switch
  /// is requested.
  static MetaParams mm_preset(const MdlInstance& inst, Rational eps, double delta,
                              SampleSizeParams sizes = SampleSizeParams{}, bool separate_proxy = false) {
    MetaParams p = base(inst, eps, delta, sizes);
    p.tester = TesterKind::MM;
    p.eps_prime = eps.to_double() / 32.0;
    if (separate_proxy) {
      const auto etas = noise_doubles(inst);
      p.cond = mm_proxy_cond_terms(inst.hypothesis_class().vc_dim(), eps.to_double(), etas).use_separate();
    }
    p.validate();
    return p;
  }

  static std::vector<double> noise_doubles(const MdlInstance& inst) {
    std::vector<double> out;
    for (const auto& r : inst.noise_bounds()) out.push_back(r.to_double());
    return out;
  }

 private:
  static MetaParams base(const MdlInstance& inst, Rational eps, double delta, SampleSizeParams sizes) {
    MetaParams p;
    p.rounds = halving_rounds(inst.k());
    p.eps = eps;
    p.delta = delta;
    p.delta_prime = delta / (2.0 * static_cast<double>(p.rounds));
    p.sizes = sizes;
    return p;
  }
};

struct TestOutcome {
  ActiveSet survivors;
  std::size_t sub_rounds = 1;
  bool nu_cap_hit = false;
  /// Guess in force during the last sub-round (MM only).
  Rational final_nu{0};
};

/// One round of the meta-algorithm.
struct RoundLog {
  std::size_t round = 0;
  ActiveSet active_before;
  ActiveSet removed;
  Hypothesis hypothesis;
  std::uint64_t learn_samples = 0;
  std::size_t sub_rounds = 0;
  bool nu_cap_hit = false;
};

struct MdlRun {
  std::vector<Hypothesis> outputs;
  bool separate_path = false;
  std::vector<RoundLog> rounds;
  /// Indices still active after the last round; they received the last
  /// round's hypothesis.
  ActiveSet unresolved;
  [[nodiscard]] bool non_terminated() const { return !unresolved.empty(); }
  [[nodiscard]] bool nu_cap_hit() const {
    return std::any_of(rounds.begin(), rounds.end(), [](const RoundLog& r) { return r.nu_cap_hit; });
  }
};

// ---------------------------------------------------------------------------
// Testers
// ---------------------------------------------------------------------------

/// Removes i iff err_hat(f; S_i) <= eps/2 + eta_i on T_T(eta_i, eps, delta/(2kT))
/// fresh draws from P_i. Survivors keep their order.
[[nodiscard]] inline TestOutcome rcn_test(const Hypothesis& f, std::span<const std::size_t> active,
                                          const MetaParams& params, BudgetedOracle& oracle) {
  if (active.empty()) throw std::invalid_argument("tester called with an empty active set");
  const double k = static_cast<double>(oracle.k());
  const double delta2 = params.delta / (2.0 * k * static_cast<double>(params.rounds));
  const Rational half_eps = params.eps / Rational(2);
  TestOutcome out;
  for (std::size_t i : active) {
    const Rational& eta_i = oracle.distribution(i).noise_bound();
    const auto n = sample_size_test(eta_i.to_double(), params.eps.to_double(), delta2);
    PointCounts c(f.domain_size());
    oracle.tally(i, n, c);
    if (!fraction_at_most(count_mistakes(f, c), c.total, half_eps + eta_i)) out.survivors.push_back(i);
  }
  return out;
}

/// Guesses the unknown minimax level in steps of eps/2. In each sub-round,
/// every remaining index tops its aggregated sample up to
/// T_T(nu, eps/2, delta'') and is removed iff err_hat <= eps/4 + nu; stops once
/// at most half of the input set survives. delta'' = delta/(4(eta/eps+1)kT)
/// uses the known bound eta. A guess above eta + eps ends the loop with
/// nu_cap_hit set.
[[nodiscard]] inline TestOutcome mm_test(const Hypothesis& f, std::span<const std::size_t> active,
                                         const MetaParams& params, BudgetedOracle& oracle) {
  if (active.empty()) throw std::invalid_argument("tester called with an empty active set");
  Rational eta(0);
  for (std::size_t i = 0; i < oracle.k(); ++i) eta = std::max(eta, oracle.distribution(i).noise_bound());
  const double eps = params.eps.to_double();
  const double k = static_cast<double>(oracle.k());
  const double delta2 =
      params.delta / (4.0 * (eta.to_double() / eps + 1.0) * k * static_cast<double>(params.rounds));
  const Rational half_eps = params.eps / Rational(2);
  const Rational quarter_eps = params.eps / Rational(4);
  const Rational cap = eta + params.eps;

  struct Aggregate {
    std::size_t index;
    PointCounts counts;
  };
  std::vector<Aggregate> remaining;
  for (std::size_t i : active) remaining.push_back({i, PointCounts(f.domain_size())});

  TestOutcome out;
  out.sub_rounds = 0;
  Rational nu(0);
  const std::size_t initial = active.size();
  while (2 * remaining.size() > initial) {
    if (nu > cap) {
      out.nu_cap_hit = true;
      break;
    }
    ++out.sub_rounds;
    out.final_nu = nu;
    const auto target = sample_size_test(nu.to_double(), eps / 2.0, delta2);
    std::vector<Aggregate> next;
    for (auto& a : remaining) {
      if (a.counts.total < target) oracle.tally(a.index, target - a.counts.total, a.counts);
      if (!fraction_at_most(count_mistakes(f, a.counts), a.counts.total, quarter_eps + nu)) next.push_back(std::move(a));
    }
    remaining = std::move(next);
    nu += half_eps;
  }
  for (const auto& a : remaining) out.survivors.push_back(a.index);
  return out;
}

// ---------------------------------------------------------------------------
// Meta-algorithm
// ---------------------------------------------------------------------------

/// Learn-then-test loop over the active set, or separate per-distribution
/// ERM when params.cond is set.
[[nodiscard]] inline MdlRun run_mdl(const MdlInstance& inst, const MetaParams& params, BudgetedOracle& oracle) {
  params.validate();
  if (oracle.k() != inst.k()) throw std::invalid_argument("oracle and instance disagree on k");
  const auto& cls = inst.hypothesis_class();
  const std::size_t d = cls.vc_dim();
  const std::size_t k = inst.k();
  MdlRun run;
  run.outputs.assign(k, Hypothesis::zero(inst.domain_size()));

  if (params.cond) {
    run.separate_path = true;
    const double eps = params.eps.to_double();
    for (std::size_t i = 0; i < k; ++i) {
      const double eta_i = inst.distribution(i).noise_bound().to_double();
      const auto n = sample_size_sl(d, eta_i, eps, params.delta / static_cast<double>(k), params.sizes);
      PointCounts c(inst.domain_size());
      oracle.tally(i, n, c);
      run.outputs[i] = erm(cls, c);
    }
    return run;
  }

  const double eta = inst.max_noise_bound().to_double();
  const auto learn_n = sample_size_sl(d, eta, params.eps_prime, params.delta_prime, params.sizes);
  ActiveSet active(k);
  for (std::size_t i = 0; i < k; ++i) active[i] = i;
  for (std::size_t t = 1; t <= params.rounds && !active.empty(); ++t) {
    RoundLog log;
    log.round = t;
    log.active_before = active;
    log.learn_samples = learn_n;
    PointCounts c(inst.domain_size());
    oracle.tally_mixture(active, learn_n, c);
    log.hypothesis = erm(cls, c);
    const TestOutcome outcome = params.tester == TesterKind::RCN ? rcn_test(log.hypothesis, active, params, oracle)
                                                                 : mm_test(log.hypothesis, active, params, oracle);
    log.sub_rounds = outcome.sub_rounds;
    log.nu_cap_hit = outcome.nu_cap_hit;
    for (std::size_t i : active) {
      if (!std::binary_search(outcome.survivors.begin(), outcome.survivors.end(), i)) {
        log.removed.push_back(i);
        run.outputs[i] = log.hypothesis;
      }
    }
    active = outcome.survivors;
    run.rounds.push_back(std::move(log));
  }
  // Unresolved indices fall back to the last learned hypothesis.
  run.unresolved = active;
  for (std::size_t i : active) run.outputs[i] = run.rounds.back().hypothesis;
  return run;
}

// ---------------------------------------------------------------------------
// Structured hypothesis testing
// ---------------------------------------------------------------------------

struct ShtOutcome {
  Decision decision = Decision::YES;
  bool agnostic_branch = false;
  std::uint64_t samples = 0;
};

/// Agnostic branch iff d >= 1/eps.
[[nodiscard]] inline bool sht_uses_agnostic_branch(std::size_t d, const Rational& eps) {
  return Rational(static_cast<std::int64_t>(d)) * eps >= Rational(1);
}

/// Decides whether f is near-optimal on distribution `index` of the oracle,
/// which must have label noise exactly 1/4 everywhere it has mass.
///
/// d >= 1/eps: YES iff err_hat(f; S) <= 1/4 + eps/6 on T_C(eps, delta) draws.
/// Otherwise: learn f_hat by ERM on T_SL(1/4, eps/48, delta/3) draws, then YES
/// iff |err_hat(f; S') - err_hat(f_hat; S')| <= eps/3 on T_L(1/4, eps, delta)
/// fresh draws.
[[nodiscard]] inline ShtOutcome run_sht(const HypothesisClass& cls, const Hypothesis& f, const Rational& eps,
                                        double delta, BudgetedOracle& oracle, std::size_t index,
                                        const SampleSizeParams& sizes = SampleSizeParams{}) {
  const auto& P = oracle.distribution(index);
  if (!P.is_exact_rcn(Rational(1, 4))) {
    throw std::invalid_argument("structured testing needs label noise exactly 1/4 on distribution " +
                                std::to_string(index));
  }
  if (f.domain_size() != cls.domain_size()) throw std::invalid_argument("query hypothesis has wrong domain size");
  const double e = eps.to_double();
  const std::uint64_t before = oracle.draw_counts()[index];
  ShtOutcome out;
  out.agnostic_branch = sht_uses_agnostic_branch(cls.vc_dim(), eps);
  if (out.agnostic_branch) {
    PointCounts c(cls.domain_size());
    oracle.tally(index, sample_size_agnostic(e, delta), c);
    out.decision = fraction_at_most(count_mistakes(f, c), c.total, Rational(1, 4) + eps / Rational(6)) ? Decision::YES
                                                                                                      : Decision::NO;
  } else {
    PointCounts learn(cls.domain_size());
    oracle.tally(index, sample_size_sl(cls.vc_dim(), 0.25, e / 48.0, delta / 3.0, sizes), learn);
    const Hypothesis reference = erm(cls, learn);
    PointCounts test(cls.domain_size());
    oracle.tally(index, sample_size_learned(0.25, e, delta), test);
    const auto a = count_mistakes(f, test);
    const auto b = count_mistakes(reference, test);
    const auto gap = a > b ? a - b : b - a;
    out.decision = fraction_at_most(gap, test.total, eps / Rational(3)) ? Decision::YES : Decision::NO;
  }
  out.samples = oracle.draw_counts()[index] - before;
  return out;
}

/// The single-distribution strategy applied to each of the k distributions.
[[nodiscard]] inline std::vector<ShtOutcome> run_msht(const MdlInstance& inst, std::span<const Hypothesis> queries,
                                                      const Rational& eps, double delta, BudgetedOracle& oracle,
                                                      const SampleSizeParams& sizes = SampleSizeParams{}) {
  if (queries.size() != inst.k()) throw std::invalid_argument("need one query hypothesis per distribution");
  std::vector<ShtOutcome> out;
  for (std::size_t i = 0; i < inst.k(); ++i) {
    out.push_back(run_sht(inst.hypothesis_class(), queries[i], eps, delta, oracle, i, sizes));
  }
  return out;
}

/// Which meta-algorithm configuration a reduction wraps.
struct MdlAlgorithmConfig {
  TesterKind tester = TesterKind::RCN;
  SampleSizeParams sizes{};
  std::optional<bool> force_cond;
  bool mm_separate_proxy = false;

  [[nodiscard]] MetaParams params_for(const MdlInstance& inst, const Rational& eps, double delta) const {
    if (tester == TesterKind::RCN) return MetaParams::rcn_preset(inst, eps, delta, sizes, force_cond);
    MetaParams p = MetaParams::mm_preset(inst, eps, delta, sizes, mm_separate_proxy);
    if (force_cond) p.cond = *force_cond;
    return p;
  }
};

struct ReductionOutcome {
  std::vector<ShtOutcome> decisions;
  MdlRun mdl;
  std::uint64_t mdl_draws = 0;
  std::uint64_t extra_draws = 0;
};

/// Solves multi-distribution testing with an MDL learner: run it at
/// (eps/48, delta/3), then for each i compare f_i with the learned f_hat_i on
/// T_L(1/4, eps, delta) fresh draws, YES iff the empirical gap <= eps/3.
[[nodiscard]] inline ReductionOutcome mdl_to_msht(const MdlAlgorithmConfig& algo, const MdlInstance& inst,
                                                  std::span<const Hypothesis> queries, const Rational& eps,
                                                  double delta, BudgetedOracle& oracle) {
  if (queries.size() != inst.k()) throw std::invalid_argument("need one query hypothesis per distribution");
  for (const auto& P : inst.distributions()) {
    if (!P.is_exact_rcn(Rational(1, 4))) throw std::invalid_argument("reduction needs label noise exactly 1/4");
  }
  ReductionOutcome out;
  const std::uint64_t start = oracle.total_draws();
  out.mdl = run_mdl(inst, algo.params_for(inst, eps / Rational(48), delta / 3.0), oracle);
  out.mdl_draws = oracle.total_draws() - start;
  const auto n = sample_size_learned(0.25, eps.to_double(), delta);
  const Rational third = eps / Rational(3);
  for (std::size_t i = 0; i < inst.k(); ++i) {
    PointCounts c(inst.domain_size());
    oracle.tally(i, n, c);
    const auto a = count_mistakes(queries[i], c);
    const auto b = count_mistakes(out.mdl.outputs[i], c);
    const auto gap = a > b ? a - b : b - a;
    ShtOutcome s;
    s.decision = fraction_at_most(gap, c.total, third) ? Decision::YES : Decision::NO;
    s.samples = n;
    out.decisions.push_back(s);
  }
  out.extra_draws = oracle.total_draws() - start - out.mdl_draws;
  return out;
}

}  // namespace mdln
