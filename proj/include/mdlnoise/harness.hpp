#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mdlnoise/algorithms.hpp"
#include "mdlnoise/core.hpp"
#include "mdlnoise/instances.hpp"
#include "mdlnoise/verify.hpp"

namespace mdln {

/// Raised for invalid user configuration; `field` names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class AlgorithmId { MdlRcn, MdlMm, MdlMassRun, Sht, Msht, MdlToMsht };

inline const char* to_string(AlgorithmId a) {
  switch (a) {
    case AlgorithmId::MdlRcn: return "mdl-rcn";
    case AlgorithmId::MdlMm: return "mdl-mm";
    case AlgorithmId::MdlMassRun: return "mdl-mass-run";
    case AlgorithmId::Sht: return "sht";
    case AlgorithmId::Msht: return "msht";
    case AlgorithmId::MdlToMsht: return "mdl-to-msht";
  }
  return "?";
}

inline AlgorithmId parse_algorithm(const std::string& s) {
  for (auto a : {AlgorithmId::MdlRcn, AlgorithmId::MdlMm, AlgorithmId::MdlMassRun, AlgorithmId::Sht, AlgorithmId::Msht,
                 AlgorithmId::MdlToMsht}) {
    if (s == to_string(a)) return a;
  }
  throw ConfigError("algorithm.name", "unknown algorithm '" + s + "'");
}

/// Hypotheses handed to the testers: the shared Bayes classifier or f_0.
enum class QueryKind { Bayes, Zero };

inline const char* to_string(QueryKind q) { return q == QueryKind::Bayes ? "bayes" : "zero"; }

inline QueryKind parse_query(const std::string& s) {
  if (s == "bayes") return QueryKind::Bayes;
  if (s == "zero") return QueryKind::Zero;
  throw ConfigError("algorithm.query", "expected 'bayes' or 'zero', got '" + s + "'");
}

struct AlgorithmConfig {
  AlgorithmId id = AlgorithmId::MdlRcn;
  Rational eps{1, 10};
  double delta = 0.1;
  double c_sl = 8.0;
  std::optional<bool> force_cond;
  bool mm_separate_proxy = false;
  QueryKind query = QueryKind::Bayes;

  void validate() const {
    if (!(eps > Rational(0) && eps < Rational(1))) throw ConfigError("epsilon", "must lie in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
    if (!(c_sl > 0.0) || !std::isfinite(c_sl)) throw ConfigError("c_sl", "must be positive");
  }

  [[nodiscard]] bool is_learning() const {
    return id == AlgorithmId::MdlRcn || id == AlgorithmId::MdlMm || id == AlgorithmId::MdlMassRun;
  }

  [[nodiscard]] MdlAlgorithmConfig mdl_config() const {
    MdlAlgorithmConfig c;
    c.tester = (id == AlgorithmId::MdlMm || id == AlgorithmId::MdlMassRun) ? TesterKind::MM : TesterKind::RCN;
    c.sizes = SampleSizeParams(c_sl);
    c.force_cond = force_cond;
    c.mm_separate_proxy = mm_separate_proxy;
    return c;
  }

  /// Benchmark used to score a learning run.
  [[nodiscard]] Benchmark benchmark() const {
    switch (id) {
      case AlgorithmId::MdlMm: return Benchmark::Minimax;
      case AlgorithmId::MdlMassRun: return Benchmark::Massart;
      default: return Benchmark::RCN;
    }
  }

  friend bool operator==(const AlgorithmConfig&, const AlgorithmConfig&) = default;
};

/// Named generator plus its parameters. Unset optional fields take defaults
/// derived from the algorithm's epsilon.
struct InstanceConfig {
  std::string generator = "rcn-suite";
  std::size_t k = 1;
  std::size_t d = 1;
  std::optional<Rational> eps;
  std::optional<Rational> gamma;
  Rational eta{1, 4};
  bool alternative = false;
  std::optional<std::size_t> planted_block;
  std::uint64_t seed = 0;
  /// Takes precedence over the generator when set.
  std::optional<MdlInstance> inline_instance;

  friend bool operator==(const InstanceConfig& a, const InstanceConfig& b) {
    return a.generator == b.generator && a.k == b.k && a.d == b.d && a.eps == b.eps && a.gamma == b.gamma &&
           a.eta == b.eta && a.alternative == b.alternative && a.planted_block == b.planted_block &&
           a.seed == b.seed && a.inline_instance.has_value() == b.inline_instance.has_value();
  }
};

inline const std::vector<std::string>& generator_names() {
  static const std::vector<std::string> names{"sht-base", "msht-blocks", "sht-mass", "mdl-mass", "rcn-suite",
                                              "random-tiny"};
  return names;
}

/// Builds the instance described by `cfg`. `default_eps` fills an unset
/// instance epsilon; SHT-Base uses gamma = 2 eps unless gamma is given.
[[nodiscard]] inline MdlInstance build_instance(const InstanceConfig& cfg, const Rational& default_eps) {
  if (cfg.inline_instance) return *cfg.inline_instance;
  const Rational eps = cfg.eps.value_or(default_eps);
  const auto& g = cfg.generator;
  try {
    if (g == "sht-base") {
      ShtBaseSpec s{cfg.d, cfg.gamma.value_or(Rational(2) * eps), std::nullopt};
      if (cfg.alternative) s.planted = random_subset(cfg.d * cfg.d, cfg.d, cfg.seed, 1);
      auto b = make_sht_base(s);
      return {std::move(b.cls), {std::move(b.dist)}, std::move(b.bayes), Benchmark::RCN};
    }
    if (g == "msht-blocks") {
      MshtBlockSpec s{cfg.k, cfg.d, eps, std::nullopt};
      if (cfg.planted_block) s.planted = {{*cfg.planted_block, random_subset(cfg.d * cfg.d, cfg.d, cfg.seed, 1)}};
      return make_msht_blocks(s);
    }
    if (g == "sht-mass") {
      auto m = make_sht_mass({cfg.d, eps, cfg.alternative}, cfg.seed);
      std::vector<Point> light;
      for (std::size_t x = 1; x <= cfg.d; ++x) light.push_back(static_cast<Point>(x));
      auto cls = HypothesisClass::any_subset_blocks(cfg.d + 1, {light});
      auto bayes = m.dist.bayes_classifier();
      return {std::move(cls), {std::move(m.dist)}, std::move(bayes), Benchmark::Massart};
    }
    if (g == "mdl-mass") return make_mdl_mass_planted(cfg.k, cfg.d, eps, cfg.planted_block, cfg.seed).instance;
    if (g == "rcn-suite") return make_rcn_suite(cfg.k, cfg.eta, cfg.seed);
    if (g == "random-tiny") return random_tiny_instance(cfg.seed, RandomInstanceSpec{8, 4, 6, true});
  } catch (const InvariantError& e) {
    throw ConfigError("instance", e.what());
  }
  throw ConfigError("instance.generator", "unknown generator '" + g + "'");
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialRecord {
  std::uint64_t trial = 0;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::string instance;
  bool success = false;
  /// Learning: max_i err(f_i) - OPT_i. Testing: number of wrong decisions.
  double max_excess = 0.0;
  std::vector<std::uint64_t> samples_per_distribution;
  std::uint64_t total_samples = 0;
  std::size_t rounds = 0;
  std::vector<std::size_t> sub_rounds_per_round;
  std::string path;
  bool non_terminated = false;
  bool nu_cap_hit = false;
  std::size_t removals = 0;
  std::size_t removal_violations = 0;
  std::size_t halving_rounds_ok = 0;
  /// Testing algorithms: one YES/NO per distribution, and whether each lies
  /// in the contract zone it was required to hit.
  std::vector<Decision> decisions;
  std::vector<std::uint8_t> decision_correct;

  [[nodiscard]] bool flagged() const { return non_terminated || nu_cap_hit; }
};

/// Decision required by the testing contract: YES when err <= 1/4 + eps/12,
/// NO when err >= 1/4 + eps; nothing in between.
[[nodiscard]] inline std::optional<Decision> required_decision(double err, double eps) {
  if (err <= 0.25 + eps / 12.0 + kSuccessTolerance) return Decision::YES;
  if (err >= 0.25 + eps - kSuccessTolerance) return Decision::NO;
  return std::nullopt;
}

[[nodiscard]] inline std::vector<Hypothesis> query_hypotheses(const MdlInstance& inst, QueryKind q) {
  return std::vector<Hypothesis>(
      inst.k(), q == QueryKind::Bayes ? inst.shared_bayes() : Hypothesis::zero(inst.domain_size()));
}

/// One seeded run. The oracle for trial t is keyed by (seed_base, t).
[[nodiscard]] inline TrialRecord run_trial(const AlgorithmConfig& algo, const MdlInstance& inst,
                                           const std::string& instance_id, std::uint64_t seed_base, std::uint64_t t) {
  TrialRecord r;
  r.trial = t;
  r.seed = derive_key(seed_base, t);
  r.algorithm = to_string(algo.id);
  r.instance = instance_id;
  BudgetedOracle oracle(inst, seed_base, t);
  const double eps = algo.eps.to_double();

  auto score_decisions = [&](const std::vector<ShtOutcome>& outs, const std::vector<Hypothesis>& queries) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      r.decisions.push_back(outs[i].decision);
      const auto need = required_decision(exact_error(queries[i], inst.distribution(i)), eps);
      const bool ok = !need || *need == outs[i].decision;
      r.decision_correct.push_back(ok ? 1 : 0);
      wrong += ok ? 0 : 1;
    }
    r.success = wrong == 0;
    r.max_excess = static_cast<double>(wrong);
  };

  auto score_mdl = [&](const MdlRun& run, double level_eps, Benchmark benchmark) {
    const auto rep = check_success(run.outputs, inst, level_eps, benchmark);
    r.success = rep.success;
    r.max_excess = rep.max_excess;
    r.path = run.separate_path ? "separate" : "joint";
    r.rounds = run.rounds.size();
    r.non_terminated = run.non_terminated();
    r.nu_cap_hit = run.nu_cap_hit();
    const double mm = inst.minimax_bayes_error();
    for (const auto& log : run.rounds) {
      r.sub_rounds_per_round.push_back(log.sub_rounds);
      const std::size_t after = log.active_before.size() - log.removed.size();
      if (2 * after <= log.active_before.size()) ++r.halving_rounds_ok;
      for (std::size_t i : log.removed) {
        ++r.removals;
        const auto& P = inst.distribution(i);
        const double level = benchmark == Benchmark::RCN ? P.noise_bound().to_double() : mm;
        if (exact_error(log.hypothesis, P) > level_eps + level + kSuccessTolerance) ++r.removal_violations;
      }
    }
  };

  switch (algo.id) {
    case AlgorithmId::MdlRcn:
    case AlgorithmId::MdlMm:
    case AlgorithmId::MdlMassRun: {
      const auto cfg = algo.mdl_config();
      const auto run = run_mdl(inst, cfg.params_for(inst, algo.eps, algo.delta), oracle);
      score_mdl(run, eps, algo.benchmark());
      break;
    }
    case AlgorithmId::Sht: {
      if (inst.k() != 1) throw ConfigError("instance.k", "sht runs on a single distribution");
      const auto q = query_hypotheses(inst, algo.query);
      const auto out = run_sht(inst.hypothesis_class(), q[0], algo.eps, algo.delta, oracle, 0,
                               SampleSizeParams(algo.c_sl));
      r.path = out.agnostic_branch ? "agnostic" : "learned";
      score_decisions({out}, q);
      break;
    }
    case AlgorithmId::Msht: {
      const auto q = query_hypotheses(inst, algo.query);
      const auto outs = run_msht(inst, q, algo.eps, algo.delta, oracle, SampleSizeParams(algo.c_sl));
      r.path = outs.front().agnostic_branch ? "agnostic" : "learned";
      score_decisions(outs, q);
      break;
    }
    case AlgorithmId::MdlToMsht: {
      const auto q = query_hypotheses(inst, algo.query);
      auto cfg = algo.mdl_config();
      cfg.tester = TesterKind::RCN;
      const auto out = mdl_to_msht(cfg, inst, q, algo.eps, algo.delta, oracle);
      r.path = out.mdl.separate_path ? "separate" : "joint";
      r.rounds = out.mdl.rounds.size();
      r.non_terminated = out.mdl.non_terminated();
      score_decisions(out.decisions, q);
      break;
    }
  }
  r.samples_per_distribution = oracle.draw_counts();
  r.total_samples = oracle.total_draws();
  return r;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval at 95% confidence.
[[nodiscard]] inline Interval wilson_interval(std::uint64_t successes, std::uint64_t n) {
  if (n == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = p + z2 / (2.0 * nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  // The bounds at 0 and n are exact; the formula leaves rounding dust there.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, (centre - half) / denom);
  const double hi = successes == n ? 1.0 : std::min(1.0, (centre + half) / denom);
  return {lo, hi};
}

struct TrialSummary {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  double success_rate = 0.0;
  Interval wilson;
  double mean_total_samples = 0.0;
  std::uint64_t max_total_samples = 0;
  std::vector<double> mean_samples_per_distribution;
  std::uint64_t flags_count = 0;
};

[[nodiscard]] inline TrialSummary summarize(const std::vector<TrialRecord>& records) {
  TrialSummary s;
  s.trials = records.size();
  if (records.empty()) return s;
  const std::size_t k = records.front().samples_per_distribution.size();
  s.mean_samples_per_distribution.assign(k, 0.0);
  double total = 0.0;
  for (const auto& r : records) {
    s.successes += r.success ? 1 : 0;
    total += static_cast<double>(r.total_samples);
    s.max_total_samples = std::max(s.max_total_samples, r.total_samples);
    for (std::size_t i = 0; i < k; ++i) s.mean_samples_per_distribution[i] += static_cast<double>(r.samples_per_distribution[i]);
    s.flags_count += r.flagged() ? 1 : 0;
  }
  const double n = static_cast<double>(records.size());
  s.success_rate = static_cast<double>(s.successes) / n;
  s.wilson = wilson_interval(s.successes, s.trials);
  s.mean_total_samples = total / n;
  for (auto& m : s.mean_samples_per_distribution) m /= n;
  return s;
}

struct TrialSet {
  std::vector<TrialRecord> records;
  TrialSummary summary;
};

/// Runs trials 0..n-1 on up to `threads` workers; records are stored by
/// trial index, so the output does not depend on scheduling.
[[nodiscard]] inline TrialSet run_trials(const AlgorithmConfig& algo, const MdlInstance& inst,
                                         const std::string& instance_id, std::uint64_t n, std::uint64_t seed_base,
                                         unsigned threads = 1) {
  if (n == 0) throw ConfigError("trials", "must be >= 1");
  algo.validate();
  TrialSet out;
  out.records.resize(n);
  const unsigned workers = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::uint64_t t = 0; t < n; ++t) out.records[t] = run_trial(algo, inst, instance_id, seed_base, t);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (std::uint64_t t = next++; t < n; t = next++) {
        try {
          out.records[t] = run_trial(algo, inst, instance_id, seed_base, t);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  out.summary = summarize(out.records);
  return out;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationStep {
  double c_sl = 0.0;
  double success_rate = 0.0;
  TrialSummary summary;
};

struct CalibrationResult {
  double c_sl = 0.0;
  double success_rate = 0.0;
  std::vector<CalibrationStep> steps;
};

inline constexpr int kCalibrationIterations = 8;

/// Smallest C_SL in [lo, hi] (to bisection resolution) whose success rate
/// over `trials` seeded runs reaches `target`. Every evaluation reuses the
/// same seeds. A rate that drops by more than 3 sigma as C_SL grows aborts.
[[nodiscard]] inline CalibrationResult calibrate_csl(AlgorithmConfig algo, const MdlInstance& inst, double target,
                                                     std::uint64_t trials, double lo, double hi,
                                                     std::uint64_t seed_base, unsigned threads = 1) {
  if (!(lo > 0.0)) throw ConfigError("calibrate.lo", "must be positive");
  if (!(hi >= lo)) throw ConfigError("calibrate.hi", "must be >= lo");
  if (!(target >= 0.0 && target <= 1.0)) throw ConfigError("calibrate.target", "must lie in [0, 1]");
  CalibrationResult res;
  auto rate_at = [&](double c) {
    algo.c_sl = c;
    auto summary = run_trials(algo, inst, "calibration", trials, seed_base, threads).summary;
    const double r = summary.success_rate;
    const double n = static_cast<double>(trials);
    for (const auto& s : res.steps) {
      if (s.c_sl < c && s.success_rate > r) {
        const double sigma = std::sqrt((s.success_rate * (1 - s.success_rate) + r * (1 - r)) / n);
        if (s.success_rate - r > 3.0 * sigma && sigma > 0.0) {
          throw CalibrationError("success rate fell from " + std::to_string(s.success_rate) + " at C_SL=" +
                                 std::to_string(s.c_sl) + " to " + std::to_string(r) + " at C_SL=" + std::to_string(c));
        }
      }
    }
    res.steps.push_back({c, r, std::move(summary)});
    return r;
  };
  const double r_lo = rate_at(lo);
  if (r_lo >= target) {
    res.c_sl = lo;
    res.success_rate = r_lo;
    return res;
  }
  double r_hi = rate_at(hi);
  if (r_hi < target) {
    throw CalibrationError("range exhausted: success rate " + std::to_string(r_hi) + " at C_SL=" +
                           std::to_string(hi) + " is below target " + std::to_string(target));
  }
  for (int it = 0; it < kCalibrationIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = rate_at(mid);
    if (r >= target) {
      hi = mid;
      r_hi = r;
    } else {
      lo = mid;
    }
  }
  res.c_sl = hi;
  res.success_rate = r_hi;
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepParameter { K, D, Epsilon, Eta };

inline const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::K: return "k";
    case SweepParameter::D: return "d";
    case SweepParameter::Epsilon: return "epsilon";
    case SweepParameter::Eta: return "eta";
  }
  return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "k") return SweepParameter::K;
  if (s == "d") return SweepParameter::D;
  if (s == "epsilon") return SweepParameter::Epsilon;
  if (s == "eta") return SweepParameter::Eta;
  throw ConfigError("sweep.parameter", "expected k, d, epsilon or eta, got '" + s + "'");
}

struct SweepSpec {
  SweepParameter parameter = SweepParameter::K;
  std::vector<std::string> grid;
  AlgorithmConfig algorithm;
  InstanceConfig instance;
  std::uint64_t trials = 1;
  std::uint64_t seed_base = 0;

  void validate() const {
    if (grid.empty()) throw ConfigError("sweep.grid", "must be non-empty");
    if (trials == 0) throw ConfigError("trials", "must be >= 1");
    algorithm.validate();
  }
};

struct SweepRow {
  std::string grid_value;
  TrialSummary summary;
};

/// Applies one grid value (kept as text so rationals stay exact) to copies
/// of the configs.
inline void apply_grid_value(SweepParameter p, const std::string& v, AlgorithmConfig& algo, InstanceConfig& inst) {
  try {
    switch (p) {
      case SweepParameter::K:
      case SweepParameter::D: {
        std::size_t pos = 0;
        const auto n = std::stoull(v, &pos);
        if (pos != v.size() || n == 0) throw std::invalid_argument("not a positive integer");
        (p == SweepParameter::K ? inst.k : inst.d) = n;
        break;
      }
      case SweepParameter::Epsilon:
        algo.eps = Rational::parse(v);
        if (inst.eps) inst.eps = algo.eps;
        break;
      case SweepParameter::Eta: inst.eta = Rational::parse(v); break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("sweep.grid", "bad value '" + v + "' for " + to_string(p) + ": " + e.what());
  }
}

/// One run_trials per grid point, rows in grid order. Point j uses seed base
/// derive_key(seed_base, j).
[[nodiscard]] inline std::vector<SweepRow> sweep(const SweepSpec& spec, unsigned threads = 1) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (std::size_t j = 0; j < spec.grid.size(); ++j) {
    AlgorithmConfig algo = spec.algorithm;
    InstanceConfig ic = spec.instance;
    apply_grid_value(spec.parameter, spec.grid[j], algo, ic);
    algo.validate();
    const auto inst = build_instance(ic, algo.eps);
    auto set = run_trials(algo, inst, ic.generator, spec.trials, derive_key(spec.seed_base, j), threads);
    rows.push_back({spec.grid[j], std::move(set.summary)});
  }
  return rows;
}

}  // namespace mdln
