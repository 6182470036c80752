#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdlnoise/harness.hpp"
#include "mdlnoise/io.hpp"
#include "mdlnoise/verify.hpp"

namespace mdln {

enum ExitCode : int { kExitOk = 0, kExitVerifyFailed = 1, kExitConfig = 2, kExitRuntime = 3 };

inline constexpr const char* kThreadsEnv = "MDLNOISE_THREADS";

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  bool pass = false;
  /// Distance to the failure threshold; negative when the check fails.
  double slack = 0.0;
  std::string detail;
};

struct VerifyOptions {
  MassPriors priors{};
  std::size_t identity_instances = 200;
  std::uint64_t seed = 0;
};

[[nodiscard]] inline std::vector<VerifyCheck> run_verify_suite(const VerifyOptions& opt) {
  std::vector<VerifyCheck> out;
  auto add = [&](std::string name, double slack, std::string detail) {
    out.push_back({std::move(name), slack >= 0.0, slack, std::move(detail)});
  };

  {
    double worst = 0.0;
    std::size_t evaluated = 0;
    for (std::size_t s = 0; s < opt.identity_instances; ++s) {
      const auto inst = random_tiny_instance(derive_key(opt.seed, s));
      for (const auto& f : inst.hypothesis_class().enumerate()) {
        for (const auto& P : inst.distributions()) {
          const double lhs = excess_error(f, P);
          const double rhs = exact_error(f, P) - exact_error(inst.shared_bayes(), P);
          worst = std::max(worst, std::abs(lhs - rhs));
          ++evaluated;
        }
      }
    }
    add("oracle-identity", 1e-12 - worst, std::to_string(evaluated) + " pairs, max gap " + format_double(worst));
  }
  {
    double worst = 0.0;
    for (std::uint64_t d = 1; d <= 64; ++d) {
      double sum = 0.0;
      for (double p : overlap_pmf(d)) sum += p;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    add("hypergeometric-normalization", 1e-12 - worst, "d <= 64, max |sum - 1| " + format_double(worst));
  }
  {
    double worst = std::numeric_limits<double>::infinity();
    double floor_slack = std::numeric_limits<double>::infinity();
    std::size_t cases = 0;
    for (std::uint64_t d : {1, 2}) {
      for (double g : {0.1, 0.2, 0.3}) {
        for (std::uint64_t T = 0; T <= 5; ++T) {
          const double outcomes = std::pow(2.0 * static_cast<double>(d * d + 1), static_cast<double>(T));
          if (outcomes > static_cast<double>(kTvEnumerationBudget)) continue;
          const auto b = ingster_chi2(d, g, T);
          const double tv = exact_tv_sequences(d, g, T);
          worst = std::min(worst, b.tv_upper_bound + 1e-9 - tv);
          if (b.tv_upper_bound < 0.5) floor_slack = std::min(floor_slack, 0.5 - tv);
          ++cases;
        }
      }
    }
    add("tv-sandwich", worst, std::to_string(cases) + " configurations");
    add("indistinguishability-floor", floor_slack, "exact TV below 1/2 where the chi-square bound is");
  }
  {
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t d : {1, 4, 16, 64}) {
      for (double lam : {0.01, 0.1, 0.5, 1.0}) {
        // T = 100 draws, eps chosen so that T eps / d = lambda.
        const std::uint64_t T = 100;
        const double eps = lam * static_cast<double>(d) / static_cast<double>(T);
        const auto r = poisson_count_tv(d, eps, T, opt.priors);
        worst = std::min(worst, r.bound - r.exact_tv);
      }
    }
    add("count-tv-bound", worst, "16-point grid, lambda <= 1");
  }
  {
    const auto r = poisson_count_tv(4, 0.1, 20, opt.priors);
    const bool exact = opt.priors.first_moments_match();
    add("moment-match", exact ? 1e-15 - r.max_row_gap() : -std::abs(opt.priors.mean_mu0().to_double() -
                                                                     opt.priors.mean_mu1().to_double()),
        "E[q] under mu0 = " + opt.priors.mean_mu0().str() + ", under mu1 = " + opt.priors.mean_mu1().str() +
            ", row gap " + format_double(r.max_row_gap()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool svg = false;
};

[[nodiscard]] inline unsigned default_threads() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      const auto v = std::stoul(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(kThreadsEnv, "must be a positive integer");
  }
  return 1;
}

[[nodiscard]] inline RunConfig load_config(const CliOverrides& o) {
  if (o.config_path.empty()) throw ConfigError("--config", "a config file is required");
  RunConfig c = config_from_json(read_json_file(o.config_path));
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.svg) c.svg = true;
  if (c.threads == 0) c.threads = default_threads();
  return c;
}

inline std::filesystem::path prepare_out(const RunConfig& c) {
  std::filesystem::path dir(c.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

inline std::string summary_line(const TrialSummary& s) {
  return "trials=" + std::to_string(s.trials) + " successes=" + std::to_string(s.successes) +
         " success_rate=" + format_double(s.success_rate) + " wilson=[" + format_double(s.wilson.lo) + ", " +
         format_double(s.wilson.hi) + "] mean_total_samples=" + format_double(s.mean_total_samples) +
         " max_total_samples=" + std::to_string(s.max_total_samples) + " flags=" + std::to_string(s.flags_count);
}

inline int cmd_run(const CliOverrides& o, std::ostream& out) {
  const RunConfig c = load_config(o);
  const auto inst = build_instance(c.instance, c.algorithm.eps);
  const auto set = run_trials(c.algorithm, inst, c.instance.generator, c.trials, c.seed, c.threads);
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  write_records_csv(csv, set.records);
  write_text(dir / "records.csv", csv.str());
  const auto& s = set.summary;
  Json summary{{"algorithm", to_string(c.algorithm.id)},
               {"instance", c.instance.generator},
               {"trials", s.trials},
               {"successes", s.successes},
               {"success_rate", s.success_rate},
               {"wilson_lo", s.wilson.lo},
               {"wilson_hi", s.wilson.hi},
               {"mean_total_samples", s.mean_total_samples},
               {"max_total_samples", s.max_total_samples},
               {"mean_samples_per_dist", s.mean_samples_per_distribution},
               {"flags_count", s.flags_count}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << summary_line(s) << "\n";
  return kExitOk;
}

inline int cmd_sweep(const CliOverrides& o, std::ostream& out) {
  const RunConfig c = load_config(o);
  if (!c.sweep) throw ConfigError("sweep", "missing sweep section");
  SweepSpec spec{c.sweep->parameter, c.sweep->grid, c.algorithm, c.instance, c.trials, c.seed};
  const auto rows = sweep(spec, c.threads);
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  write_table_csv(csv, rows);
  write_text(dir / "sweep.csv", csv.str());
  if (c.svg) write_text(dir / "sweep.svg", table_svg(rows, to_string(c.sweep->parameter)));
  for (const auto& r : rows) out << to_string(c.sweep->parameter) << "=" << r.grid_value << " " << summary_line(r.summary) << "\n";
  return kExitOk;
}

inline int cmd_calibrate(const CliOverrides& o, std::ostream& out) {
  const RunConfig c = load_config(o);
  const CalibrateSection cs = c.calibrate.value_or(CalibrateSection{});
  const auto inst = build_instance(c.instance, c.algorithm.eps);
  const auto res = calibrate_csl(c.algorithm, inst, cs.target, c.trials, cs.lo, cs.hi, c.seed, c.threads);
  std::vector<SweepRow> rows;
  for (const auto& s : res.steps) rows.push_back({format_double(s.c_sl), s.summary});
  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return grid_number(a.grid_value) < grid_number(b.grid_value); });
  const auto dir = prepare_out(c);
  std::ostringstream csv;
  write_table_csv(csv, rows);
  write_text(dir / "calibration.csv", csv.str());
  if (c.svg) write_text(dir / "calibration.svg", table_svg(rows, "c_sl"));
  out << "c_sl=" << format_double(res.c_sl) << " success_rate=" << format_double(res.success_rate) << "\n";
  return kExitOk;
}

inline int cmd_gen_instance(const CliOverrides& o, std::ostream& out) {
  const RunConfig c = load_config(o);
  const auto inst = build_instance(c.instance, c.algorithm.eps);
  const auto dir = prepare_out(c);
  write_text(dir / "instance.json", instance_json(inst).dump(2) + "\n");
  out << "wrote " << (dir / "instance.json").string() << "\n";
  return kExitOk;
}

inline int cmd_verify(const VerifyOptions& opt, std::ostream& out) {
  bool ok = true;
  for (const auto& c : run_verify_suite(opt)) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << " slack=" << format_double(c.slack) << " (" << c.detail << ")\n";
    ok = ok && c.pass;
  }
  return ok ? kExitOk : kExitVerifyFailed;
}

/// Parses argv and dispatches; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-distribution learning under label noise: experiments and checks", "mdlnoise"};
  app.require_subcommand(1);
  CliOverrides o;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", o.config_path, "JSON config file");
    if (needs_config) cfg->required();
    sub->add_option("--out", o.out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "seed base (overrides the config)");
    sub->add_option("--threads", threads, std::string("worker threads (default: $") + kThreadsEnv + " or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--svg", o.svg, "also write an SVG line chart");
  };
  auto* run = app.add_subcommand("run", "run trials and write records.csv and summary.json");
  auto* sw = app.add_subcommand("sweep", "run trials over a parameter grid and write sweep.csv");
  auto* cal = app.add_subcommand("calibrate", "search for the smallest adequate C_SL");
  auto* gen = app.add_subcommand("gen-instance", "write the configured instance as JSON");
  auto* ver = app.add_subcommand("verify", "run the exact identity and bound checks");
  for (auto* s : {run, sw, cal, gen}) add_common(s, true);
  std::string mu0;
  std::size_t identity_instances = 200;
  ver->add_option("--mu0", mu0, "null-prior bias (default 93/200)");
  ver->add_option("--identity-instances", identity_instances, "random instances for the identity check");
  ver->add_option("--seed", seed, "seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }
  for (auto* s : {run, sw, cal, gen}) {
    if (s->count("--seed")) o.seed = seed;
    if (s->count("--threads")) o.threads = threads;
  }
  try {
    if (*run) return cmd_run(o, out);
    if (*sw) return cmd_sweep(o, out);
    if (*cal) return cmd_calibrate(o, out);
    if (*gen) return cmd_gen_instance(o, out);
    VerifyOptions vo;
    vo.identity_instances = identity_instances;
    vo.seed = seed;
    if (!mu0.empty()) {
      try {
        vo.priors.null_bias = Rational::parse(mu0);
      } catch (const std::exception& e) {
        throw ConfigError("--mu0", e.what());
      }
    }
    return cmd_verify(vo, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CalibrationError& e) {
    err << "calibration failed: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace mdln
