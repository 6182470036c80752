#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdlnoise/harness.hpp"

namespace mdln {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("cannot format double");
  return {buf, end};
}

inline Json rational_json(const Rational& r) { return r.str(); }

inline Rational rational_from_json(const Json& j, const std::string& field) {
  try {
    if (j.is_string()) return Rational::parse(j.get<std::string>());
    if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
    if (j.is_number()) return Rational::from_double(j.get<double>());
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
  throw ConfigError(field, "expected a rational such as \"1/4\" or a number");
}

namespace detail {

inline const Json* find(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline const Json& require(const Json& obj, const char* key, const std::string& field) {
  const Json* v = find(obj, key);
  if (!v) throw ConfigError(field, "missing required field");
  return *v;
}

template <class T>
T get_as(const Json& j, const std::string& field) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw std::invalid_argument("expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        throw std::invalid_argument("expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw std::invalid_argument("expected a number");
    } else {
      if (!j.is_string()) throw std::invalid_argument("expected a string");
    }
    return j.get<T>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

template <class T>
void read_opt(const Json& obj, const char* key, const std::string& prefix, T& into) {
  if (const Json* v = find(obj, key)) into = get_as<T>(*v, prefix + key);
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> known, const std::string& prefix) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; })) {
      throw ConfigError(prefix + k, "unknown field");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

inline Json hypothesis_json(const Hypothesis& h) { return h.ones(); }

inline Hypothesis hypothesis_from_json(const Json& j, std::size_t n, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected the list of points labeled 1");
  std::vector<Point> pts;
  for (const auto& v : j) pts.push_back(detail::get_as<Point>(v, field));
  std::sort(pts.begin(), pts.end());
  try {
    return Hypothesis::subset(n, pts);
  } catch (const InvariantError& e) {
    throw ConfigError(field, e.what());
  }
}

inline Json instance_json(const MdlInstance& inst) {
  const auto& cls = inst.hypothesis_class();
  Json c;
  switch (cls.kind()) {
    case HypothesisClass::Kind::Explicit: {
      c["kind"] = "explicit";
      c["vc_dim"] = cls.vc_dim();
      Json members = Json::array();
      for (const auto& h : cls.members()) members.push_back(hypothesis_json(h));
      c["members"] = members;
      break;
    }
    case HypothesisClass::Kind::ZeroPlusFixedSizeBlockSubsets:
      c["kind"] = "fixed-size-blocks";
      c["subset_size"] = cls.subset_size();
      c["blocks"] = cls.blocks();
      break;
    case HypothesisClass::Kind::ZeroPlusAnyBlockSubsets:
      c["kind"] = "any-subset-blocks";
      c["blocks"] = cls.blocks();
      break;
  }
  Json dists = Json::array();
  for (const auto& P : inst.distributions()) {
    Json d;
    // Doubles are written as shortest round-trip text.
    Json m = Json::array();
    for (double p : P.marginal()) m.push_back(p);
    d["marginal"] = m;
    Json b = Json::array();
    for (const auto& q : P.bias()) b.push_back(rational_json(q));
    d["bias"] = b;
    d["noise_bound"] = rational_json(P.noise_bound());
    dists.push_back(d);
  }
  Json j;
  j["domain_size"] = inst.domain_size();
  j["benchmark"] = to_string(inst.benchmark());
  j["class"] = c;
  j["bayes"] = hypothesis_json(inst.shared_bayes());
  j["distributions"] = dists;
  return j;
}

inline MdlInstance instance_from_json(const Json& j, const std::string& prefix = "instance.inline.") {
  using detail::get_as;
  using detail::require;
  if (!j.is_object()) throw ConfigError(prefix.substr(0, prefix.size() - 1), "expected an object");
  const auto n = get_as<std::size_t>(require(j, "domain_size", prefix + "domain_size"), prefix + "domain_size");
  Benchmark bench{};
  try {
    bench = parse_benchmark(get_as<std::string>(require(j, "benchmark", prefix + "benchmark"), prefix + "benchmark"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(prefix + "benchmark", e.what());
  }
  const Json& c = require(j, "class", prefix + "class");
  const std::string cp = prefix + "class.";
  const auto kind = get_as<std::string>(require(c, "kind", cp + "kind"), cp + "kind");
  try {
    std::optional<HypothesisClass> cls;
    auto read_blocks = [&] {
      std::vector<std::vector<Point>> blocks;
      for (const auto& b : require(c, "blocks", cp + "blocks")) {
        std::vector<Point> pts;
        for (const auto& v : b) pts.push_back(get_as<Point>(v, cp + "blocks"));
        blocks.push_back(std::move(pts));
      }
      return blocks;
    };
    if (kind == "explicit") {
      std::vector<Hypothesis> members;
      for (const auto& m : require(c, "members", cp + "members")) members.push_back(hypothesis_from_json(m, n, cp + "members"));
      cls = HypothesisClass::explicit_list(n, std::move(members),
                                           get_as<std::size_t>(require(c, "vc_dim", cp + "vc_dim"), cp + "vc_dim"));
    } else if (kind == "fixed-size-blocks") {
      cls = HypothesisClass::fixed_size_blocks(
          n, read_blocks(), get_as<std::size_t>(require(c, "subset_size", cp + "subset_size"), cp + "subset_size"));
    } else if (kind == "any-subset-blocks") {
      cls = HypothesisClass::any_subset_blocks(n, read_blocks());
    } else {
      throw ConfigError(cp + "kind", "unknown class kind '" + kind + "'");
    }
    std::vector<NoisyDistribution> dists;
    const Json& ds = require(j, "distributions", prefix + "distributions");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string dp = prefix + "distributions[" + std::to_string(i) + "].";
      std::vector<double> m;
      for (const auto& v : require(ds[i], "marginal", dp + "marginal")) m.push_back(get_as<double>(v, dp + "marginal"));
      std::vector<Rational> b;
      for (const auto& v : require(ds[i], "bias", dp + "bias")) b.push_back(rational_from_json(v, dp + "bias"));
      dists.emplace_back(std::move(m), std::move(b),
                         rational_from_json(require(ds[i], "noise_bound", dp + "noise_bound"), dp + "noise_bound"));
    }
    return {std::move(*cls), std::move(dists), hypothesis_from_json(require(j, "bayes", prefix + "bayes"), n,
                                                                    prefix + "bayes"),
            bench};
  } catch (const InvariantError& e) {
    throw ConfigError(prefix.substr(0, prefix.size() - 1), e.what());
  }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct SweepSection {
  SweepParameter parameter = SweepParameter::K;
  std::vector<std::string> grid;
  friend bool operator==(const SweepSection&, const SweepSection&) = default;
};

struct CalibrateSection {
  double target = 0.9;
  double lo = 0.1;
  double hi = 16.0;
  friend bool operator==(const CalibrateSection&, const CalibrateSection&) = default;
};

struct RunConfig {
  std::string command = "run";
  AlgorithmConfig algorithm;
  InstanceConfig instance;
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;
  /// 0 means "use the environment default".
  unsigned threads = 0;
  std::optional<SweepSection> sweep;
  std::optional<CalibrateSection> calibrate;
  std::string out_dir = ".";
  bool svg = false;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.command == b.command && a.algorithm == b.algorithm && a.instance == b.instance &&
           a.trials == b.trials && a.seed == b.seed && a.threads == b.threads && a.sweep == b.sweep &&
           a.calibrate == b.calibrate && a.out_dir == b.out_dir && a.svg == b.svg &&
           (!a.instance.inline_instance ||
            instance_json(*a.instance.inline_instance) == instance_json(*b.instance.inline_instance));
  }
};

inline Json config_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  Json a;
  a["name"] = to_string(c.algorithm.id);
  a["epsilon"] = rational_json(c.algorithm.eps);
  a["delta"] = c.algorithm.delta;
  a["c_sl"] = c.algorithm.c_sl;
  if (c.algorithm.force_cond) a["force_cond"] = *c.algorithm.force_cond;
  a["mm_separate_proxy"] = c.algorithm.mm_separate_proxy;
  a["query"] = to_string(c.algorithm.query);
  j["algorithm"] = a;
  Json i;
  if (c.instance.inline_instance) {
    i["inline"] = instance_json(*c.instance.inline_instance);
  } else {
    i["generator"] = c.instance.generator;
    i["k"] = c.instance.k;
    i["d"] = c.instance.d;
    if (c.instance.eps) i["epsilon"] = rational_json(*c.instance.eps);
    if (c.instance.gamma) i["gamma"] = rational_json(*c.instance.gamma);
    i["eta"] = rational_json(c.instance.eta);
    i["alternative"] = c.instance.alternative;
    if (c.instance.planted_block) i["planted_block"] = *c.instance.planted_block;
    i["seed"] = c.instance.seed;
  }
  j["instance"] = i;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (c.sweep) j["sweep"] = Json{{"parameter", to_string(c.sweep->parameter)}, {"grid", c.sweep->grid}};
  if (c.calibrate) {
    j["calibrate"] = Json{{"target", c.calibrate->target}, {"lo", c.calibrate->lo}, {"hi", c.calibrate->hi}};
  }
  j["output"] = Json{{"dir", c.out_dir}, {"svg", c.svg}};
  return j;
}

/// Validates every field before anything is sampled; errors name the field.
inline RunConfig config_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config", "top level must be an object");
  reject_unknown(j, {"command", "algorithm", "instance", "trials", "seed", "threads", "sweep", "calibrate", "output"}, "");
  RunConfig c;
  read_opt(j, "command", "", c.command);

  const Json& a = require(j, "algorithm", "algorithm");
  reject_unknown(a, {"name", "epsilon", "delta", "c_sl", "force_cond", "mm_separate_proxy", "query"}, "algorithm.");
  c.algorithm.id = parse_algorithm(get_as<std::string>(require(a, "name", "algorithm.name"), "algorithm.name"));
  c.algorithm.eps = rational_from_json(require(a, "epsilon", "epsilon"), "epsilon");
  c.algorithm.delta = get_as<double>(require(a, "delta", "delta"), "delta");
  read_opt(a, "c_sl", "algorithm.", c.algorithm.c_sl);
  if (const Json* v = find(a, "force_cond")) c.algorithm.force_cond = get_as<bool>(*v, "algorithm.force_cond");
  read_opt(a, "mm_separate_proxy", "algorithm.", c.algorithm.mm_separate_proxy);
  if (const Json* v = find(a, "query")) c.algorithm.query = parse_query(get_as<std::string>(*v, "algorithm.query"));
  c.algorithm.validate();

  const Json& i = require(j, "instance", "instance");
  reject_unknown(i, {"generator", "k", "d", "epsilon", "gamma", "eta", "alternative", "planted_block", "seed", "inline"},
                 "instance.");
  if (const Json* v = find(i, "inline")) {
    c.instance.inline_instance = instance_from_json(*v);
    c.instance.generator = "inline";
  } else {
    c.instance.generator = get_as<std::string>(require(i, "generator", "instance.generator"), "instance.generator");
    const auto& names = generator_names();
    if (std::find(names.begin(), names.end(), c.instance.generator) == names.end()) {
      throw ConfigError("instance.generator", "unknown generator '" + c.instance.generator + "'");
    }
    read_opt(i, "k", "instance.", c.instance.k);
    read_opt(i, "d", "instance.", c.instance.d);
    if (c.instance.k == 0) throw ConfigError("instance.k", "must be >= 1");
    if (c.instance.d == 0) throw ConfigError("instance.d", "must be >= 1");
    if (const Json* v = find(i, "epsilon")) c.instance.eps = rational_from_json(*v, "instance.epsilon");
    if (const Json* v = find(i, "gamma")) c.instance.gamma = rational_from_json(*v, "instance.gamma");
    if (const Json* v = find(i, "eta")) c.instance.eta = rational_from_json(*v, "instance.eta");
    if (c.instance.eta < Rational(0) || c.instance.eta >= Rational(1, 2)) {
      throw ConfigError("instance.eta", "must lie in [0, 1/2)");
    }
    read_opt(i, "alternative", "instance.", c.instance.alternative);
    if (const Json* v = find(i, "planted_block")) {
      c.instance.planted_block = get_as<std::size_t>(*v, "instance.planted_block");
    }
    read_opt(i, "seed", "instance.", c.instance.seed);
  }

  read_opt(j, "trials", "", c.trials);
  if (c.trials == 0) throw ConfigError("trials", "must be >= 1");
  read_opt(j, "seed", "", c.seed);
  read_opt(j, "threads", "", c.threads);

  if (const Json* s = find(j, "sweep")) {
    reject_unknown(*s, {"parameter", "grid"}, "sweep.");
    SweepSection sw;
    sw.parameter = parse_sweep_parameter(get_as<std::string>(require(*s, "parameter", "sweep.parameter"), "sweep.parameter"));
    const Json& g = require(*s, "grid", "sweep.grid");
    if (!g.is_array()) throw ConfigError("sweep.grid", "expected a list");
    for (const auto& v : g) {
      if (v.is_string()) {
        sw.grid.push_back(v.get<std::string>());
      } else if (v.is_number_integer()) {
        sw.grid.push_back(std::to_string(v.get<std::int64_t>()));
      } else if (v.is_number()) {
        sw.grid.push_back(format_double(v.get<double>()));
      } else {
        throw ConfigError("sweep.grid", "entries must be numbers or strings");
      }
    }
    c.sweep = std::move(sw);
  }
  if (const Json* s = find(j, "calibrate")) {
    reject_unknown(*s, {"target", "lo", "hi"}, "calibrate.");
    CalibrateSection cs;
    read_opt(*s, "target", "calibrate.", cs.target);
    read_opt(*s, "lo", "calibrate.", cs.lo);
    read_opt(*s, "hi", "calibrate.", cs.hi);
    c.calibrate = cs;
  }
  if (const Json* o = find(j, "output")) {
    reject_unknown(*o, {"dir", "svg"}, "output.");
    read_opt(*o, "dir", "output.", c.out_dir);
    read_opt(*o, "svg", "output.", c.svg);
  }
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV and SVG
// ---------------------------------------------------------------------------

/// Quotes a field when it holds a comma, quote, CR or LF.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_field(fields[i]);
  }
  os << '\n';
}

template <class T, class F>
std::string join(const std::vector<T>& v, char sep, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += fmt(v[i]);
  }
  return out;
}

inline const std::vector<std::string>& records_header() {
  static const std::vector<std::string> h{
      "trial",    "seed",           "algorithm",        "instance",           "success",       "max_excess",
      "total_samples", "samples_per_dist", "rounds", "sub_rounds_per_round", "path", "non_terminated",
      "nu_cap_hit", "removals",     "removal_violations", "halving_rounds_ok", "decisions"};
  return h;
}

inline void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  write_csv_row(os, records_header());
  for (const auto& r : records) {
    write_csv_row(os, {std::to_string(r.trial), std::to_string(r.seed), r.algorithm, r.instance,
                       r.success ? "1" : "0", format_double(r.max_excess), std::to_string(r.total_samples),
                       join(r.samples_per_distribution, ';', [](std::uint64_t v) { return std::to_string(v); }),
                       std::to_string(r.rounds),
                       join(r.sub_rounds_per_round, ';', [](std::size_t v) { return std::to_string(v); }), r.path,
                       r.non_terminated ? "1" : "0", r.nu_cap_hit ? "1" : "0", std::to_string(r.removals),
                       std::to_string(r.removal_violations), std::to_string(r.halving_rounds_ok),
                       join(r.decisions, ';', [](Decision d) { return std::string(to_string(d)); })});
  }
}

inline const std::vector<std::string>& table_header() {
  static const std::vector<std::string> h{"grid_value",         "trials",   "successes",
                                          "success_rate",       "wilson_lo", "wilson_hi",
                                          "mean_total_samples", "mean_samples_per_dist", "flags_count"};
  return h;
}

inline void write_table_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  write_csv_row(os, table_header());
  for (const auto& row : rows) {
    const auto& s = row.summary;
    write_csv_row(os, {row.grid_value, std::to_string(s.trials), std::to_string(s.successes),
                       format_double(s.success_rate), format_double(s.wilson.lo), format_double(s.wilson.hi),
                       format_double(s.mean_total_samples),
                       join(s.mean_samples_per_distribution, ';', [](double v) { return format_double(v); }),
                       std::to_string(s.flags_count)});
  }
}

/// Numeric value of a grid entry ("1/4", "0.1", "8").
inline double grid_number(const std::string& v) { return Rational::parse(v).to_double(); }

/// Single line chart of mean_total_samples against the grid value.
inline std::string table_svg(const std::vector<SweepRow>& rows, const std::string& x_label) {
  constexpr double W = 640, H = 400, L = 80, R = 20, T = 20, B = 60;
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) pts.emplace_back(grid_number(r.grid_value), r.summary.mean_total_samples);
  double x0 = pts.empty() ? 0 : pts.front().first, x1 = x0, y1 = 0;
  for (auto [x, y] : pts) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == 0) y1 = 1;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - y / y1 * (H - T - B); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label
     << "</text>\n";
  os << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
     << (T + H - B) / 2 << ")\">mean_total_samples</text>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << format_double(x0)
     << "</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << format_double(x1)
     << "</text>\n";
  os << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << format_double(y1) << "</text>\n";
  os << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">0</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << sx(pts[i].first) << ',' << sy(pts[i].second);
  os << "\"/>\n";
  for (auto [x, y] : pts) os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace mdln
