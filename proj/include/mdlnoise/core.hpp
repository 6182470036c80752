#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdlnoise/rational.hpp"
#include "mdlnoise/rng.hpp"

namespace mdln {

using Point = std::uint32_t;

struct LabeledExample {
  Point x = 0;
  std::uint8_t y = 0;
  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

using Sample = std::vector<LabeledExample>;

/// Thrown when an object violates its construction invariants.
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite covariate space {0, ..., size-1}.
class Domain {
 public:
  explicit Domain(std::size_t size) : size_(size) {
    if (size == 0) throw InvariantError("domain size must be >= 1");
  }
  [[nodiscard]] std::size_t size() const { return size_; }
  [[nodiscard]] bool contains(std::size_t x) const { return x < size_; }
  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  std::size_t size_;
};

// ---------------------------------------------------------------------------
// Hypotheses
// ---------------------------------------------------------------------------

/// Binary classifier on a finite domain.
///
/// Either built from one bit per point (dense) or from the sorted set of
/// points mapped to 1 (subset indicator). The evaluation table is always
/// materialized, so f(x) is a single lookup; equality is semantic.
class Hypothesis {
 public:
  enum class Representation { DenseBits, SubsetIndicator };

  Hypothesis() = default;

  static Hypothesis zero(std::size_t domain_size) {
    Hypothesis h;
    h.bits_.assign(domain_size, 0);
    h.rep_ = Representation::SubsetIndicator;
    return h;
  }

  static Hypothesis dense(std::vector<std::uint8_t> bits) {
    for (auto& b : bits) {
      if (b > 1) throw InvariantError("dense hypothesis bits must be 0 or 1");
    }
    Hypothesis h;
    h.bits_ = std::move(bits);
    h.rep_ = Representation::DenseBits;
    return h;
  }

  /// Points must lie in the domain and be strictly increasing.
  static Hypothesis subset(std::size_t domain_size, std::span<const Point> points) {
    Hypothesis h = zero(domain_size);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i] >= domain_size) {
        throw InvariantError("subset point " + std::to_string(points[i]) + " outside domain of size " +
                             std::to_string(domain_size));
      }
      if (i > 0 && points[i] <= points[i - 1]) throw InvariantError("subset points must be strictly increasing");
      h.bits_[points[i]] = 1;
    }
    return h;
  }

  static Hypothesis subset(std::size_t domain_size, std::initializer_list<Point> points) {
    return subset(domain_size, std::span<const Point>(points.begin(), points.size()));
  }

  [[nodiscard]] std::size_t domain_size() const { return bits_.size(); }
  [[nodiscard]] Representation representation() const { return rep_; }

  [[nodiscard]] std::uint8_t operator()(std::size_t x) const { return bits_.at(x); }
  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }

  [[nodiscard]] std::vector<Point> ones() const {
    std::vector<Point> out;
    for (std::size_t x = 0; x < bits_.size(); ++x) {
      if (bits_[x]) out.push_back(static_cast<Point>(x));
    }
    return out;
  }

  [[nodiscard]] bool is_zero() const {
    return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
  }

  friend bool operator==(const Hypothesis& a, const Hypothesis& b) { return a.bits_ == b.bits_; }

 private:
  std::vector<std::uint8_t> bits_;
  Representation rep_ = Representation::DenseBits;
};

/// Hypothesis classes on a finite domain.
///
/// Explicit classes list their members. The two structured kinds contain the
/// zero function plus indicators of subsets of a single block; blocks are
/// pairwise disjoint point sets. FixedSize requires the subset to have exactly
/// `subset_size` points (VC dimension = subset_size once some block has at
/// least 2 subset_size - 1 points); AnySize allows every non-empty subset of a
/// block (VC dimension = largest block).
class HypothesisClass {
 public:
  enum class Kind { Explicit, ZeroPlusFixedSizeBlockSubsets, ZeroPlusAnyBlockSubsets };

  static HypothesisClass explicit_list(std::size_t domain_size, std::vector<Hypothesis> members,
                                       std::size_t vc_dim) {
    if (members.empty()) throw InvariantError("explicit class must be non-empty");
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i].domain_size() != domain_size) throw InvariantError("class member has wrong domain size");
      for (std::size_t j = 0; j < i; ++j) {
        if (members[i] == members[j]) throw InvariantError("explicit class contains duplicate hypotheses");
      }
    }
    HypothesisClass c(domain_size);
    c.kind_ = Kind::Explicit;
    c.members_ = std::move(members);
    c.vc_dim_ = vc_dim;
    return c;
  }

  static HypothesisClass fixed_size_blocks(std::size_t domain_size, std::vector<std::vector<Point>> blocks,
                                           std::size_t subset_size) {
    HypothesisClass c(domain_size);
    c.kind_ = Kind::ZeroPlusFixedSizeBlockSubsets;
    c.set_blocks(std::move(blocks));
    if (subset_size == 0) throw InvariantError("subset size must be >= 1");
    for (const auto& b : c.blocks_) {
      if (b.size() < subset_size) throw InvariantError("block smaller than subset size");
    }
    c.subset_size_ = subset_size;
    // A set A inside a block of size m is shattered iff every labeling with
    // j >= 1 ones extends to exactly s ones: |A| <= s and s - 1 <= m - |A|.
    for (const auto& b : c.blocks_) c.vc_dim_ = std::max(c.vc_dim_, std::min(subset_size, b.size() - subset_size + 1));
    return c;
  }

  static HypothesisClass any_subset_blocks(std::size_t domain_size, std::vector<std::vector<Point>> blocks) {
    HypothesisClass c(domain_size);
    c.kind_ = Kind::ZeroPlusAnyBlockSubsets;
    c.set_blocks(std::move(blocks));
    for (const auto& b : c.blocks_) c.vc_dim_ = std::max(c.vc_dim_, b.size());
    return c;
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] std::size_t domain_size() const { return domain_size_; }
  [[nodiscard]] std::size_t vc_dim() const { return vc_dim_; }
  [[nodiscard]] const std::vector<Hypothesis>& members() const { return members_; }
  [[nodiscard]] const std::vector<std::vector<Point>>& blocks() const { return blocks_; }
  [[nodiscard]] std::size_t subset_size() const { return subset_size_; }
  [[nodiscard]] bool is_structured() const { return kind_ != Kind::Explicit; }

  [[nodiscard]] bool contains(const Hypothesis& h) const {
    if (h.domain_size() != domain_size_) return false;
    if (kind_ == Kind::Explicit) return std::find(members_.begin(), members_.end(), h) != members_.end();
    auto ones = h.ones();
    if (ones.empty()) return true;
    for (const auto& block : blocks_) {
      if (!std::binary_search(block.begin(), block.end(), ones.front())) continue;
      const bool inside = std::all_of(ones.begin(), ones.end(),
                                      [&](Point x) { return std::binary_search(block.begin(), block.end(), x); });
      if (!inside) return false;
      return kind_ == Kind::ZeroPlusAnyBlockSubsets || ones.size() == subset_size_;
    }
    return false;
  }

  /// Number of members, saturating at UINT64_MAX.
  [[nodiscard]] std::uint64_t cardinality() const {
    if (kind_ == Kind::Explicit) return members_.size();
    std::uint64_t total = 1;  // f_0
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    for (const auto& b : blocks_) {
      std::uint64_t add = 0;
      if (kind_ == Kind::ZeroPlusFixedSizeBlockSubsets) {
        add = binomial_saturating(b.size(), subset_size_);
      } else {
        add = b.size() >= 64 ? kMax : (std::uint64_t{1} << b.size()) - 1;
      }
      total = (kMax - total < add) ? kMax : total + add;
    }
    return total;
  }

  /// Every member, f_0 first for structured classes. Throws if the class has
  /// more than `limit` members.
  [[nodiscard]] std::vector<Hypothesis> enumerate(std::uint64_t limit = 1'000'000) const {
    if (cardinality() > limit) throw std::length_error("class too large to enumerate");
    if (kind_ == Kind::Explicit) return members_;
    std::vector<Hypothesis> out;
    out.push_back(Hypothesis::zero(domain_size_));
    for (const auto& block : blocks_) {
      const std::size_t n = block.size();
      std::vector<Point> chosen;
      if (kind_ == Kind::ZeroPlusFixedSizeBlockSubsets) {
        std::vector<std::size_t> idx(subset_size_);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
          chosen.clear();
          for (auto i : idx) chosen.push_back(block[i]);
          out.push_back(Hypothesis::subset(domain_size_, chosen));
          std::size_t pos = subset_size_;
          while (pos > 0 && idx[pos - 1] == n - subset_size_ + pos - 1) --pos;
          if (pos == 0) break;
          ++idx[pos - 1];
          for (std::size_t j = pos; j < subset_size_; ++j) idx[j] = idx[j - 1] + 1;
        }
      } else {
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
          chosen.clear();
          for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1U) chosen.push_back(block[i]);
          }
          out.push_back(Hypothesis::subset(domain_size_, chosen));
        }
      }
    }
    return out;
  }

  static std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t r) {
    if (r > n) return 0;
    r = std::min(r, n - r);
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
      acc = acc * (n - r + i) / i;
      if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(acc);
  }

 private:
  explicit HypothesisClass(std::size_t domain_size) : domain_size_(domain_size) {
    if (domain_size == 0) throw InvariantError("domain size must be >= 1");
  }

  void set_blocks(std::vector<std::vector<Point>> blocks) {
    std::vector<std::uint8_t> used(domain_size_, 0);
    for (auto& b : blocks) {
      if (b.empty()) throw InvariantError("blocks must be non-empty");
      std::sort(b.begin(), b.end());
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] >= domain_size_) throw InvariantError("block point outside domain");
        if (used[b[i]]) throw InvariantError("blocks must be pairwise disjoint");
        used[b[i]] = 1;
      }
    }
    blocks_ = std::move(blocks);
  }

  std::size_t domain_size_;
  Kind kind_ = Kind::Explicit;
  std::vector<Hypothesis> members_;
  std::vector<std::vector<Point>> blocks_;
  std::size_t subset_size_ = 0;
  std::size_t vc_dim_ = 0;
};

/// Largest shattered set, by exhaustive search. Exponential; meant for tiny
/// classes (domain <= 20).
inline std::size_t brute_force_vc_dim(const HypothesisClass& cls) {
  const std::size_t n = cls.domain_size();
  if (n > 20) throw std::length_error("domain too large for brute-force VC dimension");
  const auto members = cls.enumerate();
  std::vector<std::uint32_t> masks;
  masks.reserve(members.size());
  for (const auto& h : members) {
    std::uint32_t m = 0;
    for (std::size_t x = 0; x < n; ++x) m |= static_cast<std::uint32_t>(h(x)) << x;
    masks.push_back(m);
  }
  std::size_t best = 0;
  std::vector<std::uint8_t> seen;
  for (std::uint32_t set = 1; set < (1U << n); ++set) {
    const auto sz = static_cast<std::size_t>(__builtin_popcount(set));
    if (sz <= best || (std::uint64_t{1} << sz) > masks.size()) continue;
    // Compress each projection to sz bits.
    seen.assign(std::size_t{1} << sz, 0);
    std::size_t distinct = 0;
    for (auto m : masks) {
      std::uint32_t proj = 0;
      std::uint32_t bit = 0;
      for (std::size_t x = 0; x < n; ++x) {
        if (set >> x & 1U) proj |= ((m >> x) & 1U) << bit++;
      }
      if (!seen[proj]) {
        seen[proj] = 1;
        ++distinct;
      }
    }
    if (distinct == (std::size_t{1} << sz)) best = sz;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// Distribution over domain x {0,1}: marginal p over points, and
/// q_x = P(Y = 1 | X = x). The declared noise bound eta must be < 1/2 and must
/// dominate min(q_x, 1 - q_x) on every point of positive mass.
class NoisyDistribution {
 public:
  static constexpr double kMassTolerance = 1e-12;

  NoisyDistribution(std::vector<double> marginal, std::vector<Rational> bias, Rational noise_bound)
      : marginal_(std::move(marginal)), bias_(std::move(bias)), noise_bound_(noise_bound) {
    if (marginal_.empty()) throw InvariantError("marginal must be non-empty");
    if (marginal_.size() != bias_.size()) throw InvariantError("marginal and bias sizes differ");
    if (noise_bound_ < Rational(0) || noise_bound_ >= Rational(1, 2)) {
      throw InvariantError("noise bound must lie in [0, 1/2), got " + noise_bound_.str());
    }
    double total = 0.0;
    for (double p : marginal_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvariantError("marginal probabilities must be finite and >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
      throw InvariantError("marginal sums to " + std::to_string(total) + ", expected 1");
    }
    const Rational half(1, 2);
    bias_double_.reserve(bias_.size());
    for (std::size_t x = 0; x < bias_.size(); ++x) {
      const Rational& q = bias_[x];
      if (q < Rational(0) || q > Rational(1)) throw InvariantError("bias q_" + std::to_string(x) + " outside [0,1]");
      if (q == half) throw InvariantError("bias q_" + std::to_string(x) + " = 1/2 leaves the Bayes label undefined");
      if (marginal_[x] > 0.0) {
        const Rational flip = std::min(q, Rational(1) - q);
        if (flip > noise_bound_) {
          throw InvariantError("point " + std::to_string(x) + " has noise " + flip.str() + " above bound " +
                               noise_bound_.str());
        }
      }
      bias_double_.push_back(q.to_double());
    }
    cumulative_.resize(marginal_.size());
    std::partial_sum(marginal_.begin(), marginal_.end(), cumulative_.begin());
  }

  [[nodiscard]] std::size_t domain_size() const { return marginal_.size(); }
  [[nodiscard]] const std::vector<double>& marginal() const { return marginal_; }
  [[nodiscard]] const std::vector<Rational>& bias() const { return bias_; }
  [[nodiscard]] const std::vector<double>& bias_double() const { return bias_double_; }
  [[nodiscard]] const Rational& noise_bound() const { return noise_bound_; }

  [[nodiscard]] bool has_mass(std::size_t x) const { return marginal_[x] > 0.0; }
  [[nodiscard]] bool bayes_label(std::size_t x) const { return bias_[x] > Rational(1, 2); }

  [[nodiscard]] Hypothesis bayes_classifier() const {
    std::vector<std::uint8_t> bits(marginal_.size());
    for (std::size_t x = 0; x < bits.size(); ++x) bits[x] = bayes_label(x) ? 1 : 0;
    return Hypothesis::dense(std::move(bits));
  }

  /// eta*(x) = min(q_x, 1 - q_x).
  [[nodiscard]] Rational pointwise_noise(std::size_t x) const { return std::min(bias_[x], Rational(1) - bias_[x]); }

  /// eta* = sum_x p(x) eta*(x).
  [[nodiscard]] double bayes_error() const {
    double acc = 0.0;
    for (std::size_t x = 0; x < marginal_.size(); ++x) {
      acc += marginal_[x] * std::min(bias_double_[x], 1.0 - bias_double_[x]);
    }
    return acc;
  }

  /// True when every positive-mass point has noise exactly `rate`.
  [[nodiscard]] bool is_exact_rcn(const Rational& rate) const {
    for (std::size_t x = 0; x < marginal_.size(); ++x) {
      if (has_mass(x) && pointwise_noise(x) != rate) return false;
    }
    return true;
  }

  /// Inverse-CDF lookup for u in [0, 1).
  [[nodiscard]] Point point_at(double u) const {
    const double v = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), v);
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    if (idx >= cumulative_.size()) idx = cumulative_.size() - 1;
    while (marginal_[idx] <= 0.0 && idx > 0) --idx;  // rounding guard at the right edge
    return static_cast<Point>(idx);
  }

 private:
  std::vector<double> marginal_;
  std::vector<Rational> bias_;
  Rational noise_bound_;
  std::vector<double> bias_double_;
  std::vector<double> cumulative_;
};

enum class Benchmark { RCN, Minimax, Massart };

inline const char* to_string(Benchmark b) {
  switch (b) {
    case Benchmark::RCN: return "rcn";
    case Benchmark::Minimax: return "minimax";
    case Benchmark::Massart: return "massart";
  }
  return "?";
}

inline Benchmark parse_benchmark(const std::string& s) {
  if (s == "rcn") return Benchmark::RCN;
  if (s == "minimax" || s == "mm") return Benchmark::Minimax;
  if (s == "massart" || s == "mass") return Benchmark::Massart;
  throw std::invalid_argument("unknown benchmark '" + s + "'");
}

/// k noisy distributions that share one Bayes classifier from the class.
class MdlInstance {
 public:
  MdlInstance(HypothesisClass cls, std::vector<NoisyDistribution> distributions, Hypothesis shared_bayes,
              Benchmark benchmark)
      : cls_(std::move(cls)),
        distributions_(std::move(distributions)),
        shared_bayes_(std::move(shared_bayes)),
        benchmark_(benchmark) {
    if (distributions_.empty()) throw InvariantError("instance needs at least one distribution");
    const std::size_t n = cls_.domain_size();
    if (shared_bayes_.domain_size() != n) throw InvariantError("shared Bayes classifier has wrong domain size");
    if (!cls_.contains(shared_bayes_)) throw InvariantError("shared Bayes classifier is not a member of the class");
    for (std::size_t i = 0; i < distributions_.size(); ++i) {
      const auto& P = distributions_[i];
      if (P.domain_size() != n) throw InvariantError("distribution " + std::to_string(i) + " has wrong domain size");
      for (std::size_t x = 0; x < n; ++x) {
        if (P.has_mass(x) && P.bayes_label(x) != (shared_bayes_(x) != 0)) {
          throw InvariantError("distribution " + std::to_string(i) + " disagrees with the shared Bayes classifier at " +
                               std::to_string(x));
        }
      }
      if (benchmark_ == Benchmark::RCN && !P.is_exact_rcn(P.noise_bound())) {
        throw InvariantError("RCN benchmark requires noise exactly " + P.noise_bound().str() + " on distribution " +
                             std::to_string(i));
      }
    }
  }

  [[nodiscard]] std::size_t domain_size() const { return cls_.domain_size(); }
  [[nodiscard]] std::size_t k() const { return distributions_.size(); }
  [[nodiscard]] const HypothesisClass& hypothesis_class() const { return cls_; }
  [[nodiscard]] const std::vector<NoisyDistribution>& distributions() const { return distributions_; }
  [[nodiscard]] const NoisyDistribution& distribution(std::size_t i) const { return distributions_.at(i); }
  [[nodiscard]] const Hypothesis& shared_bayes() const { return shared_bayes_; }
  [[nodiscard]] Benchmark benchmark() const { return benchmark_; }

  [[nodiscard]] std::vector<Rational> noise_bounds() const {
    std::vector<Rational> out;
    for (const auto& P : distributions_) out.push_back(P.noise_bound());
    return out;
  }
  /// eta = max_i eta_i.
  [[nodiscard]] Rational max_noise_bound() const {
    Rational m(0);
    for (const auto& P : distributions_) m = std::max(m, P.noise_bound());
    return m;
  }
  [[nodiscard]] std::vector<double> bayes_errors() const {
    std::vector<double> out;
    for (const auto& P : distributions_) out.push_back(P.bayes_error());
    return out;
  }
  /// eta* = max_i eta_i*.
  [[nodiscard]] double minimax_bayes_error() const {
    double m = 0.0;
    for (const auto& P : distributions_) m = std::max(m, P.bayes_error());
    return m;
  }

 private:
  HypothesisClass cls_;
  std::vector<NoisyDistribution> distributions_;
  Hypothesis shared_bayes_;
  Benchmark benchmark_;
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Per-point label tallies of a sample; the sufficient statistic for every
/// empirical error and ERM computation in this library.
struct PointCounts {
  std::vector<std::uint64_t> ones;
  std::vector<std::uint64_t> zeros;
  std::uint64_t total = 0;

  PointCounts() = default;
  explicit PointCounts(std::size_t domain_size) : ones(domain_size, 0), zeros(domain_size, 0) {}

  void add(Point x, std::uint8_t y) {
    (y ? ones : zeros).at(x) += 1;
    ++total;
  }
  void add(const LabeledExample& e) { add(e.x, e.y); }
  [[nodiscard]] std::size_t domain_size() const { return ones.size(); }

  static PointCounts from(std::size_t domain_size, std::span<const LabeledExample> s) {
    PointCounts c(domain_size);
    for (const auto& e : s) {
      if (e.x >= domain_size) throw std::out_of_range("sample point " + std::to_string(e.x) + " outside domain");
      c.add(e);
    }
    return c;
  }
};

/// Seeded sampler over k distributions that counts every draw.
///
/// Draw n from distribution i is a pure function of (seed, trial, i, n), so
/// the stream for one distribution does not depend on how requests to other
/// distributions are interleaved. Not thread-safe; one oracle per trial.
class BudgetedOracle {
 public:
  BudgetedOracle(std::span<const NoisyDistribution> distributions, std::uint64_t seed, std::uint64_t trial = 0)
      : distributions_(distributions), seed_(seed), trial_(trial), draw_counts_(distributions.size(), 0) {
    const std::uint64_t base = derive_key(seed, trial);
    streams_.reserve(distributions.size());
    for (std::size_t i = 0; i < distributions.size(); ++i) streams_.emplace_back(derive_key(base, i + 1));
    mixture_ = CounterStream(derive_key(base, 0));
  }

  explicit BudgetedOracle(const MdlInstance& inst, std::uint64_t seed, std::uint64_t trial = 0)
      : BudgetedOracle(std::span<const NoisyDistribution>(inst.distributions()), seed, trial) {}

  [[nodiscard]] std::size_t k() const { return distributions_.size(); }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t trial() const { return trial_; }
  [[nodiscard]] const std::vector<std::uint64_t>& draw_counts() const { return draw_counts_; }
  [[nodiscard]] std::uint64_t total_draws() const {
    return std::accumulate(draw_counts_.begin(), draw_counts_.end(), std::uint64_t{0});
  }
  [[nodiscard]] const NoisyDistribution& distribution(std::size_t i) const { return distributions_[check(i)]; }

  LabeledExample draw(std::size_t i) {
    check(i);
    const auto& P = distributions_[i];
    const std::uint64_t n = draw_counts_[i]++;
    const std::uint64_t ux = streams_[i].at(2 * n);
    const std::uint64_t uy = streams_[i].at(2 * n + 1);
    const Point x = P.point_at(static_cast<double>(ux >> 11) * 0x1.0p-53);
    const bool y = CounterStream::bernoulli_from(uy, P.bias()[x]);
    return {x, static_cast<std::uint8_t>(y ? 1 : 0)};
  }

  Sample sample(std::size_t i, std::size_t count) {
    check(i);
    Sample s;
    s.reserve(count);
    for (std::size_t c = 0; c < count; ++c) s.push_back(draw(i));
    return s;
  }

  /// Same draws as sample(i, count), tallied without materializing them.
  void tally(std::size_t i, std::uint64_t count, PointCounts& into) {
    check(i);
    for (std::uint64_t c = 0; c < count; ++c) into.add(draw(i));
  }

  /// Uniform mixture over `active`: pick an index uniformly, then draw from
  /// it. The draw is charged to the picked index.
  void tally_mixture(std::span<const std::size_t> active, std::uint64_t count, PointCounts& into) {
    if (active.empty()) throw std::invalid_argument("mixture over an empty set");
    for (std::uint64_t c = 0; c < count; ++c) into.add(draw(active[mixture_.below(active.size())]));
  }

  Sample sample_mixture(std::span<const std::size_t> active, std::size_t count) {
    if (active.empty()) throw std::invalid_argument("mixture over an empty set");
    Sample s;
    s.reserve(count);
    for (std::size_t c = 0; c < count; ++c) s.push_back(draw(active[mixture_.below(active.size())]));
    return s;
  }

 private:
  std::size_t check(std::size_t i) const {
    if (i >= distributions_.size()) {
      throw std::out_of_range("distribution index " + std::to_string(i) + " out of range (k = " +
                              std::to_string(distributions_.size()) + ")");
    }
    return i;
  }

  std::span<const NoisyDistribution> distributions_;
  std::uint64_t seed_;
  std::uint64_t trial_;
  std::vector<std::uint64_t> draw_counts_;
  std::vector<CounterStream> streams_;
  CounterStream mixture_;
};

// ---------------------------------------------------------------------------
// Empirical error
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::uint64_t count_mistakes(const Hypothesis& f, const PointCounts& c) {
  if (f.domain_size() != c.domain_size()) throw std::invalid_argument("hypothesis and sample domains differ");
  std::uint64_t m = 0;
  for (std::size_t x = 0; x < c.domain_size(); ++x) m += f(x) ? c.zeros[x] : c.ones[x];
  return m;
}

/// Fraction of the sample that f mislabels, as an exact rational.
[[nodiscard]] inline Rational empirical_error(const Hypothesis& f, std::span<const LabeledExample> s) {
  if (s.empty()) throw std::invalid_argument("empirical error of an empty sample");
  std::uint64_t m = 0;
  for (const auto& e : s) {
    if (e.x >= f.domain_size()) throw std::out_of_range("sample point outside the hypothesis domain");
    m += f(e.x) != e.y ? 1 : 0;
  }
  return {static_cast<std::int64_t>(m), static_cast<std::int64_t>(s.size())};
}

[[nodiscard]] inline Rational empirical_error(const Hypothesis& f, const PointCounts& c) {
  if (c.total == 0) throw std::invalid_argument("empirical error of an empty sample");
  return {static_cast<std::int64_t>(count_mistakes(f, c)), static_cast<std::int64_t>(c.total)};
}

}  // namespace mdln
