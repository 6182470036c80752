#pragma once

#include <charconv>
#include <compare>
#include <concepts>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdln {

/// Exact rational number with 64-bit numerator and positive 64-bit
/// denominator, always stored in lowest terms.
///
/// Products are formed in 128-bit arithmetic and reduced before narrowing;
/// a result that does not fit in 64 bits throws std::overflow_error rather
/// than silently wrapping. The values this library deals with (biases such as
/// 93/200, accuracy parameters parsed from short decimals) stay far from the
/// limit.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT implicit
  template <std::floating_point F>
  Rational(F) = delete;
  Rational(std::int64_t n, std::int64_t d) { assign(n, d); }

  [[nodiscard]] constexpr std::int64_t num() const { return num_; }
  [[nodiscard]] constexpr std::int64_t den() const { return den_; }

  [[nodiscard]] double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  /// "num/den", or just "num" when the denominator is 1.
  [[nodiscard]] std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  /// Accepts "a/b", "-a/b", an integer, or a plain decimal like "0.465" or
  /// "1e-3" (converted exactly, no binary rounding).
  static Rational parse(std::string_view s) {
    auto fail = [&] {
      throw std::invalid_argument("not a rational: '" + std::string(s) + "'");
    };
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) fail();
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
      std::int64_t n = 0;
      std::int64_t d = 0;
      auto a = s.substr(0, slash);
      auto b = s.substr(slash + 1);
      if (std::from_chars(a.data(), a.data() + a.size(), n).ptr != a.data() + a.size()) fail();
      if (std::from_chars(b.data(), b.data() + b.size(), d).ptr != b.data() + b.size()) fail();
      if (d == 0) fail();
      return {n, d};
    }
    bool negative = false;
    if (s.front() == '-' || s.front() == '+') {
      negative = s.front() == '-';
      s.remove_prefix(1);
    }
    int exp10 = 0;
    if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
      auto es = s.substr(e + 1);
      if (!es.empty() && es.front() == '+') es.remove_prefix(1);
      if (std::from_chars(es.data(), es.data() + es.size(), exp10).ptr != es.data() + es.size()) fail();
      s = s.substr(0, e);
    }
    __int128 mant = 0;
    bool seen_digit = false;
    bool after_point = false;
    for (char c : s) {
      if (c == '.') {
        if (after_point) fail();
        after_point = true;
        continue;
      }
      if (c < '0' || c > '9') fail();
      seen_digit = true;
      mant = mant * 10 + (c - '0');
      if (mant > static_cast<__int128>(INT64_MAX)) throw std::overflow_error("rational literal too long");
      if (after_point) --exp10;
    }
    if (!seen_digit) fail();
    __int128 n = negative ? -mant : mant;
    __int128 d = 1;
    for (; exp10 > 0; --exp10) n *= 10;
    for (; exp10 < 0; ++exp10) d *= 10;
    return from_wide(n, d);
  }

  /// Shortest decimal that round-trips the double, then parsed exactly.
  /// 0.15 becomes 3/20, not the binary expansion of 0.15.
  static Rational from_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return parse(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                     static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                     static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return from_wide(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  }
  Rational operator-() const { return from_wide(-static_cast<__int128>(num_), den_); }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) = default;
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num_) * b.den_ <=> static_cast<__int128>(b.num_) * a.den_;
  }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

 private:
  static __int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Rational from_wide(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 g = gcd128(n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  void assign(std::int64_t n, std::int64_t d) { *this = from_wide(n, d); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

/// count/total <= bound, decided without rounding.
inline bool fraction_at_most(std::uint64_t count, std::uint64_t total, const Rational& bound) {
  // count * den <= num * total
  return static_cast<__int128>(count) * bound.den() <= static_cast<__int128>(bound.num()) * total;
}

}  // namespace mdln
