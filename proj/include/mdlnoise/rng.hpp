#pragma once

#include <cstdint>

#include "mdlnoise/rational.hpp"

namespace mdln {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Bijective on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Folds a tuple of identifiers into one 64-bit key.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t id) {
  return mix64(key ^ mix64(id + kGoldenGamma));
}

/// Counter-based stream: the n-th output depends only on (key, n), so any
/// draw can be reproduced without replaying the ones before it.
class CounterStream {
 public:
  constexpr CounterStream() = default;
  constexpr explicit CounterStream(std::uint64_t key) : key_(key) {}

  [[nodiscard]] constexpr std::uint64_t at(std::uint64_t n) const { return mix64(key_ + (n + 1) * kGoldenGamma); }

  [[nodiscard]] std::uint64_t next() { return at(counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  [[nodiscard]] double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Bernoulli(p) decided exactly against a 64-bit uniform integer.
  [[nodiscard]] bool bernoulli(const Rational& p) { return bernoulli_from(next(), p); }

  /// Uniform integer in [0, bound) by multiply-shift (bias below 2^-40 for the
  /// bounds used here).
  [[nodiscard]] std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  [[nodiscard]] constexpr std::uint64_t position() const { return counter_; }
  [[nodiscard]] constexpr std::uint64_t key() const { return key_; }

  static bool bernoulli_from(std::uint64_t r, const Rational& p) {
    if (p.num() <= 0) return false;
    if (p.num() >= p.den()) return true;
    // r / 2^64 < num / den  <=>  r * den < num * 2^64
    const auto lhs = static_cast<unsigned __int128>(r) * static_cast<std::uint64_t>(p.den());
    const auto rhs = static_cast<unsigned __int128>(static_cast<std::uint64_t>(p.num())) << 64;
    return lhs < rhs;
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace mdln
