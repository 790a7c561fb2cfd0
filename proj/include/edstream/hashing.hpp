#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "edstream/errors.hpp"

// Randomness utilities shared by the whole pipeline: arithmetic in the prime
// field GF(2^61 - 1), seed derivation, a counter-mode generator, pairwise and
// t-wise independent hash families, and Karp-Rabin string fingerprints.
//
// Every random choice in the engine descends from one master seed through
// labeled SeedTree paths, so a single integer reproduces an entire run.

namespace edstream {

inline constexpr std::uint64_t kFieldPrime = (std::uint64_t{1} << 61) - 1;

// ----- GF(2^61 - 1) ---------------------------------------------------------

inline std::uint64_t field_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a + b;  // a, b < 2^61 so no overflow
  s = (s & kFieldPrime) + (s >> 61);
  return s >= kFieldPrime ? s - kFieldPrime : s;
}

inline std::uint64_t field_sub(std::uint64_t a, std::uint64_t b) {
  return a >= b ? a - b : a + kFieldPrime - b;
}

inline std::uint64_t field_mul(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 t = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(t) & kFieldPrime;
  std::uint64_t hi = static_cast<std::uint64_t>(t >> 61);
  return field_add(lo, hi);
}

inline std::uint64_t field_pow(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t acc = 1;
  while (exp != 0) {
    if (exp & 1) acc = field_mul(acc, base);
    base = field_mul(base, base);
    exp >>= 1;
  }
  return acc;
}

// Reduce an arbitrary 64-bit value into [0, p).
inline std::uint64_t field_reduce(std::uint64_t x) {
  x = (x & kFieldPrime) + (x >> 61);
  return x >= kFieldPrime ? x - kFieldPrime : x;
}

// 1 + q + q^2 + ... + q^(r-1) in the field, O(log r).
// Doubling a length-L series S with P = q^L: S(2L) = S * (1 + P), and
// S(2L+1) = S(2L) + q^(2L); bits of r are consumed most significant first.
inline std::uint64_t field_geometric_sum(std::uint64_t q, std::uint64_t r) {
  std::uint64_t series = 0;
  std::uint64_t qpow = 1;
  for (int i = 63; i >= 0; --i) {
    series = field_mul(series, field_add(1, qpow));
    qpow = field_mul(qpow, qpow);
    if ((r >> i) & 1) {
      series = field_add(series, qpow);
      qpow = field_mul(qpow, q);
    }
  }
  return series;
}

// ----- seeding and generation ------------------------------------------------

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic labeled seed derivation. child("copy", 3) of a given master
// always yields the same seed, and distinct labels/indices decorrelate.
class SeedTree {
 public:
  SeedTree() : seed_(0) {}
  explicit SeedTree(std::uint64_t seed) : seed_(seed) {}

  SeedTree child(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = seed_;
    for (char c : label) h = mix64(h ^ static_cast<unsigned char>(c));
    return SeedTree(mix64(h ^ mix64(index ^ 0xA5A5A5A5A5A5A5A5ull)));
  }

  std::uint64_t value() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// Counter-mode generator (splitmix64 stream). Not cryptographic; stable across
// platforms, which std::uniform_int_distribution is not.
class Prg {
 public:
  explicit Prg(std::uint64_t seed) : state_(seed) {}
  explicit Prg(const SeedTree& s) : state_(s.value()) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, p) by rejection; only the single value p is ever rejected.
  std::uint64_t next_field() {
    for (;;) {
      std::uint64_t v = next() & kFieldPrime;
      if (v != kFieldPrime) return v;
    }
  }

  // Uniform in [0, bound) by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
      std::uint64_t v = next();
      if (v < limit) return v % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// ----- hash families ---------------------------------------------------------

enum class FamilyKind { Pairwise, TWise };

// Polynomial hash over GF(2^61-1) reduced to [0, range). Pairwise is degree-1
// with a nonzero leading coefficient; t-wise uses t coefficients via Horner.
class HashFamily {
 public:
  HashFamily() = default;

  static HashFamily sample(const SeedTree& seed, FamilyKind kind, std::uint64_t range,
                           std::uint32_t degree = 2) {
    if (range < 2 || range > kFieldPrime) raise(Errc::BadRange, "hash range must be in [2, p]");
    if (kind == FamilyKind::Pairwise) degree = 2;
    if (degree < 2) raise(Errc::BadParams, "independence degree must be >= 2");
    HashFamily f;
    f.range_ = range;
    Prg prg(seed);
    f.coeffs_.resize(degree);
    for (auto& c : f.coeffs_) c = prg.next_field();
    // leading coefficient nonzero so pairwise maps are non-constant
    while (f.coeffs_.front() == 0) f.coeffs_.front() = prg.next_field();
    return f;
  }

  // pre: x < p
  std::uint64_t operator()(std::uint64_t x) const {
    std::uint64_t acc = 0;
    for (std::uint64_t c : coeffs_) acc = field_add(field_mul(acc, x), c);
    return acc % range_;
  }

  std::uint64_t range() const { return range_; }
  std::uint32_t degree() const { return static_cast<std::uint32_t>(coeffs_.size()); }

  // test hook: fully specified family
  static HashFamily from_coeffs(std::vector<std::uint64_t> coeffs, std::uint64_t range) {
    if (range < 2 || range > kFieldPrime) raise(Errc::BadRange, "hash range must be in [2, p]");
    HashFamily f;
    f.coeffs_ = std::move(coeffs);
    f.range_ = range;
    return f;
  }

 private:
  std::vector<std::uint64_t> coeffs_;
  std::uint64_t range_ = 2;
};

inline HashFamily sample_family(const SeedTree& seed, FamilyKind kind, std::uint64_t range,
                                std::uint32_t degree = 2) {
  return HashFamily::sample(seed, kind, range, degree);
}

inline std::uint64_t eval_hash(const HashFamily& f, std::uint64_t x) { return f(x); }

// ----- Karp-Rabin fingerprints ----------------------------------------------

// fp(s) = sum (s_i + 1) * base^i over GF(2^61-1), left symbol at power 0.
// Composition: fp(uv) = fp(u) + base^|u| * fp(v), so parse nodes carry
// (fp, base^span) and combine in O(1) (powers in O(log r)).
class Fingerprinter {
 public:
  Fingerprinter() : base_(3) {}

  static Fingerprinter sample(const SeedTree& seed) {
    Prg prg(seed);
    Fingerprinter f;
    f.base_ = 2 + prg.next_below(kFieldPrime - 3);  // in [2, p-2]
    return f;
  }

  std::uint64_t base() const { return base_; }

  std::uint64_t symbol_fp(char32_t c) const {
    return field_reduce(static_cast<std::uint64_t>(c) + 1);
  }

  // combine fp(u), base^|u|, fp(v) -> fp(uv)
  std::uint64_t concat(std::uint64_t fp_u, std::uint64_t blen_u, std::uint64_t fp_v) const {
    return field_add(fp_u, field_mul(blen_u, fp_v));
  }

  // fp(a^r) from fp(a), base^|a|
  std::uint64_t power(std::uint64_t fp_a, std::uint64_t blen_a, std::uint64_t r) const {
    return field_mul(fp_a, field_geometric_sum(blen_a, r));
  }

  std::uint64_t string_fp(const char32_t* s, std::size_t n) const {
    std::uint64_t fp = 0;
    std::uint64_t pow = 1;
    for (std::size_t i = 0; i < n; ++i) {
      fp = field_add(fp, field_mul(pow, symbol_fp(s[i])));
      pow = field_mul(pow, base_);
    }
    return fp;
  }

 private:
  std::uint64_t base_;
};

}  // namespace edstream
