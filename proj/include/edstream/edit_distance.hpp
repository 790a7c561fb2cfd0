#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "edstream/grammar.hpp"

// Banded and streaming Levenshtein kernels. Every routine caps its answer:
// values above the bound are reported as "no answer" rather than approximated,
// so a returned distance is always exact.

namespace edstream {

// Exact edit distance if it is <= bound, nullopt otherwise. Band of half-width
// `bound` around the diagonal; aborts as soon as a full antidiagonal exceeds it.
inline std::optional<std::uint32_t> banded_edit_distance(TextView a, TextView b,
                                                         std::uint32_t bound) {
  const std::size_t n = a.size(), m = b.size();
  if (n > m) return banded_edit_distance(b, a, bound);
  if (m - n > bound) return std::nullopt;
  const std::uint32_t inf = bound + 1;
  const std::size_t k = bound;
  std::vector<std::uint32_t> prev(m + 1, inf), cur(m + 1, inf);
  for (std::size_t j = 0; j <= std::min(m, k); ++j) prev[j] = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > k ? i - k : 0;
    const std::size_t hi = std::min(m, i + k);
    std::uint32_t row_min = inf;
    if (lo == 0) {
      cur[0] = static_cast<std::uint32_t>(i) > bound ? inf : static_cast<std::uint32_t>(i);
      row_min = cur[0];
    } else {
      cur[lo - 1] = inf;
    }
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
      std::uint32_t best = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      best = std::min(best, prev[j] + 1);
      best = std::min(best, cur[j - 1] + 1);
      cur[j] = std::min(best, inf);
      row_min = std::min(row_min, cur[j]);
    }
    if (hi < m) cur[hi + 1] = inf;
    if (row_min > bound) return std::nullopt;
    std::swap(prev, cur);
  }
  return prev[m] <= bound ? std::make_optional(prev[m]) : std::nullopt;
}

struct SuffixMatch {
  std::uint64_t distance = 0;
  std::uint64_t suffix_start = 0;  // 1-based; |text|+1 names the empty suffix

  friend bool operator==(const SuffixMatch&, const SuffixMatch&) = default;
};

// min over suffixes s of text (empty included) of ED(s, pattern), if <= cap.
// Ties on distance resolve to the smallest (leftmost) suffix start. Classic
// free-start column DP; cells are clamped at cap+1 so entries stay small.
inline std::optional<SuffixMatch> suffix_min_edit_distance(TextView text, TextView pattern,
                                                           std::uint32_t cap) {
  const std::size_t n = text.size(), m = pattern.size();
  const std::uint32_t inf = cap + 1;
  std::vector<std::uint32_t> d(m + 1), nd(m + 1);
  std::vector<std::uint64_t> s(m + 1), ns(m + 1);
  for (std::size_t p = 0; p <= m; ++p) {
    d[p] = static_cast<std::uint32_t>(std::min<std::size_t>(p, inf));
    s[p] = 1;
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const char32_t c = text[j - 1];
    nd[0] = 0;
    ns[0] = j + 1;
    for (std::size_t p = 1; p <= m; ++p) {
      std::uint32_t best = std::min<std::uint32_t>(d[p - 1] + (c == pattern[p - 1] ? 0 : 1), inf);
      std::uint64_t start = s[p - 1];
      auto consider = [&](std::uint32_t v, std::uint64_t st) {
        if (v < best || (v == best && st < start)) {
          best = v;
          start = st;
        }
      };
      consider(std::min(d[p] + 1, inf), s[p]);
      consider(std::min(nd[p - 1] + 1, inf), ns[p - 1]);
      nd[p] = best;
      ns[p] = start;
    }
    d.swap(nd);
    s.swap(ns);
  }
  if (d[m] > cap) return std::nullopt;
  return SuffixMatch{d[m], s[m]};
}

// Streaming form of the same DP: one column per pattern prefix, advanced a
// text symbol at a time. push() returns the exact (uncapped) suffix minimum
// after that symbol; values never exceed the pattern length.
class OnlineSuffixDp {
 public:
  explicit OnlineSuffixDp(Text pattern) : pattern_(std::move(pattern)), d_(pattern_.size() + 1) {
    for (std::size_t p = 0; p < d_.size(); ++p) d_[p] = static_cast<std::uint32_t>(p);
  }

  const Text& pattern() const { return pattern_; }

  std::uint32_t push(char32_t c) {
    std::uint32_t diag = d_[0];  // previous d_[p-1]
    d_[0] = 0;
    for (std::size_t p = 1; p < d_.size(); ++p) {
      const std::uint32_t up = d_[p];
      std::uint32_t best = diag + (c == pattern_[p - 1] ? 0 : 1);
      best = std::min(best, up + 1);
      best = std::min(best, d_[p - 1] + 1);
      diag = up;
      d_[p] = best;
    }
    return d_.back();
  }

  std::uint32_t current() const { return d_.back(); }

 private:
  Text pattern_;
  std::vector<std::uint32_t> d_;
};

inline std::optional<std::uint32_t> grammar_edit_distance(const Grammar& a, const Grammar& b,
                                                          std::uint32_t bound,
                                                          std::uint64_t guard = kDefaultEvalGuard) {
  return banded_edit_distance(eval(a, guard), eval(b, guard), bound);
}

inline std::optional<SuffixMatch> grammar_suffix_min(const Grammar& text, const Grammar& pattern,
                                                     std::uint32_t cap,
                                                     std::uint64_t guard = kDefaultEvalGuard) {
  return suffix_min_edit_distance(eval(text, guard), eval(pattern, guard), cap);
}

}  // namespace edstream
