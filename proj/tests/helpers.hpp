#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "edstream/grammar.hpp"

namespace edstream::testing {

inline Text random_text(std::mt19937_64& rng, std::size_t n, unsigned sigma) {
  Text t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<char32_t>(U'a' + rng() % sigma));
  return t;
}

// j random edits (substitution / deletion / insertion), applied in place
inline Text with_edits(std::mt19937_64& rng, Text s, unsigned j, unsigned sigma) {
  for (unsigned e = 0; e < j && !s.empty(); ++e) {
    const unsigned op = rng() % 3;
    const std::size_t pos = rng() % s.size();
    const char32_t c = static_cast<char32_t>(U'a' + rng() % sigma);
    if (op == 0) s[pos] = c;
    else if (op == 1) s.erase(s.begin() + pos);
    else s.insert(s.begin() + pos, c);
  }
  return s;
}

// plain full-table Levenshtein, no banding, no caps
inline std::uint64_t slow_edit_distance(TextView a, TextView b) {
  std::vector<std::uint64_t> col(b.size() + 1), next(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) col[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    next[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::uint64_t sub = col[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      next[j] = std::min({sub, col[j] + 1, next[j - 1] + 1});
    }
    col.swap(next);
  }
  return col[b.size()];
}

inline Text ascii(std::string_view s) { return Text(s.begin(), s.end()); }

}  // namespace edstream::testing
