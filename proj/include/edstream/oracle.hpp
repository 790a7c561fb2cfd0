#pragma once

#include <cstdint>
#include <vector>

#include "edstream/errors.hpp"
#include "edstream/grammar.hpp"

// Reference answers for the streaming problem, computed the slow, unclamped
// way. One output entry per text symbol: the exact minimum, over all suffixes
// of the text read so far (empty suffix included), of the edit distance to the
// pattern. Quadratic work, guarded by an explicit cell budget so accidental
// huge inputs fail loudly instead of hanging.

namespace edstream {

inline constexpr std::uint64_t kDefaultOracleBudget = 100'000'000;

inline std::vector<std::uint64_t> oracle_all_positions(
    TextView pattern, TextView text, std::uint64_t cell_budget = kDefaultOracleBudget) {
  const std::uint64_t n = text.size(), m = pattern.size();
  if ((n + 1) * (m + 1) > cell_budget) raise(Errc::BudgetExceeded, "oracle table too large");
  std::vector<std::uint64_t> col(m + 1), next(m + 1);
  for (std::uint64_t p = 0; p <= m; ++p) col[p] = p;
  std::vector<std::uint64_t> out;
  out.reserve(n);
  for (std::uint64_t j = 1; j <= n; ++j) {
    const char32_t c = text[j - 1];
    next[0] = 0;
    for (std::uint64_t p = 1; p <= m; ++p) {
      const std::uint64_t subst = col[p - 1] + (c == pattern[p - 1] ? 0 : 1);
      const std::uint64_t drop_text = col[p] + 1;
      const std::uint64_t drop_pat = next[p - 1] + 1;
      next[p] = std::min(subst, std::min(drop_text, drop_pat));
    }
    col.swap(next);
    out.push_back(col[m]);
  }
  return out;
}

}  // namespace edstream
