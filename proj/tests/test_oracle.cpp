#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "edstream/oracle.hpp"
#include "helpers.hpp"

using namespace edstream;
using edstream::testing::ascii;
using edstream::testing::random_text;
using edstream::testing::slow_edit_distance;

TEST_CASE("oracle reports the running min-suffix distance") {
  // pattern "abc" against text "abd": after each symbol the best suffix is
  // "a" (2 edits), "ab" (1 edit), then still 1 via "abd" or "ab"+d dropped
  const auto got = oracle_all_positions(ascii("abc"), ascii("abd"));
  REQUIRE(got == std::vector<std::uint64_t>{2, 1, 1});

  REQUIRE(oracle_all_positions(ascii("abc"), ascii("")).empty());

  // empty pattern: the empty suffix always matches at distance 0
  REQUIRE(oracle_all_positions(ascii(""), ascii("xyz")) ==
          std::vector<std::uint64_t>{0, 0, 0});

  // exact occurrence drives the value to zero at its end position
  const auto run = oracle_all_positions(ascii("ba"), ascii("aaba"));
  REQUIRE(run == std::vector<std::uint64_t>{1, 1, 1, 0});
}

TEST_CASE("oracle equals per-suffix brute force on random cases") {
  std::mt19937_64 rng(051);
  for (int i = 0; i < 120; ++i) {
    const unsigned sigma = 2 + rng() % 5;
    const Text p = random_text(rng, 1 + rng() % 30, sigma);
    const Text t = random_text(rng, rng() % 40, sigma);
    const auto got = oracle_all_positions(p, t);
    REQUIRE(got.size() == t.size());
    for (std::size_t j = 1; j <= t.size(); ++j) {
      std::uint64_t best = p.size();
      for (std::size_t s = 0; s <= j; ++s)
        best = std::min(best, slow_edit_distance(TextView(t).substr(s, j - s), p));
      REQUIRE(got[j - 1] == best);
    }
  }
}

TEST_CASE("oracle never increases by more than one per symbol") {
  std::mt19937_64 rng(052);
  const Text p = random_text(rng, 64, 3);
  const Text t = random_text(rng, 500, 3);
  const auto got = oracle_all_positions(p, t);
  for (std::size_t j = 1; j < got.size(); ++j) REQUIRE(got[j] <= got[j - 1] + 1);
}

TEST_CASE("oracle rejects tables over its cell budget") {
  const Text p(2000, U'a');
  const Text t(3000, U'b');
  REQUIRE_THROWS_AS(oracle_all_positions(p, t, 100'000), Error);
  REQUIRE_NOTHROW(oracle_all_positions(p, t));
}
