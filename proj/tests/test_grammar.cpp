#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "edstream/active_tail.hpp"
#include "edstream/decompose.hpp"
#include "edstream/grammar.hpp"
#include "helpers.hpp"

using namespace edstream;
using edstream::testing::ascii;
using edstream::testing::random_text;

namespace {

// start -> AA, A -> BB, B -> a^2  derives a^8
Grammar sample_doubling() {
  std::vector<Rule> rules;
  rules.push_back(pair_rule(start_symbol(), nonterminal(0), nonterminal(0)));
  rules.push_back(pair_rule(nonterminal(0), nonterminal(1), nonterminal(1)));
  rules.push_back(power_rule(nonterminal(1), terminal(U'a'), 2));
  return Grammar(std::move(rules), start_symbol());
}

Grammar decomposition_block(std::mt19937_64& rng, std::size_t len, unsigned sigma,
                            std::uint64_t seed) {
  const auto dp = DecompParams::make(4096, 2, seed, {});
  const auto df = DecompFamilies::make(dp);
  const Text x = random_text(rng, len, sigma);
  const BlockSeq bs = decompose_batch(x, dp, df);
  return bs.grammars.at(rng() % bs.grammars.size());
}

}  // namespace

TEST_CASE("evaluation expands pairs and powers") {
  const Grammar g = sample_doubling();
  REQUIRE(eval_size(g) == 8);
  REQUIRE(eval(g) == ascii("aaaaaaaa"));

  Grammar single({power_rule(start_symbol(), terminal(U'z'), 1)}, start_symbol());
  REQUIRE(eval(single) == ascii("z"));

  // a grammar with no start rule has no derivation at all
  REQUIRE_THROWS_AS(eval(Grammar{}), Error);
  REQUIRE_THROWS_AS(eval_size(Grammar{}), Error);
}

TEST_CASE("evaluation size handles astronomically long derivations") {
  // start -> X^(2^20), X -> Y^(2^20), Y -> a^16: length 2^44
  std::vector<Rule> rules;
  rules.push_back(power_rule(start_symbol(), nonterminal(0), 1ull << 20));
  rules.push_back(power_rule(nonterminal(0), nonterminal(1), 1ull << 20));
  rules.push_back(power_rule(nonterminal(1), terminal(U'a'), 16));
  const Grammar g(std::move(rules), start_symbol());
  REQUIRE(eval_size(g) == (1ull << 44));
  REQUIRE_THROWS_AS(eval(g), Error);  // expansion guard
}

TEST_CASE("undefined symbols and cycles are rejected") {
  {
    Grammar g({pair_rule(start_symbol(), nonterminal(0), terminal(U'a'))}, start_symbol());
    REQUIRE_THROWS_AS(eval_size(g), Error);
  }
  {
    std::vector<Rule> rules;
    rules.push_back(pair_rule(start_symbol(), nonterminal(0), terminal(U'a')));
    rules.push_back(pair_rule(nonterminal(0), nonterminal(0), terminal(U'b')));
    Grammar g(std::move(rules), start_symbol());
    REQUIRE_THROWS_AS(eval_size(g), Error);
  }
}

TEST_CASE("canonical form is stable under renaming and rule noise") {
  const Grammar g = sample_doubling();
  const Grammar cg = canonicalize(g);

  // same derivation with shuffled nonterminal ids and an unreachable extra rule
  std::vector<Rule> rules;
  rules.push_back(power_rule(nonterminal(7), terminal(U'a'), 2));
  rules.push_back(pair_rule(start_symbol(), nonterminal(3), nonterminal(3)));
  rules.push_back(pair_rule(nonterminal(3), nonterminal(7), nonterminal(7)));
  rules.push_back(power_rule(nonterminal(9), terminal(U'q'), 5));  // unreachable
  const Grammar noisy(std::move(rules), start_symbol());

  REQUIRE(canonicalize(noisy) == cg);
  REQUIRE(eval(canonicalize(noisy)) == eval(g));
  REQUIRE(canonicalize(cg) == cg);
}

TEST_CASE("canonical forms separate different derivations") {
  std::mt19937_64 rng(061);
  for (int i = 0; i < 100; ++i) {
    const Grammar a = decomposition_block(rng, 200 + rng() % 200, 4, 900 + i);
    const Grammar b = decomposition_block(rng, 200 + rng() % 200, 4, 7000 + i);
    if (eval(a) == eval(b)) continue;
    REQUIRE_FALSE(canonicalize(a) == canonicalize(b));
  }
}

TEST_CASE("suffix grammars derive exactly the requested tail") {
  std::mt19937_64 rng(062);
  for (int i = 0; i < 150; ++i) {
    const Grammar g = decomposition_block(rng, 100 + rng() % 300, i % 2 ? 2 : 26, 100 + i);
    const Text full = eval(g);
    const std::uint64_t n = full.size();
    // 1-based start position: m = 1 reproduces the whole string, m = n the
    // final symbol.
    for (const std::uint64_t m : {std::uint64_t{1}, n / 2, n}) {
      if (m < 1 || m > n) continue;
      const Grammar sg = suffix_grammar(g, m);
      CAPTURE(n, m);
      REQUIRE(eval_size(sg) == n - m + 1);
      REQUIRE(eval(sg) == full.substr(m - 1));
    }
  }
}

TEST_CASE("suffix grammar bounds are enforced") {
  const Grammar g = sample_doubling();
  REQUIRE_THROWS_AS(suffix_grammar(g, 9), Error);
  REQUIRE_THROWS_AS(suffix_grammar(g, 0), Error);
}
