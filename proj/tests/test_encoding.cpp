#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "edstream/decompose.hpp"
#include "edstream/encoding.hpp"
#include "helpers.hpp"

using namespace edstream;
using edstream::testing::random_text;

namespace {

struct Setup {
  DecompParams dp;
  DecompFamilies df;
  EncParams ep;

  explicit Setup(std::uint64_t seed, DecompOverrides ov = {})
      : dp(DecompParams::make(4096, 2, seed, ov)), df(DecompFamilies::make(dp)),
        ep(EncParams::make(dp)) {}
};

std::vector<Grammar> pool_from_text(std::mt19937_64& rng, const Setup& s, std::size_t want,
                                    unsigned sigma) {
  std::vector<Grammar> out;
  while (out.size() < want) {
    const Text x = random_text(rng, 2000, sigma);
    BlockSeq bs = decompose_batch(x, s.dp, s.df);
    for (std::size_t i = 0; i < bs.grammars.size() && out.size() < want; ++i)
      if (!bs.oversize[i]) out.push_back(std::move(bs.grammars[i]));
  }
  return out;
}

}  // namespace

TEST_CASE("coordinate count and range are fixed by the parameters") {
  const Setup s(1);
  REQUIRE(s.ep.M == 2 * s.dp.grammar_cap);
  const Grammar g({power_rule(start_symbol(), terminal(U'a'), 7)}, start_symbol());
  const EncodedGrammar e = encode(g, s.ep);
  REQUIRE(e.coords.size() == s.ep.M);
  for (const std::uint64_t c : e.coords) {
    REQUIRE(c >= 1);
    REQUIRE(c <= 2 * s.ep.alpha);
  }
}

TEST_CASE("decode inverts encode on decomposition grammars") {
  std::mt19937_64 rng(0111);
  const Setup s(2);
  const auto pool = pool_from_text(rng, s, 300, 26);
  for (const Grammar& g : pool) {
    const Grammar back = decode(encode(g, s.ep), s.ep);
    REQUIRE(canonicalize(back) == canonicalize(g));
    REQUIRE(eval(back) == eval(g));
  }
}

TEST_CASE("the empty grammar encodes and round trips") {
  const Setup s(3);
  const EncodedGrammar e = encode(Grammar{}, s.ep);
  const Grammar back = decode(e, s.ep);
  REQUIRE(back.empty());
  REQUIRE(back == Grammar{});
  // an empty grammar has no start rule, so evaluation is undefined
  REQUIRE_THROWS_AS(eval(back), Error);
}

TEST_CASE("equal grammars encode identically, including across objects") {
  std::mt19937_64 rng(0112);
  const Setup s(4);
  const auto pool = pool_from_text(rng, s, 50, 4);
  for (const Grammar& g : pool) {
    const Grammar copy = canonicalize(g);
    REQUIRE(encode(g, s.ep).coords == encode(g, s.ep).coords);
    if (copy == g) REQUIRE(encode(copy, s.ep).coords == encode(g, s.ep).coords);
  }
}

TEST_CASE("distinct grammars differ in every coordinate") {
  std::mt19937_64 rng(0113);
  const Setup s(5);
  auto pool = pool_from_text(rng, s, 400, 26);
  std::size_t checked = 0;
  for (std::size_t i = 0; i + 1 < pool.size(); i += 2) {
    const Grammar &a = pool[i], &b = pool[i + 1];
    if (canonicalize(a) == canonicalize(b)) continue;
    const EncodedGrammar ea = encode(a, s.ep), eb = encode(b, s.ep);
    std::size_t differing = 0;
    for (std::uint64_t j = 0; j < s.ep.M; ++j) differing += ea.coords[j] != eb.coords[j];
    REQUIRE(differing == s.ep.M);
    ++checked;
  }
  REQUIRE(checked >= 150);
}

TEST_CASE("tampered coordinates are detected") {
  std::mt19937_64 rng(0114);
  const Setup s(6);
  const auto pool = pool_from_text(rng, s, 10, 26);
  for (const Grammar& g : pool) {
    EncodedGrammar e = encode(g, s.ep);
    // flip a payload bit above the tag, leaving a well-formed coordinate
    e.coords[e.coords.size() / 2] ^= (1ull << 45);
    REQUIRE_THROWS_AS(decode(e, s.ep), Error);
  }
  EncodedGrammar wrong;
  wrong.coords.assign(3, 1);
  REQUIRE_THROWS_AS(decode(wrong, s.ep), Error);
}

TEST_CASE("grammars beyond the rule budget are refused") {
  const Setup s(7);
  std::vector<Rule> rules;
  const std::uint64_t too_many = s.dp.grammar_cap + 1;
  rules.push_back(power_rule(start_symbol(), nonterminal(0), 2));
  for (std::uint64_t i = 0; i + 1 < too_many; ++i) {
    const bool last = i + 2 == too_many;
    rules.push_back(last ? power_rule(nonterminal(i), terminal(U'a'), 2)
                         : power_rule(nonterminal(i), nonterminal(i + 1), 2));
  }
  const Grammar g(std::move(rules), start_symbol());
  REQUIRE_THROWS_AS(encode(g, s.ep), Error);
}
