#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "edstream/decompose.hpp"
#include "edstream/errors.hpp"
#include "edstream/grammar.hpp"
#include "edstream/hashing.hpp"

namespace edstream {

// Fixed-length randomized grammar encoding. Every grammar of at most S rules
// becomes exactly M = 2S coordinates; distinct grammars differ in *every*
// coordinate unless a fingerprint evaluation collides (probability ≤ M·(deg/p
// + 2^-39) per pair). Each coordinate packs a 24-bit serialization word and a
// 39-bit tag into [1, 2α], α = 2^62.
//
// Serialization layout (24-bit words, zero padded to M):
//   word 0        rule count n
//   word 1+2j     record j: kind bit 23 (0 pair, 1 power), first ref bits 0-21
//   word 2+2j     pair: second ref (22 bits); power: exponent (24 bits)
// Record 0 is the start rule; record j >= 1 defines nonterminal j-1, so lhs
// need not be stored. A symbol ref is bit 21 (terminal flag) plus a 21-bit
// value. The all-zero serialization is the empty grammar.
struct EncParams {
  std::uint64_t M = 0;                     // coordinates per grammar
  std::uint64_t alpha = 1ull << 62;        // coordinates live in [1, 2*alpha]
  std::uint64_t p = kFieldPrime;
  std::vector<std::uint64_t> eval_points;  // M distinct field elements
  std::uint64_t seed = 0;

  static EncParams make(const DecompParams& dp) {
    EncParams ep;
    ep.M = 2 * dp.grammar_cap;
    if ((static_cast<unsigned __int128>(ep.M) * 2) * dp.failure_bound >
        static_cast<unsigned __int128>(ep.alpha))
      raise(Errc::BadParams, "failure bound exceeds the coordinate alphabet budget");
    SeedTree enc = SeedTree(dp.seed).child("enc");
    ep.seed = enc.value();
    Prg prg(enc);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(ep.M * 2);
    ep.eval_points.reserve(ep.M);
    while (ep.eval_points.size() < ep.M) {
      std::uint64_t x = prg.next_field();
      if (seen.insert(x).second) ep.eval_points.push_back(x);
    }
    return ep;
  }
};

struct EncodedGrammar {
  std::vector<std::uint64_t> coords;
};

namespace detail {

constexpr std::uint64_t kWordBits = 24;
constexpr std::uint64_t kTagBits = 39;
constexpr std::uint64_t kWordMask = (1ull << kWordBits) - 1;
constexpr std::uint64_t kTagMask = (1ull << kTagBits) - 1;
constexpr std::uint64_t kRefTerminalBit = 1ull << 21;
constexpr std::uint64_t kRefValueMask = (1ull << 21) - 1;
constexpr std::uint64_t kRefMask = (1ull << 22) - 1;

inline std::uint64_t pack_coord(std::uint64_t word, std::uint64_t tag) {
  return ((word << kTagBits) | (tag & kTagMask)) + 1;
}
inline std::uint64_t coord_word(std::uint64_t c) { return (c - 1) >> kTagBits; }
inline std::uint64_t coord_tag(std::uint64_t c) { return (c - 1) & kTagMask; }

inline std::uint64_t encode_ref(SymbolId s) {
  if (s.kind == SymbolKind::Terminal) {
    if (s.id > kRefValueMask) raise(Errc::TooBig, "terminal exceeds 21-bit encoding");
    return kRefTerminalBit | s.id;
  }
  if (s.kind != SymbolKind::Nonterminal)
    raise(Errc::Malformed, "only terminals and nonterminals appear on rule bodies");
  if (s.id > kRefValueMask) raise(Errc::TooBig, "nonterminal id exceeds 21-bit encoding");
  return s.id;
}

inline SymbolId decode_ref(std::uint64_t ref, std::uint64_t rule_count) {
  std::uint64_t value = ref & kRefValueMask;
  if (ref & kRefTerminalBit) return terminal(static_cast<char32_t>(value));
  if (value + 2 > rule_count) raise(Errc::Malformed, "reference to undefined nonterminal");
  return nonterminal(value);
}

// 24-bit serialization words; no padding materialized (it is all zero).
inline std::vector<std::uint64_t> serialize_words(const Grammar& g, const EncParams& ep) {
  const auto& rules = g.rules();
  std::uint64_t n = rules.size();
  if (1 + 2 * n > ep.M) raise(Errc::TooBig, "grammar exceeds encoding capacity");
  for (std::uint64_t j = 0; j < n; ++j) {
    bool canonical = j == 0 ? rules[j].lhs.kind == SymbolKind::Start
                            : rules[j].lhs.kind == SymbolKind::Nonterminal &&
                                  rules[j].lhs.id == j - 1;
    if (!canonical) raise(Errc::BadParams, "grammar must be in canonical rule order");
  }
  std::vector<std::uint64_t> w;
  w.reserve(1 + 2 * n);
  w.push_back(n);
  for (const Rule& r : rules) {
    std::uint64_t w0 = encode_ref(r.first);
    std::uint64_t w1;
    if (r.kind == RuleKind::Pair) {
      w1 = encode_ref(r.second);
    } else {
      w0 |= 1ull << 23;
      if (r.exponent > kWordMask) raise(Errc::TooBig, "exponent exceeds 24-bit encoding");
      w1 = r.exponent;
    }
    w.push_back(w0);
    w.push_back(w1);
  }
  return w;
}

// P_g(x) = sum w_j x^j; trailing zero padding contributes nothing, so Horner
// runs over just the populated words.
inline std::uint64_t poly_eval(const std::vector<std::uint64_t>& w, std::uint64_t x) {
  std::uint64_t acc = 0;
  for (std::size_t j = w.size(); j-- > 0;) acc = field_add(field_mul(acc, x), w[j]);
  return acc;
}

}  // namespace detail

inline EncodedGrammar encode(const Grammar& g, const EncParams& ep) {
  auto words = detail::serialize_words(g, ep);
  EncodedGrammar out;
  out.coords.resize(ep.M);
  for (std::uint64_t i = 0; i < ep.M; ++i) {
    std::uint64_t tag = detail::poly_eval(words, ep.eval_points[i]);
    out.coords[i] = detail::pack_coord(i < words.size() ? words[i] : 0, tag);
  }
  return out;
}

inline Grammar decode(const EncodedGrammar& e, const EncParams& ep) {
  if (e.coords.size() != ep.M) raise(Errc::Malformed, "wrong coordinate count");
  std::vector<std::uint64_t> words(ep.M);
  for (std::uint64_t i = 0; i < ep.M; ++i) {
    if (e.coords[i] == 0) raise(Errc::Malformed, "zero coordinate");
    words[i] = detail::coord_word(e.coords[i]);
    if (words[i] > detail::kWordMask) raise(Errc::Malformed, "serialization word out of range");
  }
  std::uint64_t n = words[0];
  if (1 + 2 * n > ep.M) raise(Errc::Malformed, "rule count exceeds capacity");
  for (std::uint64_t i = 1 + 2 * n; i < ep.M; ++i)
    if (words[i] != 0) raise(Errc::Malformed, "nonzero padding");

  std::vector<Rule> rules;
  rules.reserve(n);
  for (std::uint64_t j = 0; j < n; ++j) {
    std::uint64_t w0 = words[1 + 2 * j];
    std::uint64_t w1 = words[2 + 2 * j];
    SymbolId lhs = j == 0 ? start_symbol() : nonterminal(j - 1);
    SymbolId a = detail::decode_ref(w0 & detail::kRefMask, n);
    if (w0 & (1ull << 23)) {
      if (w1 == 0) raise(Errc::Malformed, "zero exponent");
      rules.push_back(power_rule(lhs, a, w1));
    } else {
      if ((w0 & ~(detail::kRefMask | (1ull << 23))) != 0 || w1 > detail::kRefMask)
        raise(Errc::Malformed, "stray bits in pair record");
      rules.push_back(pair_rule(lhs, a, detail::decode_ref(w1, n)));
    }
  }
  // n == 0 is the empty-grammar sentinel (all-zero serialization)
  Grammar g = n == 0 ? Grammar{} : Grammar(std::move(rules), start_symbol());

  std::vector<std::uint64_t> populated(words.begin(), words.begin() + 1 + 2 * n);
  for (std::uint64_t i = 0; i < ep.M; ++i) {
    std::uint64_t tag = detail::poly_eval(populated, ep.eval_points[i]);
    if ((tag & detail::kTagMask) != detail::coord_tag(e.coords[i]))
      raise(Errc::TagMismatch, "coordinate tag disagrees with serialization");
  }
  return g;
}

}  // namespace edstream
