#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edstream/errors.hpp"
#include "edstream/grammar.hpp"
#include "edstream/hashing.hpp"

namespace edstream {

// ----- parameters ------------------------------------------------------------

struct DecompOverrides {
  std::optional<std::uint64_t> target_block_len;
  std::optional<std::uint64_t> definite_window;  // replaces the derived default
  std::optional<std::uint64_t> grammar_cap;
  std::optional<std::uint32_t> independence;
  std::optional<double> failure_exponent;
};

// Derived calibration for the hierarchical block decomposition. All integer
// thresholds are computed exactly; no floating point feeds a control decision.
struct DecompParams {
  std::uint64_t length_bound = 0;      // max total stream length supported
  std::uint32_t max_edits = 0;
  std::uint32_t level_count = 0;       // parse levels sufficient for length_bound
  std::uint32_t level_cap = 0;         // parsing stops here; top sequence stays short per block
  std::uint64_t target_block_len = 0;  // expected block length scale
  std::uint64_t definite_window = 0;   // trailing blocks that may still be revised
  std::uint64_t grammar_cap = 0;       // rule budget per block grammar
  std::uint32_t independence = 0;      // degree of the marking hash families
  std::uint64_t failure_bound = 0;     // inverse error budget for downstream tag sizing
  std::uint64_t seed = 0;

  static DecompParams make(std::uint64_t length_bound, std::uint32_t max_edits,
                           std::uint64_t seed, const DecompOverrides& ov = {}) {
    if (length_bound < 1 || length_bound >= (1ull << 24))
      raise(Errc::BadParams, "length bound must be in [1, 2^24)");

    DecompParams dp;
    dp.length_bound = length_bound;
    dp.max_edits = max_edits;
    dp.seed = seed;

    // ceil(log2 n)
    std::uint32_t lg = 0;
    while ((1ull << lg) < length_bound) ++lg;

    // smallest i with (3/2)^i >= n, plus slack for boundary effects
    {
      unsigned __int128 p3 = 1;
      std::uint32_t i = 0;
      while (p3 < (static_cast<unsigned __int128>(length_bound) << i)) {
        p3 *= 3;
        ++i;
      }
      dp.level_count = i + 3;
    }

    dp.target_block_len =
        ov.target_block_len ? *ov.target_block_len
                            : std::max<std::uint64_t>(64, std::uint64_t{max_edits} * lg);
    if (dp.target_block_len < 2 || dp.target_block_len > (1ull << 20))
      raise(Errc::BadParams, "block length target must be in [2, 2^20]");

    // Each level contracts sequences by >= 17/10 in expectation; stop once the
    // contraction factor covers one block, i.e. smallest i with (17/10)^i >= beta.
    {
      unsigned __int128 p17 = 1, p10 = 1;
      std::uint32_t cap = 0;
      while (p17 < static_cast<unsigned __int128>(dp.target_block_len) * p10) {
        p17 *= 17;
        p10 *= 10;
        ++cap;
      }
      dp.level_cap = std::min(cap, dp.level_count);
    }

    dp.definite_window = ov.definite_window
                             ? std::max<std::uint64_t>(4, *ov.definite_window)
                             : 4ull * dp.level_count;

    dp.grammar_cap = ov.grammar_cap ? *ov.grammar_cap : 8 * dp.target_block_len;
    if (dp.grammar_cap < dp.target_block_len)
      raise(Errc::BadParams, "grammar cap must be at least the block length target");
    if (dp.grammar_cap > (1ull << 21))
      raise(Errc::BadParams, "grammar cap must fit 21-bit rule references");

    std::uint64_t ind = ov.independence
                            ? *ov.independence
                            : std::min<std::uint64_t>(dp.grammar_cap, 64);
    if (ind < 2 || ind > 256) raise(Errc::BadParams, "independence degree must be in [2, 256]");
    dp.independence = static_cast<std::uint32_t>(ind);

    double fe = ov.failure_exponent.value_or(2.0);
    if (!(fe >= 1.0 && fe <= 8.0))
      raise(Errc::BadParams, "failure exponent must be in [1, 8]");
    long double fb = std::pow(static_cast<long double>(length_bound), static_cast<long double>(fe));
    dp.failure_bound = fb >= static_cast<long double>(1ull << 62)
                           ? (1ull << 62)
                           : std::max<std::uint64_t>(1, static_cast<std::uint64_t>(fb));

    return dp;
  }
};

// Per-level marking range; 0 disables marking at that level. All marking
// weight sits at one low level: one edit perturbs O(1) nodes of that level, so
// the chance that a boundary near the edit moves is O(1)/range, while weight
// at high levels would make every edit threaten a boundary regardless of the
// block-length target. The level is the lowest one whose realized fingerprint
// universe stays dense relative to the range: marking hashes node *types*, so
// a range comparable to the number of distinct low-level shapes would leave
// some hash draws with almost no marked types and unboundedly long blocks.
// Level-1 creations absorb roughly half the input symbols and level-2
// creations roughly a quarter, which fixes the range constants below.
inline std::uint32_t mark_level(const DecompParams& dp) {
  std::uint32_t lvl = dp.target_block_len / 2 <= 24 ? 1 : 2;
  return std::min(lvl, std::max<std::uint32_t>(1, dp.level_cap));
}

inline std::uint64_t mark_range(const DecompParams& dp, std::uint32_t level) {
  if (level != mark_level(dp)) return 0;
  if (level == 1) return std::max<std::uint64_t>(2, (dp.target_block_len + 1) / 2);
  return std::max<std::uint64_t>(2, (dp.target_block_len * 23 + 50) / 100);
}

// All hash machinery for one decomposition instance, derived from one seed.
struct DecompFamilies {
  Fingerprinter fper;
  std::vector<HashFamily> pairing;   // pairing[i] reduces level i into level i+1
  std::vector<HashFamily> marking;   // marking[l] selects block boundaries at level l
  std::vector<std::uint8_t> marks_live;  // marking[l] participates at all

  bool marks_at(std::uint32_t level) const {
    return level < marks_live.size() && marks_live[level];
  }

  static DecompFamilies make(const DecompParams& dp) {
    SeedTree root(dp.seed);
    DecompFamilies df;
    df.fper = Fingerprinter::sample(root.child("fp"));
    df.pairing.reserve(dp.level_cap);
    for (std::uint32_t i = 0; i < dp.level_cap; ++i)
      df.pairing.push_back(sample_family(root.child("pair", i), FamilyKind::Pairwise, kFieldPrime));
    df.marking.reserve(dp.level_cap + 1);
    df.marks_live.reserve(dp.level_cap + 1);
    for (std::uint32_t l = 0; l <= dp.level_cap; ++l) {
      const std::uint64_t range = mark_range(dp, l);
      df.marks_live.push_back(range ? 1 : 0);
      df.marking.push_back(sample_family(root.child("mark", l), FamilyKind::TWise,
                                         range ? range : 2, dp.independence));
    }
    return df;
  }
};

// ----- parse nodes -----------------------------------------------------------

enum class NodeKind : std::uint8_t { Leaf, Pair, Power };

struct ParseNode;
using NodePtr = std::shared_ptr<const ParseNode>;

// Immutable node of the parse dag. `sid` is a structural id: equal sid is
// treated as equal parse tree (and hence equal expansion). `level` is the
// level the node was created at; it appears in higher sequences unchanged.
struct ParseNode {
  NodeKind kind = NodeKind::Leaf;
  std::uint32_t level = 0;
  char32_t term = U'\0';
  NodePtr first;
  NodePtr second;
  std::uint64_t exponent = 0;  // Power only, >= 2
  std::uint64_t span = 0;
  std::uint64_t fp = 0;        // fingerprint of the expansion
  std::uint64_t base_pow = 0;  // base^span, carried for O(1) composition
  std::uint64_t sid = 0;

  ParseNode() { live_nodes() += 1; }
  ParseNode(const ParseNode& o)
      : kind(o.kind), level(o.level), term(o.term), first(o.first), second(o.second),
        exponent(o.exponent), span(o.span), fp(o.fp), base_pow(o.base_pow), sid(o.sid) {
    live_nodes() += 1;
  }
  ~ParseNode() { live_nodes() -= 1; }

  // process-wide count of live parse nodes; used by state-size probes
  static std::atomic<std::int64_t>& live_nodes() {
    static std::atomic<std::int64_t> n{0};
    return n;
  }
};

namespace detail {

inline std::uint64_t sid_leaf(char32_t c) {
  return mix64(0x1eafull ^ mix64(static_cast<std::uint64_t>(c) + 1));
}
inline std::uint64_t sid_pair(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(0xbeefull ^ a) ^ b);
}
inline std::uint64_t sid_power(std::uint64_t a, std::uint64_t r) {
  return mix64(mix64(0xf00dull ^ a) ^ r);
}

}  // namespace detail

inline NodePtr make_leaf(char32_t c, const Fingerprinter& fper) {
  auto n = std::make_shared<ParseNode>();
  n->kind = NodeKind::Leaf;
  n->level = 0;
  n->term = c;
  n->span = 1;
  n->fp = fper.symbol_fp(c);
  n->base_pow = fper.base();
  n->sid = detail::sid_leaf(c);
  return n;
}

inline NodePtr make_pair_node(NodePtr a, NodePtr b, std::uint32_t level,
                              const Fingerprinter& fper) {
  auto n = std::make_shared<ParseNode>();
  n->kind = NodeKind::Pair;
  n->level = level;
  n->span = a->span + b->span;
  n->fp = fper.concat(a->fp, a->base_pow, b->fp);
  n->base_pow = field_mul(a->base_pow, b->base_pow);
  n->sid = detail::sid_pair(a->sid, b->sid);
  n->first = std::move(a);
  n->second = std::move(b);
  return n;
}

inline NodePtr make_power_node(NodePtr a, std::uint64_t r, std::uint32_t level,
                               const Fingerprinter& fper) {
  if (r < 2) raise(Errc::BadParams, "power node needs exponent >= 2");
  auto n = std::make_shared<ParseNode>();
  n->kind = NodeKind::Power;
  n->level = level;
  n->exponent = r;
  n->span = a->span * r;
  n->fp = fper.power(a->fp, a->base_pow, r);
  n->base_pow = field_pow(a->base_pow, r);
  n->sid = detail::sid_power(a->sid, r);
  n->first = std::move(a);
  return n;
}

// One element of a level sequence; leftpos is 1-based in the underlying text.
struct Element {
  NodePtr node;
  std::uint64_t leftpos = 0;
};

// ----- level reduction -------------------------------------------------------

// One round of the locally consistent parse: collapse maximal runs of equal
// symbols into Power nodes, then pair within segments delimited by symbols
// whose pairing hash is a strict local minimum (sequence ends count as +inf
// neighbours; ties break no minimum). The leading element of each segment is
// passed through unpaired when the segment has odd length.
inline std::vector<Element> reduce_level(const std::vector<Element>& seq,
                                         const HashFamily& pairing, const Fingerprinter& fper,
                                         std::uint32_t out_level) {
  std::vector<Element> runfree;
  runfree.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size();) {
    std::size_t j = i + 1;
    while (j < seq.size() && seq[j].node->sid == seq[i].node->sid) ++j;
    if (j - i >= 2)
      runfree.push_back({make_power_node(seq[i].node, j - i, out_level, fper), seq[i].leftpos});
    else
      runfree.push_back(seq[i]);
    i = j;
  }

  const std::size_t m = runfree.size();
  std::vector<std::uint64_t> h(m);
  for (std::size_t j = 0; j < m; ++j) h[j] = eval_hash(pairing, runfree[j].node->fp);
  std::vector<char> minima(m);
  for (std::size_t j = 0; j < m; ++j) {
    bool left = j == 0 || h[j] < h[j - 1];
    bool right = j + 1 == m || h[j] < h[j + 1];
    minima[j] = left && right;
  }

  std::vector<Element> out;
  out.reserve(m / 2 + 1);
  std::size_t hold = m;  // index of the pending unpaired element, m = none
  for (std::size_t j = 0; j < m; ++j) {
    if (minima[j] && hold != m) {
      out.push_back(runfree[hold]);  // odd leftover of the closing segment
      hold = m;
    }
    if (hold == m) {
      hold = j;
    } else {
      out.push_back({make_pair_node(runfree[hold].node, runfree[j].node, out_level, fper),
                     runfree[hold].leftpos});
      hold = m;
    }
  }
  if (hold != m) out.push_back(runfree[hold]);
  return out;
}

// Full parse of x: levels[0] is the terminal sequence, levels[l] the sequence
// after l reduction rounds. Nodes record the level that created them.
inline std::vector<std::vector<Element>> batch_parse(TextView x, const DecompParams& dp,
                                                     const DecompFamilies& df) {
  if (x.size() > dp.length_bound) raise(Errc::TooLong, "input exceeds configured length bound");
  std::vector<std::vector<Element>> levels(dp.level_cap + 1);
  auto& base = levels[0];
  base.reserve(x.size());
  std::unordered_map<char32_t, NodePtr> leaves;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& leaf = leaves[x[i]];
    if (!leaf) leaf = make_leaf(x[i], df.fper);
    base.push_back({leaf, i + 1});
  }
  for (std::uint32_t l = 0; l < dp.level_cap; ++l)
    levels[l + 1] = reduce_level(levels[l], df.pairing[l], df.fper, l + 1);
  return levels;
}

// ----- boundary marking ------------------------------------------------------

// Block boundaries: position 1, plus the left end of every node whose creation
// event hashes to 0 under its level's marking family. A node creates exactly
// one event, at the level that built it.
inline std::vector<std::uint64_t> mark_boundaries(const std::vector<std::vector<Element>>& levels,
                                                  const DecompFamilies& df) {
  if (levels.empty() || levels[0].empty()) return {};
  std::vector<std::uint64_t> out{1};
  for (std::uint32_t l = 0; l < levels.size(); ++l) {
    if (!df.marks_at(l)) continue;
    for (const Element& e : levels[l])
      if (e.node->level == l && eval_hash(df.marking[l], e.node->fp) == 0)
        out.push_back(e.leftpos);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// [b_j, b_{j+1}-1] intervals, the last one closed by n. 1-based inclusive.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> boundaries_to_blocks(
    const std::vector<std::uint64_t>& bounds, std::uint64_t n) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  if (n == 0) return out;
  if (bounds.empty() || bounds.front() != 1)
    raise(Errc::BadParams, "boundary list must start at position 1");
  out.reserve(bounds.size());
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    std::uint64_t lo = bounds[j];
    std::uint64_t hi = j + 1 < bounds.size() ? bounds[j + 1] - 1 : n;
    if (lo > hi || hi > n) raise(Errc::BadRange, "boundary outside text");
    out.emplace_back(lo, hi);
  }
  return out;
}

// ----- block grammar extraction ----------------------------------------------

namespace detail {

// A cropped fragment: `repeat` full copies of `node`'s expansion.
struct Piece {
  NodePtr node;
  std::uint64_t repeat = 1;
};

// Append the pieces of eval(v) restricted to text interval [lo, hi], where v
// expands at absolute position `left`. Pieces come out in text order.
inline void crop_node(const NodePtr& v, std::uint64_t left, std::uint64_t lo, std::uint64_t hi,
                      std::vector<Piece>& out) {
  std::uint64_t right = left + v->span - 1;
  if (right < lo || left > hi) return;
  if (left >= lo && right <= hi) {
    out.push_back({v, 1});
    return;
  }
  switch (v->kind) {
    case NodeKind::Leaf:
      out.push_back({v, 1});  // span 1 is never partial; defensive
      return;
    case NodeKind::Pair:
      crop_node(v->first, left, lo, hi, out);
      crop_node(v->second, left + v->first->span, lo, hi, out);
      return;
    case NodeKind::Power: {
      std::uint64_t q = v->first->span;
      std::uint64_t ov_lo = std::max(lo, left);
      std::uint64_t ov_hi = std::min(hi, right);
      std::uint64_t c0 = (ov_lo - left) / q;
      std::uint64_t c1 = (ov_hi - left) / q;
      if (c0 == c1) {
        crop_node(v->first, left + c0 * q, lo, hi, out);
        return;
      }
      std::uint64_t s0 = left + c0 * q;
      std::uint64_t s1 = left + c1 * q;
      bool head_partial = s0 < ov_lo;
      bool tail_partial = s1 + q - 1 > ov_hi;
      std::uint64_t t0 = c0 + (head_partial ? 1 : 0);
      std::uint64_t t1 = c1 - (tail_partial ? 1 : 0);
      if (head_partial) crop_node(v->first, s0, lo, hi, out);
      if (t0 <= t1) out.push_back({v->first, t1 - t0 + 1});
      if (tail_partial) crop_node(v->first, s1, lo, hi, out);
      return;
    }
  }
}

// Emits grammar rules for parse subtrees, deduplicating by structural id.
struct Assembler {
  std::vector<Rule> rules;
  std::unordered_map<std::uint64_t, SymbolId> by_sid;
  std::map<std::pair<std::uint64_t, std::uint64_t>, SymbolId> repeats;
  std::uint64_t next_id = 0;

  SymbolId fresh() { return nonterminal(next_id++); }

  SymbolId ref(const NodePtr& v) {
    if (v->kind == NodeKind::Leaf) return terminal(v->term);
    auto it = by_sid.find(v->sid);
    if (it != by_sid.end()) return it->second;
    SymbolId me = fresh();
    by_sid.emplace(v->sid, me);
    if (v->kind == NodeKind::Pair) {
      SymbolId a = ref(v->first);
      SymbolId b = ref(v->second);
      rules.push_back(pair_rule(me, a, b));
    } else {
      SymbolId a = ref(v->first);
      rules.push_back(power_rule(me, a, v->exponent));
    }
    return me;
  }

  SymbolId piece_ref(const Piece& p) {
    SymbolId base = ref(p.node);
    if (p.repeat == 1) return base;
    auto key = std::make_pair(p.node->sid, p.repeat);
    auto it = repeats.find(key);
    if (it != repeats.end()) return it->second;
    SymbolId me = fresh();
    rules.push_back(power_rule(me, base, p.repeat));
    repeats.emplace(key, me);
    return me;
  }
};

}  // namespace detail

struct ExtractedBlock {
  Grammar grammar;
  bool oversize = false;  // rule count exceeded the cap; grammar still valid
};

// Straight-line grammar for text interval [lo, hi] out of a parse forest whose
// elements tile the text contiguously in order. Any random-access sequence of
// Element works (vector for batch parses, deque for the streaming tail).
template <class ElementSeq>
inline ExtractedBlock extract_block(const ElementSeq& forest, std::uint64_t lo,
                                    std::uint64_t hi, std::uint64_t cap) {
  if (lo < 1 || hi < lo) raise(Errc::BadRange, "bad block interval");
  std::vector<detail::Piece> pieces;
  auto first = std::partition_point(forest.begin(), forest.end(), [&](const Element& e) {
    return e.leftpos + e.node->span - 1 < lo;
  });
  for (auto it = first; it != forest.end() && it->leftpos <= hi; ++it)
    detail::crop_node(it->node, it->leftpos, lo, hi, pieces);
  if (pieces.empty()) raise(Errc::BadRange, "block not covered by parse forest");

  std::uint64_t covered = 0;
  for (const auto& p : pieces) covered += p.node->span * p.repeat;
  if (covered != hi - lo + 1) raise(Errc::Malformed, "cropped pieces do not cover block");

  detail::Assembler as;
  SymbolId st = start_symbol();
  if (pieces.size() == 1) {
    const auto& p = pieces.front();
    if (p.repeat >= 2) {
      as.rules.push_back(power_rule(st, as.ref(p.node), p.repeat));
    } else if (p.node->kind == NodeKind::Leaf) {
      as.rules.push_back(power_rule(st, terminal(p.node->term), 1));  // unit start
    } else if (p.node->kind == NodeKind::Pair) {
      SymbolId a = as.ref(p.node->first);
      SymbolId b = as.ref(p.node->second);
      as.rules.push_back(pair_rule(st, a, b));
    } else {
      as.rules.push_back(power_rule(st, as.ref(p.node->first), p.node->exponent));
    }
  } else {
    std::vector<SymbolId> refs;
    refs.reserve(pieces.size());
    for (const auto& p : pieces) refs.push_back(as.piece_ref(p));
    SymbolId head = st;
    for (std::size_t i = 0; i + 2 < refs.size(); ++i) {
      SymbolId next = as.fresh();
      as.rules.push_back(pair_rule(head, refs[i], next));
      head = next;
    }
    as.rules.push_back(pair_rule(head, refs[refs.size() - 2], refs.back()));
  }

  Grammar g = canonicalize(Grammar(std::move(as.rules), st, hi - lo + 1));
  bool oversize = g.rules().size() > cap;
  return {std::move(g), oversize};
}

// ----- batch decomposition ---------------------------------------------------

struct BlockSeq {
  std::vector<Grammar> grammars;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> intervals;  // 1-based inclusive
  std::vector<std::uint8_t> oversize;
  std::uint64_t total_len = 0;
  bool any_oversize = false;
};

inline BlockSeq decompose_batch(TextView x, const DecompParams& dp, const DecompFamilies& df) {
  BlockSeq out;
  out.total_len = x.size();
  if (x.empty()) return out;
  auto levels = batch_parse(x, dp, df);
  auto blocks = boundaries_to_blocks(mark_boundaries(levels, df), x.size());
  out.grammars.reserve(blocks.size());
  out.intervals = std::move(blocks);
  for (const auto& [lo, hi] : out.intervals) {
    ExtractedBlock eb = extract_block(levels[dp.level_cap], lo, hi, dp.grammar_cap);
    out.oversize.push_back(eb.oversize ? 1 : 0);
    out.any_oversize = out.any_oversize || eb.oversize;
    out.grammars.push_back(std::move(eb.grammar));
  }
  return out;
}

// ----- test helpers ----------------------------------------------------------

inline void node_eval_into(const NodePtr& v, Text& out) {
  switch (v->kind) {
    case NodeKind::Leaf:
      out.push_back(v->term);
      return;
    case NodeKind::Pair:
      node_eval_into(v->first, out);
      node_eval_into(v->second, out);
      return;
    case NodeKind::Power:
      for (std::uint64_t i = 0; i < v->exponent; ++i) node_eval_into(v->first, out);
      return;
  }
}

inline Text node_eval(const NodePtr& v) {
  if (v->span > kDefaultEvalGuard) raise(Errc::TooBig, "node expansion exceeds guard");
  Text out;
  out.reserve(v->span);
  node_eval_into(v, out);
  return out;
}

}  // namespace edstream
