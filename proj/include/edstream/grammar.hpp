#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "edstream/errors.hpp"

// Deterministic straight-line grammars: every nonterminal has exactly one rule,
// either a concatenation c -> a b or a repetition c -> a ^ r. The start symbol
// appears only on left-hand sides. An exponent of 1 is legal only on the start
// rule; it is how a grammar derives a single symbol, and construction
// normalizes it away everywhere else.

namespace edstream {

using Text = std::u32string;
using TextView = std::u32string_view;

enum class SymbolKind : std::uint8_t { Terminal = 0, Nonterminal = 1, Start = 2 };

struct SymbolId {
  std::uint64_t id = 0;
  SymbolKind kind = SymbolKind::Terminal;

  friend bool operator==(const SymbolId&, const SymbolId&) = default;

  bool is_terminal() const { return kind == SymbolKind::Terminal; }

  // stable packing for lookup keys; flag in the low bits
  std::uint64_t packed() const { return (id << 2) | static_cast<std::uint64_t>(kind); }
};

inline SymbolId terminal(char32_t c) { return {static_cast<std::uint64_t>(c), SymbolKind::Terminal}; }
inline SymbolId nonterminal(std::uint64_t id) { return {id, SymbolKind::Nonterminal}; }
inline SymbolId start_symbol(std::uint64_t id = 0) { return {id, SymbolKind::Start}; }

enum class RuleKind : std::uint8_t { Pair = 1, Power = 2 };

struct Rule {
  SymbolId lhs;
  RuleKind kind = RuleKind::Pair;
  SymbolId first;
  SymbolId second;             // Pair only
  std::uint64_t exponent = 0;  // Power only, >= 1; 1 requires lhs.kind == Start

  friend bool operator==(const Rule&, const Rule&) = default;
};

inline Rule pair_rule(SymbolId lhs, SymbolId a, SymbolId b) {
  return Rule{lhs, RuleKind::Pair, a, b, 0};
}
inline Rule power_rule(SymbolId lhs, SymbolId a, std::uint64_t r) {
  return Rule{lhs, RuleKind::Power, a, {}, r};
}

class Grammar {
 public:
  Grammar() = default;

  // Validates rule-form and determinism (one rule per lhs). Acyclicity is
  // checked lazily by eval_size/eval so malformed inputs surface through the
  // documented errors rather than at an arbitrary construction site.
  Grammar(std::vector<Rule> rules, SymbolId start,
          std::optional<std::uint64_t> eval_size_hint = std::nullopt)
      : rules_(std::move(rules)), start_(start), cached_eval_size_(eval_size_hint) {
    index_.reserve(rules_.size() * 2);
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      const Rule& r = rules_[i];
      if (r.lhs.kind == SymbolKind::Terminal)
        raise(Errc::Malformed, "terminal on a left-hand side");
      if (r.kind == RuleKind::Power) {
        if (r.exponent == 0) raise(Errc::Malformed, "zero exponent");
        if (r.exponent == 1 && r.lhs.kind != SymbolKind::Start)
          raise(Errc::Malformed, "unit exponent outside the start rule");
      }
      if (r.first.kind == SymbolKind::Start ||
          (r.kind == RuleKind::Pair && r.second.kind == SymbolKind::Start))
        raise(Errc::Malformed, "start symbol on a right-hand side");
      auto [it, fresh] = index_.emplace(r.lhs.packed(), i);
      if (!fresh) raise(Errc::DeterminismViolation, "duplicate rule for one symbol");
    }
  }

  bool empty() const { return rules_.empty(); }
  std::size_t size() const { return rules_.size(); }
  const std::vector<Rule>& rules() const { return rules_; }
  SymbolId start() const { return start_; }
  std::optional<std::uint64_t> cached_eval_size() const { return cached_eval_size_; }

  const Rule* find(SymbolId s) const {
    auto it = index_.find(s.packed());
    return it == index_.end() ? nullptr : &rules_[it->second];
  }

  friend bool operator==(const Grammar& a, const Grammar& b) {
    return a.start_ == b.start_ && a.rules_ == b.rules_;
  }

 private:
  std::vector<Rule> rules_;
  SymbolId start_{};
  std::optional<std::uint64_t> cached_eval_size_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

inline constexpr std::uint64_t kDefaultEvalGuard = std::uint64_t{1} << 24;

namespace detail {

// Iterative post-order size computation with cycle detection (tri-color).
inline std::uint64_t eval_size_impl(const Grammar& g, SymbolId root) {
  if (root.is_terminal()) return 1;
  enum : std::uint8_t { kOpen = 1, kDone = 2 };
  std::unordered_map<std::uint64_t, std::uint8_t> state;
  std::unordered_map<std::uint64_t, std::uint64_t> size;
  std::vector<SymbolId> stack{root};
  while (!stack.empty()) {
    SymbolId s = stack.back();
    if (s.is_terminal()) {
      stack.pop_back();
      continue;
    }
    const Rule* r = g.find(s);
    if (r == nullptr) raise(Errc::UndefinedSymbol, "no rule for a nonterminal");
    std::uint8_t& st = state[s.packed()];
    if (st == kDone) {
      stack.pop_back();
      continue;
    }
    auto size_of = [&](SymbolId c) -> std::optional<std::uint64_t> {
      if (c.is_terminal()) return 1;
      auto it = size.find(c.packed());
      if (it == size.end()) return std::nullopt;
      return it->second;
    };
    std::optional<std::uint64_t> sa = size_of(r->first);
    std::optional<std::uint64_t> sb =
        r->kind == RuleKind::Pair ? size_of(r->second) : std::make_optional<std::uint64_t>(0);
    if (sa && sb) {
      unsigned __int128 total =
          r->kind == RuleKind::Pair
              ? static_cast<unsigned __int128>(*sa) + *sb
              : static_cast<unsigned __int128>(*sa) * r->exponent;
      if (total > (std::uint64_t{1} << 62)) raise(Errc::TooLong, "derived string overflows");
      size[s.packed()] = static_cast<std::uint64_t>(total);
      st = kDone;
      stack.pop_back();
      continue;
    }
    if (st == kOpen) raise(Errc::CycleDetected, "grammar derivation cycles");
    st = kOpen;
    if (!sa) stack.push_back(r->first);
    if (r->kind == RuleKind::Pair && !sb) stack.push_back(r->second);
  }
  return size.at(root.packed());
}

}  // namespace detail

inline std::uint64_t eval_size(const Grammar& g) {
  if (g.cached_eval_size()) return *g.cached_eval_size();
  if (g.empty() && g.find(g.start()) == nullptr)
    raise(Errc::UndefinedSymbol, "empty grammar has no derivation");
  return detail::eval_size_impl(g, g.start());
}

inline Text eval(const Grammar& g, std::uint64_t max_len = kDefaultEvalGuard) {
  std::uint64_t n = eval_size(g);  // also validates acyclicity / definedness
  if (n > max_len) raise(Errc::TooLong, "derived string exceeds the expansion guard");
  Text out;
  out.reserve(static_cast<std::size_t>(n));
  struct Frame {
    SymbolId sym;
    std::uint64_t count;
  };
  std::vector<Frame> stack{{g.start(), 1}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.sym.is_terminal()) {
      out.append(static_cast<std::size_t>(f.count), static_cast<char32_t>(f.sym.id));
      continue;
    }
    const Rule* r = g.find(f.sym);
    if (f.count > 1) stack.push_back({f.sym, f.count - 1});
    if (r->kind == RuleKind::Pair) {
      stack.push_back({r->second, 1});
      stack.push_back({r->first, 1});
    } else {
      stack.push_back({r->first, r->exponent});
    }
  }
  return out;
}

// Renumbers nonterminals in first-visit depth-first order from the start rule,
// drops unreachable rules, and orders the rule list as [start, N0, N1, ...].
// Idempotent; preserves eval. Structurally identical grammars canonicalize to
// equal objects regardless of their original ids.
inline Grammar canonicalize(const Grammar& g) {
  const Rule* start_rule = g.find(g.start());
  if (start_rule == nullptr) raise(Errc::UndefinedSymbol, "start symbol lacks a rule");
  // DFS preorder from the start rule's children; first visit assigns the id.
  std::unordered_map<std::uint64_t, std::uint64_t> ids;  // packed old -> new id
  std::vector<const Rule*> body_rules;
  std::vector<SymbolId> work;
  auto push_rhs = [&](const Rule* r) {
    if (r->kind == RuleKind::Pair) work.push_back(r->second);
    work.push_back(r->first);  // popped first
  };
  push_rhs(start_rule);
  while (!work.empty()) {
    SymbolId s = work.back();
    work.pop_back();
    if (s.is_terminal()) continue;
    if (!ids.emplace(s.packed(), ids.size()).second) continue;
    const Rule* r = g.find(s);
    if (r == nullptr) raise(Errc::UndefinedSymbol, "no rule for a nonterminal");
    body_rules.push_back(r);
    push_rhs(r);
  }
  auto rename = [&](SymbolId s) -> SymbolId {
    if (s.is_terminal()) return s;
    return nonterminal(ids.at(s.packed()));
  };
  std::vector<Rule> out;
  out.reserve(body_rules.size() + 1);
  Rule sr = *start_rule;
  sr.lhs = start_symbol();
  sr.first = rename(sr.first);
  if (sr.kind == RuleKind::Pair) sr.second = rename(sr.second);
  out.push_back(sr);
  // body_rules is in preorder of first visit == id order
  for (const Rule* r : body_rules) {
    Rule nr = *r;
    nr.lhs = rename(nr.lhs);
    nr.first = rename(nr.first);
    if (nr.kind == RuleKind::Pair) nr.second = rename(nr.second);
    out.push_back(nr);
  }
  return Grammar(std::move(out), start_symbol(), g.cached_eval_size());
}

// Grammar for eval(g)[m..] (1-based, inclusive). Walks the derivation path to
// position m collecting right remnants, splitting at most one power rule per
// level, then chains the remnants onto a fresh start rule.
inline Grammar suffix_grammar(const Grammar& g, std::uint64_t m) {
  std::uint64_t total = eval_size(g);
  if (m < 1 || m > total) raise(Errc::OutOfRange, "suffix start outside the derived string");

  std::unordered_map<std::uint64_t, std::uint64_t> sizes;
  auto size_of = [&](SymbolId s) -> std::uint64_t {
    if (s.is_terminal()) return 1;
    auto it = sizes.find(s.packed());
    if (it != sizes.end()) return it->second;
    std::uint64_t v = detail::eval_size_impl(g, s);
    sizes.emplace(s.packed(), v);
    return v;
  };

  std::uint64_t fresh_id = 0;
  for (const Rule& r : g.rules())
    if (r.lhs.kind == SymbolKind::Nonterminal) fresh_id = std::max(fresh_id, r.lhs.id + 1);

  std::vector<Rule> extra;
  std::vector<SymbolId> remnants;  // collected root-first
  SymbolId cur = g.start();
  // The start symbol may not appear on a right-hand side, so resolve the start
  // rule once before descending.
  {
    const Rule* r = g.find(cur);
    if (r->kind == RuleKind::Power) {
      std::uint64_t q = size_of(r->first);
      std::uint64_t skip = (m - 1) / q;
      std::uint64_t rest = r->exponent - skip - 1;
      m -= skip * q;
      if (rest == 1) {
        remnants.push_back(r->first);
      } else if (rest >= 2) {
        SymbolId p = nonterminal(fresh_id++);
        extra.push_back(power_rule(p, r->first, rest));
        remnants.push_back(p);
      }
      cur = r->first;
    } else {
      std::uint64_t sa = size_of(r->first);
      if (m <= sa) {
        remnants.push_back(r->second);
        cur = r->first;
      } else {
        m -= sa;
        cur = r->second;
      }
    }
  }
  while (m > 1) {
    const Rule* r = g.find(cur);
    if (r->kind == RuleKind::Pair) {
      std::uint64_t sa = size_of(r->first);
      if (m <= sa) {
        remnants.push_back(r->second);
        cur = r->first;
      } else {
        m -= sa;
        cur = r->second;
      }
    } else {
      std::uint64_t q = size_of(r->first);
      std::uint64_t skip = (m - 1) / q;
      std::uint64_t rest = r->exponent - skip - 1;
      m -= skip * q;
      if (rest == 1) {
        remnants.push_back(r->first);
      } else if (rest >= 2) {
        SymbolId p = nonterminal(fresh_id++);
        extra.push_back(power_rule(p, r->first, rest));
        remnants.push_back(p);
      }
      cur = r->first;
    }
  }

  // Suffix = cur followed by remnants deepest-first.
  std::vector<SymbolId> seq{cur};
  for (auto it = remnants.rbegin(); it != remnants.rend(); ++it) seq.push_back(*it);

  std::vector<Rule> rules;
  SymbolId st = start_symbol();
  if (seq.size() == 1) {
    if (seq[0].is_terminal()) {
      rules.push_back(power_rule(st, seq[0], 1));
    } else {
      // copy the symbol's own rule onto the start symbol
      Rule sr = *g.find(seq[0]);
      sr.lhs = st;
      rules.push_back(sr);
    }
  } else {
    SymbolId head = st;
    for (std::size_t i = 0; i + 2 < seq.size(); ++i) {
      SymbolId next = nonterminal(fresh_id++);
      rules.push_back(pair_rule(head, seq[i], next));
      head = next;
    }
    rules.push_back(pair_rule(head, seq[seq.size() - 2], seq.back()));
  }

  // Pull in the remnant power rules plus every original body rule, then let
  // canonicalization strip whatever became unreachable.
  for (const Rule& r : extra) rules.push_back(r);
  for (const Rule& r : g.rules())
    if (r.lhs.kind == SymbolKind::Nonterminal) rules.push_back(r);
  return canonicalize(Grammar(std::move(rules), st));
}

inline std::string symbol_name(SymbolId s) {
  switch (s.kind) {
    case SymbolKind::Start:
      return "#";
    case SymbolKind::Nonterminal:
      return "N" + std::to_string(s.id);
    case SymbolKind::Terminal: {
      char32_t c = static_cast<char32_t>(s.id);
      if (c >= 0x20 && c < 0x7f) return std::string("'") + static_cast<char>(c) + "'";
      return "t" + std::to_string(s.id);
    }
  }
  return "?";
}

// One rule per line, start rule first, canonical ids assumed.
inline void dump(const Grammar& g, std::ostream& os) {
  for (const Rule& r : g.rules()) {
    os << symbol_name(r.lhs) << " -> " << symbol_name(r.first);
    if (r.kind == RuleKind::Pair)
      os << ' ' << symbol_name(r.second);
    else
      os << " ^ " << r.exponent;
    os << '\n';
  }
}

inline std::string dump(const Grammar& g) {
  std::ostringstream os;
  dump(g, os);
  return os.str();
}

}  // namespace edstream
