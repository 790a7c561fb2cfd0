#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "edstream/active_tail.hpp"
#include "edstream/decompose.hpp"
#include "edstream/edit_distance.hpp"
#include "edstream/encoding.hpp"
#include "edstream/errors.hpp"
#include "edstream/grammar.hpp"
#include "edstream/hashing.hpp"
#include "edstream/mismatch_engine.hpp"

namespace edstream {

// Per-position answer: the best suffix edit distance found, when it is <= k.
struct EditReport {
  bool finite = false;
  std::uint32_t value = 0;

  static EditReport over() { return {}; }
  static EditReport exact(std::uint32_t v) { return {true, v}; }

  friend bool operator==(const EditReport&, const EditReport&) = default;
};

// Running counters for one copy; cheap enough to keep always-on.
struct CopyStats {
  std::uint64_t window_within = 0;    // engine queries that recovered mismatch info
  std::uint64_t window_over = 0;      // engine queries answered OverK
  std::uint64_t m_finite = 0;         // committed m values <= k
  std::uint64_t partial_slots = 0;    // window slots that could not be reconstructed
  std::uint64_t queries_exact = 0;    // per-symbol answers with a finite total
  std::uint64_t q_no_window = 0;      // prefix view unusable (empty or too far behind)
  std::uint64_t q_no_anchor = 0;      // committed-prefix anchor not available yet
  std::uint64_t q_anchor_over = 0;    // anchor value already exceeded k
  std::uint64_t q_pair_over = 0;      // block pairing pushed the total past k
};

struct MatcherParams {
  std::uint64_t length_bound = 1 << 20;  // max pattern length and max text length
  std::uint32_t max_edits = 0;
  std::uint32_t copies = 0;   // 0 = derived default
  std::uint32_t threads = 1;  // fan-out workers for the ensemble
  std::string engine = "reference";
  std::uint64_t seed = 0;
  DecompOverrides overrides{};
};

inline std::uint32_t default_copy_count(std::uint64_t length_bound) {
  std::uint32_t lg = 0;
  while ((1ull << lg) < length_bound) ++lg;
  return std::max<std::uint32_t>(2 * lg, 2);
}

// One randomized streaming matcher. Lifecycle: push_pattern_symbol* ->
// end_pattern -> push_text_symbol* (one report per text symbol). Internal
// failures poison the copy, which then reports OverK forever; the surrounding
// ensemble masks poisoned copies. `pattern_buf` is owned by the caller, must
// outlive the copy, and must hold the full pattern by end_pattern time.
class MatcherCopy {
 public:
  enum class Phase { Pattern, Text, Fallback };

  MatcherCopy(const MatcherParams& mp, std::uint64_t copy_seed, const Text* pattern_buf)
      : k_(mp.max_edits), pattern_buf_(pattern_buf) {
    if (!pattern_buf_) raise(Errc::BadParams, "pattern buffer required");
    dp_ = DecompParams::make(mp.length_bound, mp.max_edits, copy_seed, mp.overrides);
    ep_ = EncParams::make(dp_);
    df_ = std::make_unique<DecompFamilies>(DecompFamilies::make(dp_));
    engine_ = make_engine(mp.engine, ep_.M);
    raw_cap_ = 2 * dp_.target_block_len * (dp_.definite_window + 4 * dp_.level_count + 16);
    pat_tail_ = std::make_unique<ActiveTail>(
        dp_, df_.get(),
        [this](std::uint64_t, std::uint64_t lo, std::uint64_t hi, Grammar&& g, bool oversize) {
          on_pattern_block(lo, hi, std::move(g), oversize);
        },
        raw_cap_);
    txt_tail_ = std::make_unique<ActiveTail>(
        dp_, df_.get(),
        [this](std::uint64_t, std::uint64_t, std::uint64_t, Grammar&& g, bool oversize) {
          on_text_block(std::move(g), oversize);
        },
        raw_cap_);
  }

  MatcherCopy(const MatcherCopy&) = delete;
  MatcherCopy& operator=(const MatcherCopy&) = delete;

  void push_pattern_symbol(char32_t a) {
    if (phase_ != Phase::Pattern) raise(Errc::PhaseError, "pattern already ended");
    if (poisoned_) return;
    try {
      pat_tail_->push(a);
      if (pat_tail_->saturated()) poison();
    } catch (const Error& e) {
      if (e.code() == Errc::TooLong) throw;
      poison();
    }
    if (poison_pending_) poison();
  }

  void end_pattern() {
    if (phase_ != Phase::Pattern) raise(Errc::PhaseError, "pattern already ended");
    if (poisoned_) {
      phase_ = Phase::Text;
      return;
    }
    try {
      pat_tail_->finalize();
      if (pat_tail_->saturated() || poison_pending_) {
        poison();
        phase_ = Phase::Text;
        return;
      }
      r_ = pat_tail_->committed_blocks();
      const std::uint64_t R = dp_.definite_window;
      if (r_ <= R) {
        // Too few blocks for the grammar pipeline: run the exact online DP.
        phase_ = Phase::Fallback;
        fallback_.emplace(*pattern_buf_);
        pending_.clear();
        engine_.reset();
        pat_tail_.reset();
        txt_tail_.reset();
        return;
      }
      while (pending_.size() > R && !poison_pending_) feed_oldest_pending();
      if (poison_pending_) {
        poison();
        phase_ = Phase::Text;
        return;
      }
      engine_->end_pattern();
      tail_evals_.reserve(pending_.size());
      for (const PendingBlock& b : pending_)
        tail_evals_.push_back(pattern_buf_->substr(b.lo - 1, b.hi - b.lo + 1));
      pending_.clear();
      pat_tail_.reset();
      phase_ = Phase::Text;
    } catch (const Error&) {
      poison();
      phase_ = Phase::Text;
    }
  }

  EditReport push_text_symbol(char32_t a) {
    if (phase_ == Phase::Pattern) raise(Errc::PhaseError, "pattern not ended");
    ++text_pushed_;
    if (poisoned_) return EditReport::over();
    if (phase_ == Phase::Fallback) {
      if (text_pushed_ > dp_.length_bound) raise(Errc::StreamTooLong, "text exceeds length bound");
      fallback_->push(a);
      const std::uint32_t v = fallback_->current();
      return v <= k_ ? EditReport::exact(v) : EditReport::over();
    }
    try {
      txt_tail_->push(a);
      if (txt_tail_->saturated()) poison();
    } catch (const Error& e) {
      if (e.code() == Errc::TooLong) raise(Errc::StreamTooLong, "text exceeds length bound");
      poison();
    }
    if (poison_pending_) poison();
    if (poisoned_) return EditReport::over();
    return query_distance();
  }

  Phase phase() const { return phase_; }
  bool poisoned() const { return poisoned_; }
  std::uint32_t max_edits() const { return k_; }
  const DecompParams& decomp_params() const { return dp_; }
  const EncParams& enc_params() const { return ep_; }
  const DecompFamilies& families() const { return *df_; }
  std::uint64_t pattern_blocks() const { return r_; }
  const CopyStats& stats() const { return stats_; }
  // m values for committed blocks s-|ring|+1..s; kInfDistance marks OverK
  static constexpr std::uint64_t kInfDistance = ~std::uint64_t{0};
  std::vector<std::uint64_t> m_ring_snapshot() const { return {m_ring_.begin(), m_ring_.end()}; }
  std::uint64_t committed_text_blocks() const { return s_; }
  std::uint64_t active_text_blocks() const {
    return phase_ == Phase::Text && txt_tail_ ? txt_tail_->prefix_active_count() : 0;
  }

  // Working-set estimate excluding the mismatch engine (reported separately).
  std::size_t state_bytes() const {
    std::size_t b = 0;
    if (pat_tail_) b += pat_tail_->state_bytes();
    if (txt_tail_) b += txt_tail_->state_bytes();
    for (const Text& t : tail_evals_) b += t.size() * sizeof(char32_t);
    for (const Text& t : definite_ring_) b += t.size() * sizeof(char32_t);
    for (const PendingBlock& p : pending_)
      b += p.g.rules().size() * sizeof(Rule) + sizeof(PendingBlock);
    b += m_ring_.size() * sizeof(std::uint64_t);
    if (fallback_) b += pattern_buf_->size() * (sizeof(char32_t) + sizeof(std::uint32_t));
    return b;
  }
  std::size_t engine_state_bytes() const { return engine_ ? engine_->state_bytes() : 0; }

 private:
  static constexpr std::uint64_t kInf = kInfDistance;

  struct PendingBlock {
    Grammar g;
    std::uint64_t lo = 0, hi = 0;
    bool oversize = false;
  };

  void poison() {
    poisoned_ = true;
    poison_pending_ = false;
    pending_.clear();
    tail_evals_.clear();
    definite_ring_.clear();
    m_ring_.clear();
    engine_.reset();
    fallback_.reset();
    pat_tail_.reset();
    txt_tail_.reset();
  }

  // Sink for committed pattern blocks: buffer, and once more than R are
  // buffered the oldest is final enough to stream into the engine.
  void on_pattern_block(std::uint64_t lo, std::uint64_t hi, Grammar&& g, bool oversize) {
    if (poisoned_ || poison_pending_) return;
    pending_.push_back({std::move(g), lo, hi, oversize});
    while (pending_.size() > dp_.definite_window && !poison_pending_) feed_oldest_pending();
  }

  void feed_oldest_pending() {
    PendingBlock& b = pending_.front();
    if (b.oversize) {
      poison_pending_ = true;
      return;
    }
    try {
      const EncodedGrammar enc = encode(b.g, ep_);
      for (std::uint64_t c : enc.coords) engine_->feed_pattern(c);
    } catch (const Error&) {
      poison_pending_ = true;
      return;
    }
    ++fed_;
    pending_.pop_front();
  }

  // Sink for committed text blocks; implements the per-grammar commit step.
  void on_text_block(Grammar&& g, bool oversize) {
    if (poisoned_ || poison_pending_) return;
    if (oversize) {
      poison_pending_ = true;
      return;
    }
    try {
      commit_grammar(g);
    } catch (const Error&) {
      poison_pending_ = true;
    }
  }

  void commit_grammar(const Grammar& g) {
    const EncodedGrammar enc = encode(g, ep_);
    for (std::uint64_t c : enc.coords) engine_->feed_text(c);

    const std::uint64_t pat_prefix = r_ - dp_.definite_window;  // grammars inside the engine
    std::uint64_t m = kInf;
    if (s_ + 1 >= pat_prefix) {
      // Budget (k+1)*M, not k*M: an aligned occurrence can differ in k edited
      // blocks plus the block holding the occurrence start, whose pattern
      // side is only a suffix of the text side.
      const WindowQueryResult q =
          engine_->query_window((std::uint64_t{k_} + 1) * ep_.M);
      if (q.over_k) ++stats_.window_over;
      else {
        ++stats_.window_within;
        m = window_distance_sum();
      }
      if (m != kInf) ++stats_.m_finite;
    }
    m_ring_.push_back(m);
    if (m_ring_.size() > dp_.definite_window) m_ring_.pop_front();

    definite_ring_.push_back(eval(g));
    if (definite_ring_.size() > dp_.definite_window) definite_ring_.pop_front();
    ++s_;
  }

  // Sum of block edit distances across the differing window slots, with the
  // first slot allowed to match any suffix of its text block. Capped at k;
  // returns kInf when the cap is exceeded or a slot cannot be reconstructed.
  std::uint64_t window_distance_sum() {
    const std::uint64_t M = ep_.M;
    const std::vector<MismatchRecord> recs = engine_->recover_mismatches();
    if (recs.empty()) return 0;

    std::map<std::uint64_t, std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>>>
        slots;
    std::map<std::uint64_t, std::uint64_t> counts;
    for (const MismatchRecord& rec : recs) {
      const std::uint64_t slot = (rec.pos - 1) / M;
      const std::uint64_t off = (rec.pos - 1) % M;
      auto& [txt, pat] = slots[slot];
      if (txt.empty()) {
        txt.resize(M);
        pat.resize(M);
      }
      txt[off] = rec.text_sym;
      pat[off] = rec.pat_sym;
      ++counts[slot];
    }

    std::uint64_t total = 0;
    bool first_slot_seen = false;
    for (auto& [slot, coords] : slots) {
      // A slot with any agreeing coordinate cannot be rebuilt from mismatch
      // info alone; give up on this copy rather than guess.
      if (counts[slot] != M) {
        ++stats_.partial_slots;
        raise(Errc::Malformed, "partially recovered window slot");
      }
      const Grammar gt = decode(EncodedGrammar{std::move(coords.first)}, ep_);
      const Grammar gp = decode(EncodedGrammar{std::move(coords.second)}, ep_);
      const Text et = eval(gt);
      const Text ep = eval(gp);
      const std::uint32_t budget = static_cast<std::uint32_t>(k_ - total);
      std::optional<std::uint64_t> d;
      if (slot == 0 && !first_slot_seen) {
        if (auto sm = suffix_min_edit_distance(et, ep, budget)) d = sm->distance;
      } else {
        if (auto bd = banded_edit_distance(et, ep, budget)) d = *bd;
      }
      first_slot_seen = true;
      if (!d) return kInf;
      total += *d;
      if (total > k_) return kInf;
    }
    return total;
  }

  EditReport query_distance() {
    const std::uint64_t R = dp_.definite_window;
    const std::uint64_t t = txt_tail_->prefix_active_count();
    if (t == 0 || t > R) {
      ++stats_.q_no_window;
      return EditReport::over();
    }
    const std::uint64_t d = R - t;

    if (s_ < d + 1) {
      ++stats_.q_no_anchor;  // no committed-prefix value yet
      return EditReport::over();
    }
    const std::uint64_t m_index = s_ - d;
    const std::uint64_t ring_oldest = s_ - m_ring_.size() + 1;
    if (m_index < ring_oldest) {
      ++stats_.q_no_anchor;
      return EditReport::over();
    }
    const std::uint64_t m = m_ring_[m_index - ring_oldest];
    if (m == kInf || m > k_) {
      ++stats_.q_anchor_over;
      return EditReport::over();
    }

    std::uint64_t total = m;
    // Definite blocks s-d+1..s against pattern blocks r-R+1..r-R+d.
    for (std::uint64_t i = 1; i <= d; ++i) {
      const Text& et = definite_ring_[definite_ring_.size() - d + i - 1];
      if (!accumulate_pair(et, tail_evals_[i - 1], total)) {
        ++stats_.q_pair_over;
        return EditReport::over();
      }
    }
    // Trailing blocks of the current prefix's decomposition, paired against
    // the remaining pattern tail and read back from retained raw text.
    const auto actives = txt_tail_->prefix_active_blocks();
    for (std::uint64_t j = 0; j < t; ++j) {
      const auto [lo, hi] = actives[j];
      if (lo < txt_tail_->raw_start()) {
        ++stats_.q_no_window;
        return EditReport::over();
      }
      const Text& ep = tail_evals_[d + j];
      if (!active_pair_equal(lo, hi, ep)) {
        const Text et = txt_tail_->text_of(lo, hi);
        if (!accumulate_pair(et, ep, total)) {
          ++stats_.q_pair_over;
          return EditReport::over();
        }
      }
    }
    ++stats_.queries_exact;
    return EditReport::exact(static_cast<std::uint32_t>(total));
  }

  bool accumulate_pair(const Text& et, const Text& ep, std::uint64_t& total) const {
    if (et == ep) return true;
    const auto bd = banded_edit_distance(et, ep, static_cast<std::uint32_t>(k_ - total));
    if (!bd) return false;
    total += *bd;
    return total <= k_;
  }

  bool active_pair_equal(std::uint64_t lo, std::uint64_t hi, const Text& ep) const {
    if (hi - lo + 1 != ep.size()) return false;
    for (std::uint64_t i = 0; i < ep.size(); ++i)
      if (txt_tail_->at(lo + i) != ep[i]) return false;
    return true;
  }

  std::uint32_t k_;
  const Text* pattern_buf_;
  DecompParams dp_;
  EncParams ep_;
  std::unique_ptr<DecompFamilies> df_;
  std::unique_ptr<MismatchEngine> engine_;
  std::uint64_t raw_cap_ = 0;
  std::unique_ptr<ActiveTail> pat_tail_;
  std::unique_ptr<ActiveTail> txt_tail_;

  Phase phase_ = Phase::Pattern;
  bool poisoned_ = false;
  bool poison_pending_ = false;  // set inside tail callbacks, applied after the push

  std::deque<PendingBlock> pending_;  // committed pattern blocks not yet fed
  std::uint64_t fed_ = 0;             // pattern grammars inside the engine
  std::uint64_t r_ = 0;               // total pattern blocks
  std::uint64_t s_ = 0;               // committed text blocks
  std::uint64_t text_pushed_ = 0;
  std::vector<Text> tail_evals_;   // expansions of pattern blocks r-R+1..r
  std::deque<Text> definite_ring_; // expansions of the last <= R committed text blocks
  std::deque<std::uint64_t> m_ring_;
  std::optional<OnlineSuffixDp> fallback_;
  CopyStats stats_;
};

namespace detail {

// Fans one job per index out to a fixed worker pool; run() barriers before
// returning and rethrows the first captured exception.
class IndexFanout {
 public:
  IndexFanout(std::size_t items, std::uint32_t threads) : items_(items) {
    std::size_t want = std::max<std::uint32_t>(threads, 1);
    n_workers_ = std::min(want, items_ ? items_ : 1);
    if (n_workers_ <= 1) {
      n_workers_ = 0;
      return;
    }
    workers_.reserve(n_workers_);
    for (std::size_t w = 0; w < n_workers_; ++w) workers_.emplace_back([this, w] { loop(w); });
  }

  IndexFanout(const IndexFanout&) = delete;
  IndexFanout& operator=(const IndexFanout&) = delete;

  ~IndexFanout() {
    if (workers_.empty()) return;
    {
      std::lock_guard lk(mu_);
      stop_ = true;
      ++epoch_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void run(const std::function<void(std::size_t)>& job) {
    if (workers_.empty()) {
      for (std::size_t i = 0; i < items_; ++i) job(i);
      return;
    }
    {
      std::lock_guard lk(mu_);
      job_ = &job;
      done_ = 0;
      error_ = nullptr;
      ++epoch_;
    }
    cv_.notify_all();
    std::unique_lock lk(mu_);
    cv_done_.wait(lk, [this] { return done_ == n_workers_; });
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void loop(std::size_t w) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* job = nullptr;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        job = job_;
      }
      const std::size_t lo = items_ * w / n_workers_;
      const std::size_t hi = items_ * (w + 1) / n_workers_;
      std::exception_ptr err;
      try {
        for (std::size_t i = lo; i < hi; ++i) (*job)(i);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lk(mu_);
        if (err && !error_) error_ = err;
        if (++done_ == n_workers_) cv_done_.notify_one();
      }
    }
  }

  std::size_t items_;
  std::size_t n_workers_ = 0;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, cv_done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::uint64_t epoch_ = 0;
  std::size_t done_ = 0;
  bool stop_ = false;
  std::exception_ptr error_ = nullptr;
};

}  // namespace detail

// Independently seeded matcher copies behind one stream interface; reports
// the minimum finite answer across copies. Copies share nothing mutable
// except the read-only pattern buffer owned here.
class Ensemble {
 public:
  explicit Ensemble(const MatcherParams& mp) : mp_(mp) {
    const std::uint32_t n = mp_.copies ? mp_.copies : default_copy_count(mp_.length_bound);
    const SeedTree root(mp_.seed);
    copies_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
      copies_.push_back(
          std::make_unique<MatcherCopy>(mp_, root.child("copy", i).value(), &pattern_));
    fanout_ = std::make_unique<detail::IndexFanout>(copies_.size(), mp_.threads);
  }

  void push_pattern_symbol(char32_t a) {
    if (pattern_ended_) raise(Errc::PhaseError, "pattern already ended");
    if (pattern_.size() >= mp_.length_bound)
      raise(Errc::StreamTooLong, "pattern exceeds length bound");
    pattern_.push_back(a);
    fanout_->run([&](std::size_t i) { copies_[i]->push_pattern_symbol(a); });
  }

  void end_pattern() {
    if (pattern_ended_) raise(Errc::PhaseError, "pattern already ended");
    pattern_ended_ = true;
    fanout_->run([&](std::size_t i) { copies_[i]->end_pattern(); });
  }

  EditReport push_text_symbol(char32_t a) {
    if (!pattern_ended_) raise(Errc::PhaseError, "pattern not ended");
    if (text_len_ >= mp_.length_bound) raise(Errc::StreamTooLong, "text exceeds length bound");
    ++text_len_;
    reports_.assign(copies_.size(), EditReport::over());
    fanout_->run([&](std::size_t i) { reports_[i] = copies_[i]->push_text_symbol(a); });
    EditReport best = EditReport::over();
    for (const EditReport& r : reports_)
      if (r.finite && (!best.finite || r.value < best.value)) best = r;
    return best;
  }

  const MatcherParams& params() const { return mp_; }
  const Text& pattern() const { return pattern_; }
  std::uint64_t text_length() const { return text_len_; }
  std::size_t copy_count() const { return copies_.size(); }
  const MatcherCopy& copy(std::size_t i) const { return *copies_.at(i); }
  const std::vector<EditReport>& last_reports() const { return reports_; }

  std::size_t state_bytes() const {
    std::size_t b = 0;
    for (const auto& c : copies_) b += c->state_bytes();
    return b;
  }
  std::size_t engine_state_bytes() const {
    std::size_t b = 0;
    for (const auto& c : copies_) b += c->engine_state_bytes();
    return b;
  }

 private:
  MatcherParams mp_;
  Text pattern_;
  std::vector<std::unique_ptr<MatcherCopy>> copies_;
  std::unique_ptr<detail::IndexFanout> fanout_;
  std::vector<EditReport> reports_;
  bool pattern_ended_ = false;
  std::uint64_t text_len_ = 0;
};

// Convenience batch driver: returns one report per text position.
inline std::vector<EditReport> match_stream(const Text& pattern, const Text& text,
                                            const MatcherParams& mp) {
  Ensemble e(mp);
  for (char32_t c : pattern) e.push_pattern_symbol(c);
  e.end_pattern();
  std::vector<EditReport> out;
  out.reserve(text.size());
  for (char32_t c : text) out.push_back(e.push_text_symbol(c));
  return out;
}

}  // namespace edstream
