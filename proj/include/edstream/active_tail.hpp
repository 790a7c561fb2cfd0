#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edstream/decompose.hpp"
#include "edstream/errors.hpp"
#include "edstream/grammar.hpp"
#include "edstream/hashing.hpp"

namespace edstream {

// Streaming decomposition of one text. Symbols enter one at a time; committed
// blocks leave through a callback in text order and are final the moment they
// are emitted. The committed prefix always equals a prefix of the batch
// decomposition of the text seen so far, and after finalize() the two match
// block for block.
//
// The tail also exposes the *prefix view*: the block structure that finalizing
// right now would produce. Pending runs and unpaired elements are resolved in
// a side simulation after every push, so prefix_active_blocks() always equals
// the trailing blocks of the batch decomposition of the current prefix. The
// commit cadence keeps the prefix view at most `definite_window` blocks behind.
//
// Working state is bounded: each reduction level keeps O(1) buffered elements,
// the top sequence and mark set are pruned as blocks commit, and raw symbols
// are retained only for the uncommitted suffix (up to raw_cap). Inputs that
// starve the commit rule past the structure budget saturate the tail: it stops
// tracking structure, keeps counting symbols, and reports saturated().
class ActiveTail {
 public:
  // index is 1-based and sequential; [lo, hi] is the block's text interval.
  using BlockSink =
      std::function<void(std::uint64_t index, std::uint64_t lo, std::uint64_t hi, Grammar&& g,
                         bool oversize)>;

  ActiveTail(const DecompParams& dp, const DecompFamilies* df, BlockSink sink,
             std::uint64_t raw_cap = ~std::uint64_t{0})
      : dp_(dp), df_(df), sink_cb_(std::move(sink)), raw_cap_(raw_cap) {
    if (!df_) raise(Errc::BadParams, "families required");
    stages_.resize(dp_.level_cap);
    structure_cap_ = 8 * dp_.definite_window + 8 * dp_.level_count + 64;
  }

  // Diagnostic observer: sees every creation event (node, leftpos, marked).
  std::function<void(const ParseNode&, std::uint64_t, bool)> event_observer;

  void push(char32_t c) {
    if (finalized_) raise(Errc::PhaseError, "push after finalize");
    if (pushed_ >= dp_.length_bound) raise(Errc::TooLong, "stream exceeds length bound");
    ++pushed_;
    if (saturated_) return;
    raw_.push_back(c);
    if (pushed_ == 1) add_mark(1);
    NodePtr leaf;
    if (leaves_.size() < 4096) {
      auto& slot = leaves_[c];
      if (!slot) slot = make_leaf(c, df_->fper);
      leaf = slot;
    } else {
      auto it = leaves_.find(c);
      leaf = it != leaves_.end() ? it->second : make_leaf(c, df_->fper);
    }
    feed(real_ctx(), 0, {leaf, pushed_});
    if (!saturated_) {
      refresh_virtual_marks();
      commit_ready(false);
    }
    trim_raw();
  }

  // End of stream: flush every level bottom-up and commit all remaining
  // blocks. After this the emitted blocks equal the batch decomposition.
  void finalize() {
    if (finalized_) raise(Errc::PhaseError, "finalize twice");
    finalized_ = true;
    vmarks_.clear();
    if (saturated_) return;
    Ctx cx = real_ctx();
    flush_stages(cx);
    if (!saturated_) commit_ready(true);
  }

  bool finalized() const { return finalized_; }
  bool saturated() const { return saturated_; }
  std::uint64_t pushed() const { return pushed_; }
  std::uint64_t committed_end() const { return committed_end_; }
  std::uint64_t committed_blocks() const { return committed_blocks_; }

  // Every boundary below the horizon is final: future marks land at or past it.
  std::uint64_t horizon() const { return sink_end_ + 1; }

  // Uncommitted blocks under the fired boundaries alone; the last one is open.
  std::uint64_t active_count() const { return saturated_ ? 0 : marks_.size(); }

  // Uncommitted blocks of the finalized-prefix view: fired boundaries plus the
  // boundaries a finalize would add now. This matches the trailing blocks of
  // the batch decomposition of the text pushed so far.
  std::uint64_t prefix_active_count() const {
    return saturated_ ? 0 : marks_.size() + vmarks_.size();
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> prefix_active_blocks() const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    if (saturated_ || (marks_.empty() && vmarks_.empty())) return out;
    std::vector<std::uint64_t> bounds;
    bounds.reserve(marks_.size() + vmarks_.size());
    bounds.assign(marks_.begin(), marks_.end());
    bounds.insert(bounds.end(), vmarks_.begin(), vmarks_.end());
    std::sort(bounds.begin(), bounds.end());
    out.reserve(bounds.size());
    for (std::size_t i = 0; i < bounds.size(); ++i)
      out.emplace_back(bounds[i], i + 1 < bounds.size() ? bounds[i + 1] - 1 : pushed_);
    return out;
  }

  // Direct container footprint (raw buffer, sequence, marks, stages); the
  // shared parse-dag nodes are counted globally via ParseNode::live_nodes.
  std::size_t state_bytes() const {
    return raw_.size() * sizeof(char32_t) + sink_.size() * sizeof(Element) +
           (marks_.size() + vmarks_.size()) * (sizeof(std::uint64_t) + 32) +
           2 * stages_.size() * sizeof(StageState) +
           leaves_.size() * (sizeof(char32_t) + sizeof(NodePtr) + 16);
  }

  // Raw symbol access for the retained suffix [raw_start, pushed].
  std::uint64_t raw_start() const { return raw_start_; }
  char32_t at(std::uint64_t pos) const {
    if (pos < raw_start_ || pos > pushed_ || pos - raw_start_ >= raw_.size())
      raise(Errc::OutOfRange, "symbol not retained");
    return raw_[pos - raw_start_];
  }
  Text text_of(std::uint64_t lo, std::uint64_t hi) const {
    if (lo < 1 || hi < lo) raise(Errc::BadRange, "bad text interval");
    Text out;
    out.reserve(hi - lo + 1);
    for (std::uint64_t p = lo; p <= hi; ++p) out.push_back(at(p));
    return out;
  }

 private:
  struct StageState {
    // run accumulator: pending maximal run of equal symbols
    NodePtr run_node;
    std::uint64_t run_count = 0;
    std::uint64_t run_leftpos = 0;
    // pairing: u is the segment-leading unpaired element, w the newest element
    // whose minimum status is still unknown (needs its right neighbour)
    Element unpaired{};
    Element newest{};
    std::uint64_t newest_hash = 0;
    std::uint64_t prev_hash = 0;
    bool has_unpaired = false;
    bool has_newest = false;
    bool has_prev = false;
  };

  // The cascade below runs in two modes over the same code path. Real mode
  // mutates the live stages, fires events into the mark set, and appends to
  // the top-level sequence. Virtual mode runs on a scratch copy of the stages
  // and only collects would-be marks; the stream itself is untouched.
  struct Ctx {
    ActiveTail* self;
    std::vector<StageState>* stages;
    std::vector<std::uint64_t>* virtual_marks;  // nullptr = real mode

    bool dead() const { return !virtual_marks && self->saturated_; }
  };

  Ctx real_ctx() { return {this, &stages_, nullptr}; }

  // Entry into level l's sequence. A node's creation event fires here, the
  // first time it lands in a sequence: nodes built during a reduction but
  // consumed by pairing in the same round never become sequence elements and
  // never fire (matching the batch marking rule).
  void feed(Ctx cx, std::uint32_t l, Element e) {
    if (e.node->level == l) {
      if (cx.virtual_marks) {
        if (df_->marks_at(l) && eval_hash(df_->marking[l], e.node->fp) == 0)
          cx.virtual_marks->push_back(e.leftpos);
      } else {
        fire_event(e.node, e.leftpos);
        if (cx.dead()) return;
      }
    }
    if (l == dp_.level_cap) {
      if (!cx.virtual_marks) {
        sink_.push_back(e);
        sink_end_ += e.node->span;
        if (sink_.size() > structure_cap_) saturate();
      }
      return;
    }
    StageState& st = (*cx.stages)[l];
    if (st.run_count && st.run_node->sid == e.node->sid) {
      ++st.run_count;
      return;
    }
    resolve_run(cx, l);
    if (cx.dead()) return;
    StageState& st2 = (*cx.stages)[l];
    st2.run_node = e.node;
    st2.run_count = 1;
    st2.run_leftpos = e.leftpos;
  }

  void resolve_run(Ctx cx, std::uint32_t l) {
    StageState& st = (*cx.stages)[l];
    if (!st.run_count) return;
    Element out;
    if (st.run_count >= 2) {
      out = {make_power_node(st.run_node, st.run_count, l + 1, df_->fper), st.run_leftpos};
    } else {
      out = {st.run_node, st.run_leftpos};
    }
    st.run_count = 0;
    st.run_node = nullptr;
    std::uint64_t h = eval_hash(df_->pairing[l], out.node->fp);
    if (st.has_newest) resolve_newest(cx, l, true, h);
    if (cx.dead()) return;
    StageState& st2 = (*cx.stages)[l];
    st2.newest = out;
    st2.newest_hash = h;
    st2.has_newest = true;
  }

  // Decide whether w is a strict local minimum (sequence ends count as +inf,
  // ties break no minimum), then settle it against the pending unpaired
  // element exactly like the batch segment pairing.
  void resolve_newest(Ctx cx, std::uint32_t l, bool has_right, std::uint64_t right_hash) {
    StageState& st = (*cx.stages)[l];
    bool left_ok = !st.has_prev || st.newest_hash < st.prev_hash;
    bool right_ok = !has_right || st.newest_hash < right_hash;
    bool is_min = left_ok && right_ok;
    Element w = st.newest;
    st.has_newest = false;
    st.prev_hash = st.newest_hash;
    st.has_prev = true;
    if (is_min && st.has_unpaired) {
      Element u = st.unpaired;
      st.has_unpaired = false;
      feed(cx, l + 1, u);  // odd leftover of the closing segment
      if (cx.dead()) return;
    }
    StageState& st2 = (*cx.stages)[l];
    if (!st2.has_unpaired) {
      st2.unpaired = w;
      st2.has_unpaired = true;
      return;
    }
    Element pe{make_pair_node(st2.unpaired.node, w.node, l + 1, df_->fper),
               st2.unpaired.leftpos};
    st2.has_unpaired = false;
    feed(cx, l + 1, pe);
  }

  // End-of-stream resolution, bottom-up: close runs, settle the last element
  // of each level (no right neighbour), pass leftovers upward.
  void flush_stages(Ctx cx) {
    for (std::uint32_t l = 0; l < dp_.level_cap && !cx.dead(); ++l) {
      resolve_run(cx, l);
      if (cx.dead()) break;
      StageState& st = (*cx.stages)[l];
      if (st.has_newest) resolve_newest(cx, l, false, 0);
      if (cx.dead()) break;
      StageState& st2 = (*cx.stages)[l];
      if (st2.has_unpaired) {
        Element u = st2.unpaired;
        st2.has_unpaired = false;
        feed(cx, l + 1, u);
      }
    }
  }

  // Recompute the boundaries a finalize would add right now. Runs on scratch
  // state; new marks are deduplicated against the fired ones and must stay
  // ahead of the committed prefix.
  void refresh_virtual_marks() {
    vmarks_.clear();
    scratch_stages_ = stages_;
    Ctx cx{this, &scratch_stages_, &vmarks_};
    flush_stages(cx);
    std::sort(vmarks_.begin(), vmarks_.end());
    vmarks_.erase(std::unique(vmarks_.begin(), vmarks_.end()), vmarks_.end());
    std::erase_if(vmarks_, [&](std::uint64_t p) { return marks_.count(p) != 0; });
    if (!vmarks_.empty() && vmarks_.front() <= committed_end_)
      raise(Errc::DeterminismViolation, "pending boundary behind committed prefix");
  }

  void fire_event(const NodePtr& n, std::uint64_t leftpos) {
    bool marked = df_->marks_at(n->level) && eval_hash(df_->marking[n->level], n->fp) == 0;
    if (event_observer) event_observer(*n, leftpos, marked);
    if (marked) add_mark(leftpos);
  }

  void add_mark(std::uint64_t pos) {
    if (saturated_) return;
    if (pos <= committed_end_)
      raise(Errc::DeterminismViolation, "mark behind committed prefix");
    marks_.insert(pos);
    if (marks_.size() > structure_cap_) saturate();
  }

  // Commit the oldest blocks while the prefix view holds more than
  // definite_window of them. Only fired boundaries at or below the horizon may
  // close a committed block; pending (virtual) boundaries all sit at or past
  // the horizon, so a block that passes the gate can never be split later.
  void commit_ready(bool all) {
    while (!saturated_ && !marks_.empty() &&
           (all || marks_.size() + vmarks_.size() > dp_.definite_window)) {
      auto it = marks_.begin();
      std::uint64_t m1 = *it;
      auto nx = std::next(it);
      std::uint64_t m2 = nx != marks_.end() ? *nx : pushed_ + 1;
      if (!all && nx == marks_.end()) break;
      if (m2 > horizon()) {
        if (all) raise(Errc::DeterminismViolation, "unflushed structure at finalize");
        break;  // closing boundary could still move; wait
      }
      ExtractedBlock eb = extract_block(sink_, m1, m2 - 1, dp_.grammar_cap);
      committed_end_ = m2 - 1;
      marks_.erase(it);
      ++committed_blocks_;
      while (!sink_.empty() &&
             sink_.front().leftpos + sink_.front().node->span - 1 <= committed_end_)
        sink_.pop_front();
      while (raw_start_ <= committed_end_ && !raw_.empty()) {
        raw_.pop_front();
        ++raw_start_;
      }
      if (sink_cb_) sink_cb_(committed_blocks_, m1, m2 - 1, std::move(eb.grammar), eb.oversize);
    }
  }

  void trim_raw() {
    while (raw_.size() > raw_cap_) {
      raw_.pop_front();
      ++raw_start_;
    }
  }

  // Structure budget exhausted (commit-starving input): drop all tracking,
  // keep the symbol count, answer nothing further.
  void saturate() {
    saturated_ = true;
    stages_.clear();
    stages_.resize(dp_.level_cap);
    scratch_stages_.clear();
    sink_.clear();
    marks_.clear();
    vmarks_.clear();
    raw_.clear();
    raw_start_ = pushed_ + 1;
    leaves_.clear();
  }

  DecompParams dp_;
  const DecompFamilies* df_;
  BlockSink sink_cb_;
  std::uint64_t raw_cap_;
  std::uint64_t structure_cap_ = 0;

  std::vector<StageState> stages_;
  std::vector<StageState> scratch_stages_;  // reused by refresh_virtual_marks
  std::deque<Element> sink_;  // top-level sequence covering (committed_end, sink_end]
  std::uint64_t sink_end_ = 0;
  std::set<std::uint64_t> marks_;        // fired boundaries > committed_end
  std::vector<std::uint64_t> vmarks_;    // boundaries a finalize would add now
  std::deque<char32_t> raw_;
  std::uint64_t raw_start_ = 1;
  std::unordered_map<char32_t, NodePtr> leaves_;

  std::uint64_t pushed_ = 0;
  std::uint64_t committed_end_ = 0;
  std::uint64_t committed_blocks_ = 0;
  bool finalized_ = false;
  bool saturated_ = false;
};

// Whole-stream convenience: identical output to decompose_batch by
// construction; the dual route exists so the two can be checked against each
// other.
inline BlockSeq decompose_stream(TextView x, const DecompParams& dp, const DecompFamilies& df) {
  BlockSeq out;
  out.total_len = x.size();
  ActiveTail tail(dp, &df,
                  [&](std::uint64_t, std::uint64_t lo, std::uint64_t hi, Grammar&& g,
                      bool oversize) {
                    out.intervals.emplace_back(lo, hi);
                    out.oversize.push_back(oversize ? 1 : 0);
                    out.any_oversize = out.any_oversize || oversize;
                    out.grammars.push_back(std::move(g));
                  });
  for (char32_t c : x) tail.push(c);
  tail.finalize();
  if (tail.saturated()) raise(Errc::BudgetExceeded, "structure budget exhausted");
  return out;
}

}  // namespace edstream
