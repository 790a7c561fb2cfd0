#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string_view>
#include <vector>

#include "edstream/errors.hpp"

namespace edstream {

// One mismatch between the engine's frozen pattern and the current window.
struct MismatchRecord {
  std::uint64_t pos = 0;  // 1-based coordinate within the pattern
  std::uint64_t text_sym = 0;
  std::uint64_t pat_sym = 0;
};

struct WindowQueryResult {
  bool over_k = true;
  std::uint64_t ham = 0;  // valid iff !over_k; then it is the exact distance

  static WindowQueryResult within(std::uint64_t h) { return {false, h}; }
  static WindowQueryResult over() { return {true, 0}; }
};

// Streaming K-mismatch engine over coordinate symbols: read a pattern once,
// then after each batch of text symbols report the Hamming distance between
// the pattern and the last pattern-length window, thresholded per query, with
// full mismatch information on demand. Queries land only on slot boundaries
// (multiples of the slot width M), which is how the matcher drives it.
class MismatchEngine {
 public:
  virtual ~MismatchEngine() = default;
  virtual void feed_pattern(std::uint64_t sym) = 0;
  virtual void end_pattern() = 0;
  virtual void feed_text(std::uint64_t sym) = 0;
  virtual WindowQueryResult query_window(std::uint64_t k_threshold) = 0;
  virtual std::vector<MismatchRecord> recover_mismatches() = 0;
  virtual std::uint64_t pattern_length() const = 0;
  virtual std::uint64_t text_length() const = 0;
  virtual std::size_t state_bytes() const = 0;
};

// Exact engine: holds the full pattern plus the last pattern-length window.
// Slot contents are interned (content-addressed with refcounted eviction), so
// equal slots compare as one pointer test and a boundary query costs
// O(#differing slots · M + r) with no probabilistic shortcut.
class ReferenceEngine final : public MismatchEngine {
 public:
  explicit ReferenceEngine(std::uint64_t slot_width) : m_(slot_width) {
    if (m_ == 0) raise(Errc::BadParams, "slot width must be positive");
  }

  void feed_pattern(std::uint64_t sym) override {
    if (frozen_) raise(Errc::PhaseError, "pattern already frozen");
    pat_pending_.push_back(sym);
  }

  void end_pattern() override {
    if (frozen_) raise(Errc::PhaseError, "end_pattern twice");
    if (pat_pending_.size() % m_ != 0)
      raise(Errc::BadParams, "pattern length must be a multiple of the slot width");
    frozen_ = true;
    pat_len_ = pat_pending_.size();
    pat_slots_.reserve(pat_len_ / m_);
    for (std::size_t off = 0; off < pat_pending_.size(); off += m_) {
      std::vector<std::uint64_t> slot(pat_pending_.begin() + off,
                                      pat_pending_.begin() + off + m_);
      pat_slots_.push_back(intern(std::move(slot)));
    }
    pat_pending_.clear();
    pat_pending_.shrink_to_fit();
  }

  void feed_text(std::uint64_t sym) override {
    if (!frozen_) raise(Errc::PhaseError, "text before end_pattern");
    ++text_len_;
    cur_.push_back(sym);
    if (cur_.size() == m_) {
      if (!pat_slots_.empty()) {
        window_.push_back(intern(std::move(cur_)));
        if (window_.size() > pat_slots_.size()) {
          release(window_.front());
          window_.pop_front();
        }
      }
      cur_.clear();
    }
  }

  WindowQueryResult query_window(std::uint64_t k_threshold) override {
    if (!frozen_) raise(Errc::PhaseError, "query before end_pattern");
    if (text_len_ % m_ != 0) raise(Errc::PhaseError, "query off slot boundary");
    last_within_ = false;
    last_query_len_ = text_len_;
    if (pat_slots_.empty() || window_.size() < pat_slots_.size())
      return WindowQueryResult::over();  // empty pattern / incomplete window
    std::uint64_t ham = 0;
    for (std::size_t j = 0; j < pat_slots_.size(); ++j) {
      if (window_[j] == pat_slots_[j]) continue;
      const auto& t = window_[j]->first;
      const auto& p = pat_slots_[j]->first;
      for (std::uint64_t i = 0; i < m_; ++i) ham += t[i] != p[i];
      if (ham > k_threshold) return WindowQueryResult::over();
    }
    last_within_ = true;
    return WindowQueryResult::within(ham);
  }

  std::vector<MismatchRecord> recover_mismatches() override {
    if (!last_within_) raise(Errc::PhaseError, "no preceding within-threshold query");
    if (text_len_ != last_query_len_)
      raise(Errc::StalenessError, "text advanced since the query");
    std::vector<MismatchRecord> out;
    for (std::size_t j = 0; j < pat_slots_.size(); ++j) {
      if (window_[j] == pat_slots_[j]) continue;
      const auto& t = window_[j]->first;
      const auto& p = pat_slots_[j]->first;
      for (std::uint64_t i = 0; i < m_; ++i)
        if (t[i] != p[i]) out.push_back({j * m_ + i + 1, t[i], p[i]});
    }
    return out;
  }

  std::uint64_t pattern_length() const override { return pat_len_; }
  std::uint64_t text_length() const override { return text_len_; }
  std::uint64_t slot_width() const { return m_; }

  std::size_t state_bytes() const override {
    std::size_t bytes = table_.size() * (m_ * sizeof(std::uint64_t) + 64);
    bytes += (window_.size() + pat_slots_.size()) * sizeof(void*);
    bytes += (cur_.capacity() + pat_pending_.capacity()) * sizeof(std::uint64_t);
    return bytes;
  }

  // live interned slots; bounded by pattern + window size
  std::size_t interned_slots() const { return table_.size(); }

 private:
  struct SlotInfo {
    std::uint64_t refs = 0;
  };
  using Table = std::map<std::vector<std::uint64_t>, SlotInfo>;
  using SlotRef = Table::iterator;

  SlotRef intern(std::vector<std::uint64_t>&& slot) {
    auto [it, fresh] = table_.try_emplace(std::move(slot));
    ++it->second.refs;
    (void)fresh;
    return it;
  }

  void release(SlotRef it) {
    if (--it->second.refs == 0) table_.erase(it);
  }

  std::uint64_t m_;
  bool frozen_ = false;
  std::uint64_t pat_len_ = 0;
  std::uint64_t text_len_ = 0;
  std::vector<std::uint64_t> pat_pending_;
  std::vector<std::uint64_t> cur_;
  Table table_;
  std::vector<SlotRef> pat_slots_;
  std::deque<SlotRef> window_;
  bool last_within_ = false;
  std::uint64_t last_query_len_ = 0;
};

inline std::unique_ptr<MismatchEngine> make_engine(std::string_view name,
                                                   std::uint64_t slot_width) {
  if (name == "reference") return std::make_unique<ReferenceEngine>(slot_width);
  raise(Errc::BadParams, "unknown mismatch engine");
}

}  // namespace edstream
