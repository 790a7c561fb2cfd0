#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "edstream/mismatch_engine.hpp"

using namespace edstream;

namespace {

std::unique_ptr<MismatchEngine> engine(std::uint64_t m) { return make_engine("reference", m); }

void feed_all(MismatchEngine& e, const std::vector<std::uint64_t>& pat) {
  for (const std::uint64_t s : pat) e.feed_pattern(s);
  e.end_pattern();
}

// Hamming distance between pat and the trailing |pat| symbols of txt
std::uint64_t direct_ham(const std::vector<std::uint64_t>& pat,
                         const std::vector<std::uint64_t>& txt) {
  const std::size_t n = pat.size();
  std::uint64_t h = 0;
  for (std::size_t i = 0; i < n; ++i) h += txt[txt.size() - n + i] != pat[i];
  return h;
}

}  // namespace

TEST_CASE("an identical window reports zero mismatches") {
  auto e = engine(4);
  const std::vector<std::uint64_t> pat{10, 20, 30, 40, 50, 60, 70, 80};
  feed_all(*e, pat);
  REQUIRE(e->pattern_length() == 8);
  for (const std::uint64_t s : pat) e->feed_text(s);
  const auto q = e->query_window(0);
  REQUIRE_FALSE(q.over_k);
  REQUIRE(q.ham == 0);
  REQUIRE(e->recover_mismatches().empty());
}

TEST_CASE("one altered slot yields one aligned run of records") {
  const std::uint64_t M = 4;
  auto e = engine(M);
  std::vector<std::uint64_t> pat(3 * M), txt;
  for (std::size_t i = 0; i < pat.size(); ++i) pat[i] = 100 + i;
  feed_all(*e, pat);
  txt = pat;
  for (std::uint64_t j = 0; j < M; ++j) txt[M + j] = 9000 + j;  // second slot differs wholly
  for (const std::uint64_t s : txt) e->feed_text(s);

  const auto q = e->query_window(2 * M);
  REQUIRE_FALSE(q.over_k);
  REQUIRE(q.ham == M);
  const auto recs = e->recover_mismatches();
  REQUIRE(recs.size() == M);
  for (std::uint64_t j = 0; j < M; ++j) {
    REQUIRE(recs[j].pos == M + j + 1);  // consecutive, second slot, 1-based
    REQUIRE(recs[j].pat_sym == pat[M + j]);
    REQUIRE(recs[j].text_sym == txt[M + j]);
  }
}

TEST_CASE("two altered slots yield two aligned runs") {
  const std::uint64_t M = 5;
  auto e = engine(M);
  std::vector<std::uint64_t> pat(4 * M);
  for (std::size_t i = 0; i < pat.size(); ++i) pat[i] = 7 + 3 * i;
  feed_all(*e, pat);
  auto txt = pat;
  for (std::uint64_t j = 0; j < M; ++j) {
    txt[j] = 50000 + j;          // first slot
    txt[2 * M + j] = 60000 + j;  // third slot
  }
  for (const std::uint64_t s : txt) e->feed_text(s);
  const auto q = e->query_window(3 * M);
  REQUIRE_FALSE(q.over_k);
  REQUIRE(q.ham == 2 * M);
  const auto recs = e->recover_mismatches();
  REQUIRE(recs.size() == 2 * M);
  for (std::uint64_t j = 0; j < M; ++j) {
    REQUIRE(recs[j].pos == j + 1);
    REQUIRE(recs[M + j].pos == 2 * M + j + 1);
  }
}

TEST_CASE("thresholds cut off exactly beyond the budget") {
  const std::uint64_t M = 3;
  const std::uint64_t k = 2;
  auto e = engine(M);
  std::vector<std::uint64_t> pat((k + 2) * M);
  for (std::size_t i = 0; i < pat.size(); ++i) pat[i] = 11 * i + 1;
  feed_all(*e, pat);
  auto txt = pat;
  for (std::uint64_t s = 0; s < k + 1; ++s)  // k+1 fully differing slots
    for (std::uint64_t j = 0; j < M; ++j) txt[s * M + j] = 777000 + s * M + j;
  for (const std::uint64_t s : txt) e->feed_text(s);
  REQUIRE(e->query_window(k * M).over_k);
  REQUIRE_FALSE(e->query_window((k + 1) * M).over_k);
  REQUIRE(e->query_window((k + 1) * M).ham == (k + 1) * M);
}

TEST_CASE("short windows answer over threshold rather than failing") {
  auto e = engine(2);
  feed_all(*e, {1, 2, 3, 4});
  e->feed_text(1);
  e->feed_text(2);
  REQUIRE(e->query_window(100).over_k);
  e->feed_text(3);
  e->feed_text(4);
  REQUIRE_FALSE(e->query_window(100).over_k);
}

TEST_CASE("recovery goes stale once the text advances") {
  auto e = engine(2);
  feed_all(*e, {5, 6});
  e->feed_text(5);
  e->feed_text(6);
  REQUIRE_FALSE(e->query_window(2).over_k);
  e->feed_text(9);
  REQUIRE_THROWS_AS(e->recover_mismatches(), Error);
}

TEST_CASE("phase misuse is rejected") {
  auto e = engine(2);
  REQUIRE_THROWS_AS(e->feed_text(9), Error);  // text before the pattern ends
  e->feed_pattern(1);
  e->feed_pattern(2);
  e->end_pattern();
  REQUIRE_THROWS_AS(e->feed_pattern(3), Error);
  REQUIRE_THROWS_AS(e->end_pattern(), Error);
  REQUIRE_THROWS_AS(e->recover_mismatches(), Error);  // no within-query yet
  e->feed_text(1);
  REQUIRE_THROWS_AS(e->query_window(5), Error);  // off the slot boundary
}

TEST_CASE("an empty pattern never matches meaningfully") {
  auto e = engine(3);
  e->end_pattern();
  // queries stay slot-aligned; an empty window reports over-threshold forever
  for (int i = 0; i < 3; ++i) e->feed_text(1);
  REQUIRE(e->query_window(10).over_k);
  for (int i = 0; i < 3; ++i) e->feed_text(2);
  REQUIRE(e->query_window(0).over_k);
}

TEST_CASE("queries agree with the direct count on random streams") {
  std::mt19937_64 rng(0121);
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t M = 1 + rng() % 6;
    const std::uint64_t slots = 1 + rng() % 5;
    auto e = engine(M);
    std::vector<std::uint64_t> pat(M * slots), txt;
    for (auto& s : pat) s = rng() % 5;
    feed_all(*e, pat);
    const std::uint64_t txt_slots = slots + rng() % 4;
    txt.resize(M * txt_slots);
    for (auto& s : txt) s = rng() % 5;
    std::size_t fed = 0;
    for (std::uint64_t b = 0; b < txt_slots; ++b) {
      for (std::uint64_t j = 0; j < M; ++j) e->feed_text(txt[fed++]);
      const std::uint64_t thresh = rng() % (M * slots + 2);
      const auto q = e->query_window(thresh);
      if (fed < pat.size()) {
        REQUIRE(q.over_k);
        continue;
      }
      const std::uint64_t want =
          direct_ham(pat, std::vector<std::uint64_t>(txt.begin(), txt.begin() + fed));
      CAPTURE(M, slots, fed, thresh, want);
      if (want <= thresh) {
        REQUIRE_FALSE(q.over_k);
        REQUIRE(q.ham == want);
      } else {
        REQUIRE(q.over_k);
      }
    }
  }
}
