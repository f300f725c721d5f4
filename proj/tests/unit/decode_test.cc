// Copyright 2026 The docqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <cmath>
#include <limits>

#include "decode.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

namespace docqa::decode {
namespace {

// Transition rules written out independently of TransitionTable.
bool valid_by_rules(const LabelSeq& s, Scheme scheme) {
  auto ok = [&](int from, int to) {
    switch (scheme) {
      case Scheme::kBio:
        return !(from == kBioO && to == kBioI);
      case Scheme::kBioes: {
        const bool inside = from == kBioesB || from == kBioesI;
        const bool continues = to == kBioesI || to == kBioesE;
        return inside == continues;
      }
      case Scheme::kSe:
        if (from == kSeS) return to != kSeS;
        if (from == kSeE) return to != kSeE;
        return true;
    }
    return false;
  };
  if (s.empty()) return false;
  if (scheme == Scheme::kBio && s.front() == kBioI) return false;
  if (scheme == Scheme::kBioes && (s.front() == kBioesI || s.front() == kBioesE)) return false;
  if (scheme == Scheme::kBioes && (s.back() == kBioesB || s.back() == kBioesI)) return false;
  if (scheme == Scheme::kSe && s.front() == kSeE) return false;
  for (size_t t = 1; t < s.size(); ++t) {
    if (!ok(s[t - 1], s[t])) return false;
  }
  return true;
}

struct Best {
  double score = -std::numeric_limits<double>::infinity();
  LabelSeq labels;
  int ties = 0;
};

Best enumerate(const ScoreMatrix& logits, Scheme scheme) {
  const size_t n = logits.rows();
  const size_t k = logits.cols();
  std::vector<double> lp(n * k);
  for (size_t t = 0; t < n; ++t) {
    double z = 0.0;
    double m = logits(t, 0);
    for (size_t c = 1; c < k; ++c) m = std::max(m, logits(t, c));
    for (size_t c = 0; c < k; ++c) z += std::exp(logits(t, c) - m);
    for (size_t c = 0; c < k; ++c) lp[t * k + c] = logits(t, c) - m - std::log(z);
  }
  Best best;
  size_t total = 1;
  for (size_t t = 0; t < n; ++t) total *= k;
  LabelSeq s(n);
  for (size_t code = 0; code < total; ++code) {
    size_t c = code;
    for (size_t t = 0; t < n; ++t) {
      s[t] = static_cast<int>(c % k);
      c /= k;
    }
    if (!valid_by_rules(s, scheme)) continue;
    double score = 0.0;
    for (size_t t = 0; t < n; ++t) score += lp[t * k + static_cast<size_t>(s[t])];
    if (std::abs(score - best.score) <= 1e-12) {
      ++best.ties;
    } else if (score > best.score) {
      best = {score, s, 1};
    }
  }
  return best;
}

ScoreMatrix random_logits(Rng& rng, size_t n, size_t k, double scale = 6.0) {
  ScoreMatrix m(n, k);
  for (size_t t = 0; t < n; ++t) {
    for (size_t c = 0; c < k; ++c) m(t, c) = (rng.uniform() - 0.5) * scale;
  }
  return m;
}

ScoreMatrix favor(const LabelSeq& labels, size_t k, double margin) {
  ScoreMatrix m(labels.size(), k, 0.0);
  for (size_t t = 0; t < labels.size(); ++t) m(t, static_cast<size_t>(labels[t])) = margin;
  return m;
}

TEST_CASE("transition tables match the written rules") {
  for (Scheme s : kSchemes) {
    const auto& table = TransitionTable::of(s);
    const size_t k = label_count(s);
    for (size_t n = 1; n <= 4; ++n) {
      size_t total = 1;
      for (size_t t = 0; t < n; ++t) total *= k;
      for (size_t code = 0; code < total; ++code) {
        LabelSeq seq(n);
        size_t c = code;
        for (size_t t = 0; t < n; ++t, c /= k) seq[t] = static_cast<int>(c % k);
        CHECK(table.valid(seq) == valid_by_rules(seq, s));
      }
    }
  }
}

TEST_CASE("single token favoring O") {
  const auto p = viterbi(favor({kBioO}, 3, 4.0), Scheme::kBio);
  CHECK(p.labels == LabelSeq{kBioO});
}

TEST_CASE("leading I is repaired to the best valid sequence") {
  const ScoreMatrix m = favor({kBioI, kBioI, kBioI}, 3, 8.0);
  const auto p = viterbi(m, Scheme::kBio);
  const Best b = enumerate(m, Scheme::kBio);
  CHECK(p.labels == b.labels);
  CHECK(p.labels.front() != kBioI);
  CHECK(p.score == doctest::Approx(b.score).epsilon(1e-12));
}

TEST_CASE("seeded eight-token BIOES matches enumeration") {
  Rng rng(8);
  const ScoreMatrix m = random_logits(rng, 8, 5);
  const auto p = viterbi(m, Scheme::kBioes);
  const Best b = enumerate(m, Scheme::kBioes);
  CHECK(std::abs(p.score - b.score) <= 1e-9);
  if (b.ties == 1) CHECK(p.labels == b.labels);
}

TEST_CASE("viterbi equals exhaustive search on random logits") {
  Rng rng(2024);
  for (Scheme s : kSchemes) {
    for (int trial = 0; trial < 300; ++trial) {
      const size_t n = 1 + rng.below(7);
      const ScoreMatrix m = random_logits(rng, n, label_count(s));
      const auto p = viterbi(m, s);
      const Best b = enumerate(m, s);
      CHECK(std::abs(p.score - b.score) <= 1e-9);
      CHECK(std::abs(path_score(log_softmax(m), p.labels) - p.score) <= 1e-12);
      CHECK(TransitionTable::of(s).valid(p.labels));
      if (b.ties == 1) CHECK(p.labels == b.labels);
    }
  }
}

TEST_CASE("ties resolve like the reference decoder") {
  // All-equal logits: every valid sequence ties.
  for (Scheme s : kSchemes) {
    for (size_t n = 1; n <= 6; ++n) {
      const ScoreMatrix m(n, label_count(s), 1.0);
      const auto p = viterbi(m, s);
      const auto r = oracle::brute_force_decode(m, s);
      CHECK(p.labels == r.labels);
      CHECK(p.labels == LabelSeq(n, 0));
    }
  }
  // Quantized logits make many partial ties.
  Rng rng(77);
  for (Scheme s : kSchemes) {
    for (int trial = 0; trial < 300; ++trial) {
      const size_t n = 1 + rng.below(6);
      ScoreMatrix m(n, label_count(s));
      for (size_t t = 0; t < n; ++t) {
        for (size_t c = 0; c < m.cols(); ++c) m(t, c) = static_cast<double>(rng.below(2));
      }
      CHECK(viterbi(m, s).labels == oracle::brute_force_decode(m, s).labels);
    }
  }
}

TEST_CASE("extract spans per scheme") {
  CHECK(extract_spans(LabelSeq{kBioO, kBioB, kBioI, kBioO}, Scheme::kBio) ==
        std::vector<Range>{{1, 3}});
  CHECK(extract_spans(LabelSeq{kBioesS, kBioesO, kBioesB, kBioesE}, Scheme::kBioes) ==
        std::vector<Range>{{0, 1}, {2, 4}});
  CHECK(extract_spans(LabelSeq{kSeS, kSeO, kSeE, kSeO, kSeS, kSeE}, Scheme::kSe) ==
        std::vector<Range>{{0, 3}, {4, 6}});
  CHECK(extract_spans(LabelSeq{kSeE, kSeO, kSeS}, Scheme::kSe).empty());
  CHECK(extract_spans(LabelSeq{kBioB, kBioB, kBioI}, Scheme::kBio) ==
        std::vector<Range>{{0, 1}, {1, 3}});
}

// All sorted non-overlapping span sets on n tokens with width >= min_width.
void all_span_sets(size_t n, size_t min_width, size_t from, std::vector<Range>& cur,
                   const std::function<void(const std::vector<Range>&)>& visit) {
  visit(cur);
  for (size_t b = from; b < n; ++b) {
    for (size_t e = b + min_width; e <= n; ++e) {
      cur.push_back({b, e});
      all_span_sets(n, min_width, e, cur, visit);
      cur.pop_back();
    }
  }
}

TEST_CASE("encode then extract is the identity") {
  for (Scheme s : kSchemes) {
    const size_t min_width = s == Scheme::kSe ? 2 : 1;
    for (size_t n = 1; n <= 9; ++n) {
      std::vector<Range> cur;
      size_t count = 0;
      all_span_sets(n, min_width, 0, cur, [&](const std::vector<Range>& spans) {
        const LabelSeq labels = encode_spans(spans, n, s);
        CHECK(TransitionTable::of(s).valid(labels));
        CHECK(extract_spans(labels, s) == spans);
        ++count;
      });
      if (min_width == 1) {
        // F(2n + 1): span sets on n tokens
        size_t a = 0, b = 1;
        for (size_t i = 0; i < 2 * n + 1; ++i) {
          const size_t c = a + b;
          a = b;
          b = c;
        }
        CHECK(count == a);
      }
    }
  }
}

TEST_CASE("single-token spans under SE") {
  const std::vector<Range> spans{{1, 2}, {3, 5}};
  CHECK_THROWS_AS(encode_spans(spans, 6, Scheme::kSe), Error);
  CHECK(extract_spans(encode_spans(spans, 6, Scheme::kSe, true), Scheme::kSe) ==
        std::vector<Range>{{3, 5}});
}

WindowSpans window(size_t index, size_t offset, size_t len, std::vector<ScoredRange> spans) {
  WindowSpans w;
  w.window_index = index;
  for (size_t i = 0; i < len; ++i) w.context_map.push_back({0, offset + i});
  w.spans = std::move(spans);
  return w;
}

TEST_CASE("stitching merges duplicates and resolves overlaps") {
  const std::vector<WindowSpans> dup{window(0, 0, 20, {{{5, 8}, -0.2}}),
                                     window(1, 3, 20, {{{2, 5}, -0.1}})};
  auto out = stitch_windows(dup, 2, "q");
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{5, 8});
  CHECK(out[0].score == -0.1);

  const std::vector<WindowSpans> disjoint{window(0, 0, 10, {{{1, 2}, -0.5}}),
                                          window(1, 10, 10, {{{3, 6}, -0.4}})};
  CHECK(stitch_windows(disjoint, 2, "q").size() == 2);

  const std::vector<WindowSpans> overlap{window(0, 0, 20, {{{5, 9}, -0.3}, {{7, 12}, -0.2}})};
  out = stitch_windows(overlap, 1, "q");
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{7, 12});

  const std::vector<WindowSpans> tie{window(0, 0, 20, {{{5, 9}, -0.3}, {{4, 9}, -0.3}, {{5, 7}, -0.3}})};
  out = stitch_windows(tie, 1, "q");
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{4, 9});
}

TEST_CASE("missing windows are listed") {
  const std::vector<WindowSpans> ws{window(1, 0, 5, {}), window(3, 0, 5, {})};
  try {
    stitch_windows(ws, 5, "q7");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingWindow);
    CHECK(std::string(e.what()) == "missing windows for q7: 0, 2, 4");
  }
}

TEST_CASE("stitching ignores window order") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<WindowSpans> ws;
    const size_t n_windows = 1 + rng.below(5);
    for (size_t k = 0; k < n_windows; ++k) {
      std::vector<ScoredRange> spans;
      for (const Range& r : testing::random_spans(rng, 30, 1, 0.2)) {
        spans.push_back({r, -static_cast<double>(rng.below(8)) / 4.0});
      }
      ws.push_back(window(k, 10 * k, 30, spans));
    }
    const auto forward = stitch_windows(ws, n_windows, "q");
    rng.shuffle(ws.begin(), ws.end());
    CHECK(stitch_windows(ws, n_windows, "q") == forward);
    for (size_t i = 1; i < forward.size(); ++i) {
      CHECK(forward[i - 1].token_range.end <= forward[i].token_range.begin);
    }
  }
}

AnswerSpan span(size_t b, size_t e, double score) {
  AnswerSpan s;
  s.token_range = {b, e};
  s.score = score;
  return s;
}

TEST_CASE("vote fusion") {
  const std::vector<AnswerSpan> bio{span(3, 5, -0.2)};
  const std::vector<AnswerSpan> bioes{span(3, 5, -0.1)};
  const std::vector<AnswerSpan> se{span(2, 5, -0.05)};
  auto out = vote_fuse(bio, bioes, se);
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{3, 5});
  CHECK(out[0].score == -0.1);

  out = vote_fuse(std::vector<AnswerSpan>{span(1, 2, -0.5)},
                  std::vector<AnswerSpan>{span(4, 6, -0.4)},
                  std::vector<AnswerSpan>{span(7, 9, -0.1)});
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{7, 9});

  CHECK(vote_fuse({}, {}, {}).empty());

  // score tie in the fallback goes to BIO
  out = vote_fuse(std::vector<AnswerSpan>{span(6, 7, -0.3)},
                  std::vector<AnswerSpan>{span(1, 2, -0.3)},
                  std::vector<AnswerSpan>{span(2, 4, -0.3)});
  REQUIRE(out.size() == 1);
  CHECK(out[0].token_range == Range{6, 7});
}

TEST_CASE("fused spans have two votes or come alone from the fallback") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    std::array<std::vector<AnswerSpan>, 3> heads;
    for (auto& h : heads) {
      for (const Range& r : testing::random_spans(rng, 8, 1, 0.3)) {
        h.push_back(span(r.begin, r.end, -static_cast<double>(rng.below(5))));
      }
    }
    const auto out = vote_fuse(heads[0], heads[1], heads[2]);
    size_t agreed = 0;
    for (const AnswerSpan& s : out) {
      int votes = 0;
      for (const auto& h : heads) {
        votes += std::any_of(h.begin(), h.end(),
                             [&](const AnswerSpan& x) { return x.token_range == s.token_range; });
      }
      if (votes >= 2) ++agreed;
    }
    const bool any = !heads[0].empty() || !heads[1].empty() || !heads[2].empty();
    CHECK((agreed == out.size() || out.size() == 1));
    CHECK(out.empty() == !any);
  }
}

TEST_CASE("select answer") {
  const std::vector<AnswerSpan> spans{span(5, 6, -0.2), span(1, 2, -0.2), span(3, 4, -0.5)};
  CHECK(select_answer(spans)->token_range == Range{1, 2});
  CHECK(!select_answer({}));
}

TEST_CASE("logits json") {
  TokenLogits l;
  l.qa_id = "q";
  l.window_index = 2;
  Rng rng(1);
  l.head(Scheme::kBio) = random_logits(rng, 4, 3);
  l.head(Scheme::kSe) = random_logits(rng, 4, 3);
  const TokenLogits back = logits_from_json(Json::parse(to_json(l).dump()));
  CHECK(back.head(Scheme::kBio) == l.head(Scheme::kBio));
  CHECK(!back.head(Scheme::kBioes));
  CHECK_THROWS(logits_from_json(Json::parse(R"({"qa_id":"q","window_index":0,"bio":[[1,2]]})")));
}

}  // namespace
}  // namespace docqa::decode
