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

#include <algorithm>

#include "ensemble.hpp"
#include "test_util.hpp"

namespace docqa::ensemble {
namespace {

AnswerSpan scored(const std::string& text, double score, size_t begin = 0) {
  AnswerSpan s;
  s.text = text;
  s.score = score;
  s.token_range = {begin, begin + 1};
  return s;
}

size_t count_of(const std::string& s, const std::string& needle) {
  size_t n = 0;
  for (size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

TEST_CASE("generation input layout") {
  const std::vector<AnswerSpan> one{scored("Obama", 0.0)};
  CHECK(build_gen_input("Who?", one, "Obama won").text ==
        "[CLS] Who? [SEP] Obama [SEP] Obama won [SEP]");

  const std::vector<AnswerSpan> three{scored("first", -0.1), scored("second", -0.3),
                                      scored("third", -0.2)};
  const GenInput in = build_gen_input("q", three, "ctx");
  CHECK(in.spans == std::vector<std::string>{"first", "third", "second"});
  CHECK(in.text == "[CLS] q [SEP] first [SEP] third [SEP] second [SEP] ctx [SEP]");

  const std::vector<AnswerSpan> two{scored("a", -0.2, 4), scored("b", -0.2, 1)};
  const GenInput in2 = build_gen_input("q", two, "c");
  CHECK(count_of(in2.text, "[SEP]") == 4);
  CHECK(in2.spans.front() == "b");

  CHECK_THROWS_AS(build_gen_input("q", {}, "c"), Error);
  const std::vector<AnswerSpan> four(4, scored("x", 0.0));
  CHECK_THROWS_AS(build_gen_input("q", four, "c"), Error);
}

TEST_CASE("stubs") {
  GenInput in;
  in.spans = {"Obarna won", "other"};
  CHECK(EchoGenModel().generate(in) == "Obarna won");
  const DictCorrectionGenModel dict({{"rn", "m"}, {"r", "R"}});
  CHECK(dict.generate(in) == "Obama won");
  CHECK(dict.generate(GenInput{}).empty());
}

Page page_of(size_t n, size_t per_segment) {
  return testing::grid_page(testing::numbered_words(n), per_segment);
}

TEST_CASE("keep probability one is the identity") {
  const Page page = page_of(30, 5);
  const AnswerSpan gold = make_span(page, 0, {10, 13}, 0.0);
  PerturbationConfig cfg;
  cfg.p_keep = 1.0;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Perturbation p = perturb_span(gold, page, {}, cfg, rng);
    CHECK(p.span == gold);
    CHECK(p.applied == PerturbMode::kKeep);
  }
}

TEST_CASE("segment draw replays the seeded sequence") {
  const Page page = page_of(15, 5);
  const AnswerSpan gold = make_span(page, 0, {1, 2}, 0.0);
  PerturbationConfig cfg;
  cfg.p_keep = 0.0;
  cfg.p_shift = 0.0;
  cfg.p_segment = 1.0;
  cfg.p_entity = 0.0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Perturbation p = perturb_span(gold, page, {}, cfg, rng);
    Rng replay(seed);
    replay.uniform();
    replay.uniform();
    const size_t k = replay.below(3);
    CHECK(p.applied == PerturbMode::kSegment);
    CHECK(p.span.token_range == page.segments[k].word_range);
  }
}

TEST_CASE("perturbation support") {
  const Page page = page_of(40, 4);
  const std::vector<AnswerSpan> others{make_span(page, 0, {20, 23}, 0.0),
                                       make_span(page, 0, {30, 31}, 0.0)};
  PerturbationConfig cfg;
  cfg.p_keep = 0.2;
  cfg.p_shift = 0.4;
  cfg.p_segment = 0.3;
  cfg.p_entity = 0.3;
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const size_t b = rng.below(39);
    const AnswerSpan gold = make_span(page, 0, {b, b + 1 + rng.below(std::min<size_t>(4, 39 - b))}, 0.0);
    const Perturbation p = perturb_span(gold, page, others, cfg, rng);
    const Range r = p.span.token_range;
    CHECK(!r.empty());
    CHECK(r.end <= page.words.size());
    CHECK(p.span == make_span(page, 0, r, 0.0));
    switch (p.applied) {
      case PerturbMode::kKeep:
        CHECK(r == gold.token_range);
        break;
      case PerturbMode::kShift:
        CHECK(r != gold.token_range);
        CHECK(std::max(r.begin, gold.token_range.begin) - std::min(r.begin, gold.token_range.begin) <= 3);
        CHECK(std::max(r.end, gold.token_range.end) - std::min(r.end, gold.token_range.end) <= 3);
        break;
      case PerturbMode::kSegment:
        CHECK(std::any_of(page.segments.begin(), page.segments.end(),
                          [&](const Segment& s) { return s.word_range == r; }));
        break;
      case PerturbMode::kEntity:
        CHECK(std::any_of(others.begin(), others.end(),
                          [&](const AnswerSpan& s) { return s.token_range == r; }));
        break;
    }
  }
}

TEST_CASE("entity falls back to segment without other spans") {
  const Page page = page_of(20, 5);
  const AnswerSpan gold = make_span(page, 0, {3, 4}, 0.0);
  PerturbationConfig cfg;
  cfg.p_keep = 0.0;
  cfg.p_shift = 0.0;
  cfg.p_segment = 0.0;
  cfg.p_entity = 1.0;
  Rng rng(4);
  const Perturbation p = perturb_span(gold, page, {}, cfg, rng);
  CHECK(p.drawn == PerturbMode::kEntity);
  CHECK(p.applied == PerturbMode::kSegment);
}

TEST_CASE("default mode frequencies") {
  const Page page = page_of(60, 6);
  const AnswerSpan gold = make_span(page, 0, {30, 33}, 0.0);
  const std::vector<AnswerSpan> others{make_span(page, 0, {10, 12}, 0.0)};
  const PerturbationConfig cfg;
  Rng rng(12345);
  std::map<PerturbMode, size_t> counts;
  const size_t n = 100000;
  for (size_t i = 0; i < n; ++i) ++counts[perturb_span(gold, page, others, cfg, rng).applied];
  auto freq = [&](PerturbMode m) { return static_cast<double>(counts[m]) / n; };
  CHECK(std::abs(freq(PerturbMode::kKeep) - 0.80) <= 0.005);
  CHECK(std::abs(freq(PerturbMode::kShift) - 0.16) <= 0.005);
  CHECK(std::abs(freq(PerturbMode::kSegment) - 0.02) <= 0.005);
  CHECK(std::abs(freq(PerturbMode::kEntity) - 0.02) <= 0.005);
}

TEST_CASE("config validation") {
  PerturbationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p_segment = 0.2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.p_keep = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

QAPair question(const Document& d, const std::string& id, std::vector<Range> spans) {
  QAPair q;
  q.qa_id = id;
  q.doc_id = d.doc_id;
  q.prompt = "what is " + id;
  for (Range r : spans) q.gold.push_back(make_span(d.pages[0], 0, r, 0.0));
  return q;
}

TEST_CASE("training set targets and determinism") {
  const Document d = testing::grid_document("d", testing::numbered_words(50));
  const std::map<std::string, Document> docs{{"d", d}};
  std::vector<QAPair> qa{question(d, "a", {{2, 4}}), question(d, "b", {{10, 11}, {20, 22}}),
                         question(d, "c", {})};
  PerturbationConfig cfg;
  cfg.p_keep = 0.0;
  cfg.seed = 9;
  const GenTrainingSet set = build_gen_training_set(qa, docs, cfg);
  CHECK(set.skipped == 1);
  REQUIRE(set.examples.size() == 3);
  CHECK(set.examples[0].target == "w2 w3");
  CHECK(set.examples[1].target == "w10");
  CHECK(set.examples[2].target == "w20 w21");
  for (const GenExample& e : set.examples) {
    CHECK(e.input.rfind("[CLS] what is ", 0) == 0);
    CHECK(e.mode != PerturbMode::kKeep);
  }
  const GenTrainingSet again = build_gen_training_set(qa, docs, cfg);
  for (size_t i = 0; i < set.examples.size(); ++i) {
    CHECK(to_json(set.examples[i]).dump() == to_json(again.examples[i]).dump());
  }
  // Per-question seeds: order of the corpus does not matter.
  std::reverse(qa.begin(), qa.end());
  const GenTrainingSet reversed = build_gen_training_set(qa, docs, cfg);
  CHECK(to_json(reversed.examples[0]).dump() == to_json(set.examples[1]).dump());
}

TEST_CASE("ensemble inference") {
  const Document d = testing::grid_document("d", testing::numbered_words(20));
  const QAPair q = question(d, "a", {{2, 3}});
  const Page& page = d.pages[0];
  const std::vector<std::vector<AnswerSpan>> models{
      {make_span(page, 0, {4, 5}, -0.4), make_span(page, 0, {2, 3}, -0.1)},
      {make_span(page, 0, {2, 3}, -0.05)},
      {make_span(page, 0, {7, 9}, -0.2)},
  };
  CHECK(ensemble_infer(q, models, d, EchoGenModel()) == "w2");

  struct Capture : GenModel {
    mutable GenInput last;
    std::string generate(const GenInput& in) const override {
      last = in;
      return "x";
    }
  } capture;
  ensemble_infer(q, models, d, capture);
  CHECK(capture.last.spans == std::vector<std::string>{"w2", "w7 w8"});
  ensemble_infer(q, models, d, capture, 1);
  CHECK(capture.last.spans.size() == 1);

  const std::vector<std::vector<AnswerSpan>> none{{}, {}};
  CHECK(ensemble_infer(q, none, d, EchoGenModel()).empty());

  struct Broken : GenModel {
    std::string generate(const GenInput&) const override { throw std::runtime_error("boom"); }
  };
  try {
    ensemble_infer(q, models, d, Broken());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGeneration);
    CHECK(std::string(e.what()).find("for a") != std::string::npos);
  }
}

TEST_CASE("answer fusion") {
  const std::vector<std::string> no_priority;
  CHECK(fuse_answers(std::vector<Candidate>{{"a", 0, "x"}, {"a", 0, "y"}, {"b", 0, "z"}},
                     no_priority) == "a");
  CHECK(fuse_answers(std::vector<Candidate>{{"a", -0.5, "x"}, {"b", -0.1, "y"}}, no_priority) ==
        "b");
  // 2-2 split: a sums to -0.9, B sums to -0.7.
  CHECK(fuse_answers(std::vector<Candidate>{{"a", -0.4, "m1"},
                                            {"B", -0.6, "m2"},
                                            {"a.", -0.5, "m3"},
                                            {"b", -0.1, "m4"}},
                     no_priority) == "b");
  const std::vector<std::string> priority{"gen", "extractor"};
  CHECK(fuse_answers(std::vector<Candidate>{{"a", -0.2, "extractor"}, {"b", -0.2, "gen"}},
                     priority) == "b");
  CHECK(fuse_answers({}, priority).empty());
}

}  // namespace
}  // namespace docqa::ensemble
