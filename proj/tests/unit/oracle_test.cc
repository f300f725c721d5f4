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

#include <map>
#include <set>

#include "oracle.hpp"
#include "test_util.hpp"
#include "text.hpp"

namespace docqa::oracle {
namespace {

using decode::Scheme;

mrc::MrcWindow single_window(size_t n_words, std::vector<Range> gold, const std::string& id = "q") {
  const Document d = testing::grid_document("d", testing::numbered_words(n_words));
  QAPair q;
  q.qa_id = id;
  q.doc_id = "d";
  q.prompt = "which one";
  for (Range r : gold) q.gold.push_back(make_span(d.pages[0], 0, r, 0.0));
  auto ws = mrc::build_windows(d, q, mrc::WhitespaceTokenizer(), nullptr);
  REQUIRE(ws.size() == 1);
  return ws[0];
}

TEST_CASE("clean logits decode to the gold spans") {
  const std::vector<Range> gold{{2, 3}, {5, 8}};
  const mrc::MrcWindow w = single_window(12, gold);
  const OracleLogits o = gold_to_logits(w, w.gold, {});
  CHECK(o.corrupted == std::array<size_t, 3>{0, 0, 0});
  for (Scheme s : decode::kSchemes) {
    const auto& m = *o.logits.head(s);
    CHECK(m.rows() == w.context_size());
    const auto spans = decode::extract_spans(decode::viterbi(m, s).labels, s);
    if (s == Scheme::kSe) {
      CHECK(spans == std::vector<Range>{{5, 8}});
    } else {
      CHECK(spans == gold);
    }
  }
}

TEST_CASE("noise is confined to the chosen head and region") {
  const mrc::MrcWindow w = single_window(30, {{10, 14}});
  NoiseSpec noise;
  noise.label_noise = 1.0;
  noise.corrupt_scheme = Scheme::kBioes;
  noise.region = NoiseRegion::kGoldOnly;
  noise.seed = 3;
  const OracleLogits o = gold_to_logits(w, w.gold, noise);
  CHECK(o.corrupted == std::array<size_t, 3>{0, 4, 0});
  const OracleLogits clean = gold_to_logits(w, w.gold, {});
  CHECK(o.logits.head(Scheme::kBio) == clean.logits.head(Scheme::kBio));
  CHECK(o.logits.head(Scheme::kSe) == clean.logits.head(Scheme::kSe));
  const auto& noisy = *o.logits.head(Scheme::kBioes);
  const auto& ref = *clean.logits.head(Scheme::kBioes);
  for (size_t t = 0; t < noisy.rows(); ++t) {
    bool same = true;
    for (size_t c = 0; c < noisy.cols(); ++c) same = same && noisy(t, c) == ref(t, c);
    CHECK(same == (t < 10 || t >= 14));
  }
}

TEST_CASE("noise rate over all tokens") {
  const mrc::MrcWindow w = single_window(400, {});
  NoiseSpec noise;
  noise.label_noise = 0.25;
  size_t total = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    noise.seed = seed;
    total += gold_to_logits(w, w.gold, noise).corrupted[0];
  }
  CHECK(std::abs(static_cast<double>(total) / (20 * 400) - 0.25) < 0.02);
  NoiseSpec bad;
  bad.label_noise = 1.5;
  CHECK_THROWS_AS(gold_to_logits(w, w.gold, bad), Error);
}

TEST_CASE("logits are a function of the seed") {
  const mrc::MrcWindow w = single_window(40, {{4, 6}});
  NoiseSpec noise;
  noise.label_noise = 0.3;
  noise.seed = 11;
  CHECK(gold_to_logits(w, w.gold, noise).logits.heads ==
        gold_to_logits(w, w.gold, noise).logits.heads);
  NoiseSpec other = noise;
  other.seed = 12;
  CHECK(gold_to_logits(w, w.gold, noise).logits.heads !=
        gold_to_logits(w, w.gold, other).logits.heads);
}

TEST_CASE("brute force limits") {
  CHECK_THROWS_AS(brute_force_decode(decode::ScoreMatrix(kBruteForceMaxTokens + 1, 3), Scheme::kBio),
                  Error);
  const auto p = brute_force_decode(decode::ScoreMatrix(kBruteForceMaxTokens, 3), Scheme::kBio);
  CHECK(p.labels.size() == kBruteForceMaxTokens);
}

TEST_CASE("synthetic corpus shape") {
  const SyntheticCorpus c = make_synthetic_corpus(60, 5);
  CHECK(c.records.size() == 60);
  CHECK(c.articles.size() == 60);
  CHECK(c.documents.size() == 60);
  CHECK(c.templates.size() == CorpusShape{}.n_templates);
  std::set<std::string> ids;
  for (const auto& r : c.records) {
    ids.insert(r.entity_id);
    CHECK(r.fields.size() >= 3);
    CHECK(r.fields.size() <= 8);
  }
  CHECK(ids.size() == 60);
  for (const auto& t : c.templates) CHECK_NOTHROW(layout::validate(t));

  const size_t planted = c.planted.size();
  size_t total_fields = 0;
  for (const auto& r : c.records) total_fields += r.fields.size();
  CHECK(planted < total_fields);
  CHECK(static_cast<double>(planted) / static_cast<double>(total_fields) > 0.7);
  CHECK(c.qa.size() == planted);
}

TEST_CASE("planted values sit at their offsets") {
  const SyntheticCorpus c = make_synthetic_corpus(80, 21);
  std::map<std::string, const weaksup::SourceArticle*> articles;
  for (const auto& a : c.articles) articles[a.entity_id] = &a;
  std::map<std::string, const weaksup::StructuredRecord*> records;
  for (const auto& r : c.records) records[r.entity_id] = &r;
  for (const PlantedValue& p : c.planted) {
    const std::string text = text::normalize(articles.at(p.entity_id)->text);
    const std::string& value = records.at(p.entity_id)->fields[p.field_index].second;
    CHECK(text.substr(p.chars.begin, p.chars.size()) == value);
    const auto words = text::split_whitespace(text);
    std::string joined;
    for (size_t t = p.tokens.begin; t < p.tokens.end; ++t) {
      if (t > p.tokens.begin) joined += ' ';
      joined += words[t];
    }
    CHECK(joined == value);
  }
}

TEST_CASE("matching recovers every planted value and nothing else") {
  const SyntheticCorpus c = make_synthetic_corpus(200, 8);
  std::map<std::pair<std::string, size_t>, Range> planted;
  for (const PlantedValue& p : c.planted) planted[{p.entity_id, p.field_index}] = p.chars;
  size_t matched = 0;
  for (size_t i = 0; i < c.records.size(); ++i) {
    for (const weaksup::WeakQA& q : weaksup::match_record(c.records[i], c.articles[i])) {
      auto it = planted.find({q.entity_id, q.field_index});
      REQUIRE(it != planted.end());
      CHECK(q.occurrences == std::vector<Range>{it->second});
      ++matched;
    }
  }
  CHECK(matched == planted.size());
}

TEST_CASE("synthetic corpus is deterministic") {
  const SyntheticCorpus a = make_synthetic_corpus(30, 2);
  const SyntheticCorpus b = make_synthetic_corpus(30, 2);
  CHECK(a.documents == b.documents);
  CHECK(a.qa == b.qa);
  const SyntheticCorpus other = make_synthetic_corpus(30, 3);
  CHECK(a.documents != other.documents);
}

}  // namespace
}  // namespace docqa::oracle
