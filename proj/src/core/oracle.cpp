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

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "rng.hpp"
#include "text.hpp"

namespace docqa::oracle {

using decode::Scheme;
using decode::ScoreMatrix;

void NoiseSpec::validate() const {
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "label_noise must be in [0,1]");
  }
}

OracleLogits gold_to_logits(const mrc::MrcWindow& window, std::span<const Range> spans,
                            const NoiseSpec& noise) {
  noise.validate();
  const size_t n = window.context_size();
  std::vector<Range> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<bool> in_gold(n, false);
  for (const Range& r : sorted) {
    for (size_t t = r.begin; t < std::min(r.end, n); ++t) in_gold[t] = true;
  }

  Rng rng(mix_seed(noise.seed ^ stable_hash(window.qa_id), window.window_index));
  OracleLogits out;
  out.logits.qa_id = window.qa_id;
  out.logits.window_index = window.window_index;
  for (Scheme s : decode::kSchemes) {
    const size_t k = decode::label_count(s);
    const decode::LabelSeq truth = decode::encode_spans(sorted, n, s, true);
    ScoreMatrix m(n, k, 0.0);
    const bool head_eligible = !noise.corrupt_scheme || *noise.corrupt_scheme == s;
    size_t corrupted = 0;
    for (size_t t = 0; t < n; ++t) {
      auto label = static_cast<size_t>(truth[t]);
      const bool eligible =
          head_eligible && (noise.region == NoiseRegion::kAllTokens || in_gold[t]);
      if (eligible && rng.uniform() < noise.label_noise) {
        size_t wrong = rng.below(k - 1);
        if (wrong >= label) ++wrong;
        label = wrong;
        ++corrupted;
      }
      m(t, label) = kEmissionMargin;
    }
    out.logits.head(s) = std::move(m);
    out.corrupted[static_cast<size_t>(s)] = corrupted;
  }
  return out;
}

decode::ViterbiPath brute_force_decode(const ScoreMatrix& logits, Scheme scheme) {
  const size_t n = logits.rows();
  const size_t k = decode::label_count(scheme);
  if (n > kBruteForceMaxTokens) {
    throw Error(ErrorCode::kInvalidArgument, "brute force decode limited to 10 tokens");
  }
  if (n == 0 || logits.cols() != k) {
    throw Error(ErrorCode::kInvalidArgument, "brute force decode needs a non-empty matrix");
  }
  // Independent log-softmax: log(sum exp) accumulated directly.
  std::vector<double> lp(n * k);
  for (size_t t = 0; t < n; ++t) {
    double m = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < k; ++c) m = std::max(m, logits(t, c));
    double z = 0.0;
    for (size_t c = 0; c < k; ++c) z += std::exp(logits(t, c) - m);
    for (size_t c = 0; c < k; ++c) lp[t * k + c] = logits(t, c) - (m + std::log(z));
  }

  const auto& table = decode::TransitionTable::of(scheme);
  auto later_is_smaller = [](const decode::LabelSeq& a, const decode::LabelSeq& b) {
    for (size_t i = a.size(); i-- > 0;) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  };

  decode::ViterbiPath best;
  bool found = false;
  decode::LabelSeq seq(n, 0);
  while (true) {
    if (table.valid(seq)) {
      double s = 0.0;
      for (size_t t = 0; t < n; ++t) s += lp[t * k + static_cast<size_t>(seq[t])];
      if (!found || s > best.score || (s == best.score && later_is_smaller(seq, best.labels))) {
        best.score = s;
        best.labels = seq;
        found = true;
      }
    }
    // odometer increment
    size_t pos = 0;
    while (pos < n && static_cast<size_t>(++seq[pos]) == k) seq[pos++] = 0;
    if (pos == n) break;
  }
  if (!found) throw Error(ErrorCode::kInternal, "no valid label sequence");
  return best;
}

namespace {

constexpr std::array<const char*, 16> kSyllables{"ba", "ko", "ri", "mu", "te", "sa", "lo", "vi",
                                                 "ne", "du", "ga", "pe", "zo", "ha", "ki", "fu"};

constexpr std::array<const char*, 64> kFiller{
    "the",     "of",      "and",      "in",       "was",      "a",        "to",      "his",
    "her",     "from",    "with",     "for",      "after",    "during",   "early",   "later",
    "career",  "known",   "work",     "years",    "city",     "became",   "first",   "time",
    "public",  "group",   "small",    "large",    "several",  "studied",  "moved",   "joined",
    "returned", "between", "under",   "over",     "new",      "old",      "long",    "short",
    "member",  "history", "region",   "family",   "river",    "school",   "company", "period",
    "national", "local",  "general",  "received", "written",  "served",   "played",  "worked",
    "based",   "major",   "minor",    "western",  "eastern",  "northern", "southern", "central"};

constexpr std::array<const char*, 20> kKeys{
    "birthplace", "age",          "occupation", "nationality", "spouse",
    "alma mater", "founded",      "headquarters", "employer",  "award",
    "genre",      "instrument",   "position",   "team",        "language",
    "capital",    "population",   "currency",   "religion",    "residence"};

std::string unique_word(uint64_t id) {
  // Base-16 syllable encoding of a counter offset to at least 3 syllables;
  // capitalized so it never collides with lowercase filler.
  uint64_t v = id + 256;
  std::string w;
  while (v > 0) {
    w = std::string(kSyllables[v % 16]) + w;
    v /= 16;
  }
  w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

layout::LayoutTemplate make_template(size_t index, Rng& rng) {
  layout::LayoutTemplate t;
  char id[32];
  std::snprintf(id, sizeof id, "tpl-%04zu", index);
  t.template_id = id;
  t.provenance = "synthetic grid";
  layout::TemplatePage page;
  page.width = 140;
  page.height = 180;
  constexpr int kLines = 60;
  constexpr int kTop = 25;
  constexpr int kPitch = 15;
  size_t line_start = 0;
  size_t segment = 0;
  int lines_in_segment = 0;
  int segment_lines = static_cast<int>(rng.between(1, 3));
  for (int line = 0; line < kLines; ++line) {
    const int y = kTop + line * kPitch;
    int x = 30 + static_cast<int>(rng.between(0, 20));
    while (true) {
      const int w = static_cast<int>(rng.between(20, 55));
      if (x + w > 970) break;
      page.slots.push_back({x, y, x + w, y + 10});
      x += w + 6;
    }
    if (++lines_in_segment == segment_lines || line + 1 == kLines) {
      page.segment_map.push_back({{line_start, page.slots.size()}, segment++});
      line_start = page.slots.size();
      lines_in_segment = 0;
      segment_lines = static_cast<int>(rng.between(1, 3));
    }
  }
  t.pages.push_back(std::move(page));
  return t;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(size_t n_docs, uint64_t seed, const CorpusShape& shape) {
  Rng rng(seed);
  SyntheticCorpus c;
  uint64_t next_word = 0;

  for (size_t d = 0; d < n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "ent-%05zu", d);
    weaksup::StructuredRecord record;
    record.entity_id = id;

    const size_t n_fields = static_cast<size_t>(
        rng.between(static_cast<int64_t>(shape.min_fields), static_cast<int64_t>(shape.max_fields)));
    std::vector<size_t> keys(kKeys.size());
    for (size_t i = 0; i < keys.size(); ++i) keys[i] = i;
    rng.shuffle(keys.begin(), keys.end());

    struct Pending {
      size_t field;
      std::vector<std::string> words;
    };
    std::vector<Pending> planted_values;
    for (size_t f = 0; f < n_fields; ++f) {
      std::vector<std::string> words(static_cast<size_t>(rng.between(1, 3)));
      for (auto& w : words) w = unique_word(next_word++);
      std::string value;
      for (size_t i = 0; i < words.size(); ++i) value += (i ? " " : "") + words[i];
      record.fields.emplace_back(kKeys[keys[f]], value);
      if (rng.bernoulli(shape.plant_rate)) planted_values.push_back({f, std::move(words)});
    }

    size_t length = static_cast<size_t>(rng.between(static_cast<int64_t>(shape.min_words),
                                                    static_cast<int64_t>(shape.max_words)));
    if (rng.bernoulli(shape.long_fraction)) length = static_cast<size_t>(rng.between(600, 900));
    size_t value_words = 0;
    for (const auto& p : planted_values) value_words += p.words.size();
    const size_t n_filler = length > value_words + 1 ? length - value_words : 1;

    std::vector<std::string> filler(n_filler);
    size_t until_period = static_cast<size_t>(rng.between(6, 14));
    for (size_t i = 0; i < n_filler; ++i) {
      filler[i] = kFiller[rng.below(kFiller.size())];
      if (--until_period == 0 || i + 1 == n_filler) {
        filler[i] += ".";
        until_period = static_cast<size_t>(rng.between(6, 14));
      }
    }

    // Gap g means "before filler word g"; the final filler is never
    // preceded by a value so every article ends with a sentence.
    std::vector<std::pair<size_t, size_t>> gaps;  // (gap, planted index)
    for (size_t i = 0; i < planted_values.size(); ++i) {
      gaps.emplace_back(static_cast<size_t>(rng.below(n_filler)), i);
    }
    std::sort(gaps.begin(), gaps.end());

    std::vector<std::string> words;
    size_t g = 0;
    for (size_t i = 0; i <= n_filler; ++i) {
      while (g < gaps.size() && gaps[g].first == i) {
        const Pending& p = planted_values[gaps[g].second];
        PlantedValue pv;
        pv.entity_id = record.entity_id;
        pv.field_index = p.field;
        pv.tokens = {words.size(), words.size() + p.words.size()};
        for (const auto& w : p.words) words.push_back(w);
        c.planted.push_back(pv);
        ++g;
      }
      if (i < n_filler) words.push_back(filler[i]);
    }

    // Char offsets of the planted tokens in the single-spaced text.
    std::vector<size_t> starts(words.size());
    size_t pos = 0;
    for (size_t i = 0; i < words.size(); ++i) {
      starts[i] = pos;
      pos += words[i].size() + 1;
    }
    const size_t first_new = c.planted.size() - planted_values.size();
    std::sort(c.planted.begin() + static_cast<long>(first_new), c.planted.end(),
              [](const PlantedValue& a, const PlantedValue& b) { return a.field_index < b.field_index; });

    weaksup::SourceArticle article{record.entity_id, text::join(words)};
    Document doc = plain_text_document(record.entity_id, words);
    for (size_t i = first_new; i < c.planted.size(); ++i) {
      PlantedValue& pv = c.planted[i];
      pv.chars = {starts[pv.tokens.begin],
                  starts[pv.tokens.end - 1] + words[pv.tokens.end - 1].size()};
      QAPair qa;
      qa.qa_id = weaksup::qa_id_for(record.entity_id, pv.field_index);
      qa.doc_id = record.entity_id;
      qa.prompt = record.fields[pv.field_index].first;
      qa.gold.push_back(make_span(doc.pages.front(), 0, pv.tokens, 0.0));
      c.qa.push_back(std::move(qa));
    }

    c.records.push_back(std::move(record));
    c.articles.push_back(std::move(article));
    c.documents.push_back(std::move(doc));
  }

  Rng layout_rng(mix_seed(seed, 0x6c61796f7574ULL));
  for (size_t t = 0; t < std::max<size_t>(1, shape.n_templates); ++t) {
    c.templates.push_back(make_template(t, layout_rng));
  }
  return c;
}

}  // namespace docqa::oracle
