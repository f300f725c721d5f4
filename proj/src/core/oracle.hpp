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

// Deterministic stand-ins for the neural parts of the pipeline: logits
// synthesized from gold spans, an exhaustive reference decoder, and a
// synthetic corpus with planted answers.

#ifndef DOCQA_CORE_ORACLE_HPP
#define DOCQA_CORE_ORACLE_HPP

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "decode.hpp"
#include "layout_fill.hpp"
#include "mrc.hpp"
#include "weaksup.hpp"

namespace docqa::oracle {

inline constexpr double kEmissionMargin = 4.0;
inline constexpr size_t kBruteForceMaxTokens = 10;

enum class NoiseRegion { kAllTokens, kGoldOnly };

struct NoiseSpec {
  double label_noise = 0.0;  // per-token corruption probability
  std::optional<decode::Scheme> corrupt_scheme;  // unset = every head
  NoiseRegion region = NoiseRegion::kAllTokens;
  uint64_t seed = 0;

  void validate() const;
};

struct OracleLogits {
  decode::TokenLogits logits;
  std::array<size_t, 3> corrupted{};  // per head
};

// The correct label of every token gets +4.0 and every other label 0.0. A
// corrupted token has that bonus moved to a uniformly chosen wrong label.
// Single-token spans are left as O in the SE head.
OracleLogits gold_to_logits(const mrc::MrcWindow& window, std::span<const Range> spans,
                            const NoiseSpec& noise);

// Exhaustive search over all label sequences. Same tie rule as viterbi:
// among equal scores the sequence that is smallest when compared from the
// last token backwards wins.
decode::ViterbiPath brute_force_decode(const decode::ScoreMatrix& logits, decode::Scheme scheme);

struct PlantedValue {
  std::string entity_id;
  size_t field_index = 0;
  Range chars;   // in the normalized article text
  Range tokens;  // article words
};

struct CorpusShape {
  size_t min_words = 40;
  size_t max_words = 300;
  double long_fraction = 0.1;  // articles of 600-900 words
  size_t min_fields = 3;
  size_t max_fields = 8;
  double plant_rate = 0.85;  // share of fields whose value is planted
  size_t n_templates = 16;
};

struct SyntheticCorpus {
  std::vector<weaksup::StructuredRecord> records;
  std::vector<weaksup::SourceArticle> articles;
  std::vector<layout::LayoutTemplate> templates;
  std::vector<Document> documents;  // article documents
  std::vector<QAPair> qa;           // from planting, not from matching
  std::vector<PlantedValue> planted;
};

SyntheticCorpus make_synthetic_corpus(size_t n_docs, uint64_t seed, const CorpusShape& shape = {});

}  // namespace docqa::oracle

#endif  // DOCQA_CORE_ORACLE_HPP
