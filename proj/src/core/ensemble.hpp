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

// Understanding -> generation ensembling. Extractive answers are fed as
// candidate spans into a text-to-text model:
//
//   [CLS] question [SEP] span_1 [SEP] ... span_k [SEP] context [SEP]
//
// Training inputs are built from gold spans with random perturbations so
// the generator learns to repair wrong extractive answers.

#ifndef DOCQA_CORE_ENSEMBLE_HPP
#define DOCQA_CORE_ENSEMBLE_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "doc_model.hpp"
#include "rng.hpp"

namespace docqa::ensemble {

inline constexpr size_t kMaxSpans = 3;

struct GenInput {
  std::string question;
  std::vector<std::string> spans;  // score-descending
  std::string context;
  std::string text;
};

class GenModel {
 public:
  virtual ~GenModel() = default;
  virtual std::string generate(const GenInput& input) const = 0;
};

// Returns span_1 verbatim.
class EchoGenModel final : public GenModel {
 public:
  std::string generate(const GenInput& input) const override;
};

// Returns span_1 with configured OCR misreadings replaced, longest match
// first, scanning left to right.
class DictCorrectionGenModel final : public GenModel {
 public:
  explicit DictCorrectionGenModel(std::map<std::string, std::string> corrections);
  std::string generate(const GenInput& input) const override;

 private:
  std::map<std::string, std::string> corrections_;
};

GenInput build_gen_input(const std::string& question, std::span<const AnswerSpan> spans,
                         const std::string& context);

enum class PerturbMode { kKeep, kShift, kSegment, kEntity };
std::string_view mode_name(PerturbMode m);

struct PerturbationConfig {
  double p_keep = 0.80;
  // Split of the perturbed remainder.
  double p_shift = 0.80;
  double p_segment = 0.10;
  double p_entity = 0.10;
  size_t max_shift = 3;
  uint64_t seed = 0;

  void validate() const;
};

struct Perturbation {
  AnswerSpan span;
  PerturbMode drawn = PerturbMode::kKeep;    // mode picked by the draw
  PerturbMode applied = PerturbMode::kKeep;  // after fallbacks
};

// `others` are gold spans of other questions; only those on the same page
// are eligible entity replacements.
Perturbation perturb_span(const AnswerSpan& gold, const Page& page,
                          std::span<const AnswerSpan> others, const PerturbationConfig& cfg,
                          Rng& rng);

struct GenExample {
  std::string qa_id;
  std::string input;
  std::string target;
  PerturbMode mode = PerturbMode::kKeep;
};

struct GenTrainingSet {
  std::vector<GenExample> examples;
  size_t skipped = 0;  // QA pairs without gold
};

// One example per (QA pair, gold span). Each QA pair draws from its own
// stream seeded with seed ^ stable_hash(qa_id).
GenTrainingSet build_gen_training_set(std::span<const QAPair> qa,
                                      const std::map<std::string, Document>& documents,
                                      const PerturbationConfig& cfg);

Json to_json(const GenExample& e);

// Top span of each understanding model, deduplicated by text, capped at
// `span_cap`, run through the generator. Returns "" when no model answered.
std::string ensemble_infer(const QAPair& qa, std::span<const std::vector<AnswerSpan>> per_model,
                           const Document& doc, const GenModel& gen, size_t span_cap = kMaxSpans);

struct Candidate {
  std::string answer;
  double score = 0.0;
  std::string source;
};

// Plurality over normalized answers; ties by summed score, then by the
// best source position in `priority` (unlisted sources rank last).
std::string fuse_answers(std::span<const Candidate> candidates,
                         std::span<const std::string> priority);

}  // namespace docqa::ensemble

#endif  // DOCQA_CORE_ENSEMBLE_HPP
