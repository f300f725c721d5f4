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

// Answer-quality metrics for document QA.
//
//   ANLS     1 - levenshtein / max(len) on lowercased, whitespace-collapsed
//            code points, zeroed below tau (default 0.5)
//   EM       exact match after lowercasing, whitespace collapsing and
//            stripping leading/trailing punctuation
//   F1       token-overlap F1 on whitespace tokens of the EM normalization
//   ROUGE-L  LCS F-measure (beta = 1) on the same tokens
//
// Each takes the max over the gold answers.

#ifndef DOCQA_CORE_METRICS_HPP
#define DOCQA_CORE_METRICS_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jsonl.hpp"

namespace docqa::metrics {

inline constexpr double kAnlsThreshold = 0.5;

enum class Metric { kAnls, kExactMatch, kTokenF1, kRougeL };

std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view name);

std::string anls_normalize(std::string_view s);
std::string answer_normalize(std::string_view s);

size_t levenshtein(std::u32string_view a, std::u32string_view b);
size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

double anls(std::string_view pred, std::span<const std::string> golds,
            double tau = kAnlsThreshold);
double exact_match(std::string_view pred, std::span<const std::string> golds);
double token_f1(std::string_view pred, std::span<const std::string> golds);
double rouge_l(std::string_view pred, std::span<const std::string> golds);

double score(Metric m, std::string_view pred, std::span<const std::string> golds);

struct QuestionRow {
  std::string qa_id;
  std::string prediction;
  std::vector<std::string> golds;
  bool answered = false;
  std::map<Metric, double> scores;
};

struct EvalReport {
  std::vector<Metric> metrics;
  std::map<Metric, double> aggregates;  // means in [0,1]
  std::vector<QuestionRow> questions;
  size_t unanswered = 0;
};

// Joins predictions to gold QA on qa_id; a missing prediction scores as
// the empty string. Rows follow the order of `qa`.
struct GoldQuestion {
  std::string qa_id;
  std::vector<std::string> golds;
};
EvalReport evaluate(std::span<const GoldQuestion> qa,
                    const std::map<std::string, std::string>& predictions,
                    std::span<const Metric> metrics);

Json to_json(const EvalReport& r);
std::string to_csv(const EvalReport& r);

}  // namespace docqa::metrics

#endif  // DOCQA_CORE_METRICS_HPP
