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

// Multi-scheme span decoding. Each window carries one logit matrix per
// tagging scheme (BIO, BIOES, SE). Every head is decoded independently by
// constrained Viterbi, spans are stitched across sliding windows, and the
// three span sets are fused by a 2-of-3 exact-match vote.
//
// Label orderings (column order in logit matrices):
//   BIO   = O B I
//   BIOES = O B I E S
//   SE    = O S E     (S marks a span's first token, E its last)
//
// SE cannot express single-token spans: a span is an S followed later by
// an E, with O on the interior tokens.

#ifndef DOCQA_CORE_DECODE_HPP
#define DOCQA_CORE_DECODE_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doc_model.hpp"
#include "mrc.hpp"

namespace docqa::decode {

enum class Scheme { kBio = 0, kBioes = 1, kSe = 2 };

inline constexpr std::array<Scheme, 3> kSchemes{Scheme::kBio, Scheme::kBioes, Scheme::kSe};

enum BioLabel : int { kBioO = 0, kBioB = 1, kBioI = 2 };
enum BioesLabel : int { kBioesO = 0, kBioesB = 1, kBioesI = 2, kBioesE = 3, kBioesS = 4 };
enum SeLabel : int { kSeO = 0, kSeS = 1, kSeE = 2 };

size_t label_count(Scheme s);
std::string_view scheme_name(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view name);
std::string_view label_name(Scheme s, int label);

using LabelSeq = std::vector<int>;

class TransitionTable {
 public:
  static const TransitionTable& of(Scheme s);

  TransitionTable(size_t n, std::vector<bool> allowed, std::vector<bool> start,
                  std::vector<bool> end)
      : n_(n), allowed_(std::move(allowed)), start_(std::move(start)), end_(std::move(end)) {}


  size_t labels() const { return n_; }
  bool allowed(int from, int to) const { return allowed_[static_cast<size_t>(from * n_ + to)]; }
  bool can_start(int l) const { return start_[static_cast<size_t>(l)]; }
  bool can_end(int l) const { return end_[static_cast<size_t>(l)]; }
  bool valid(std::span<const int> labels) const;

 private:

  size_t n_;
  std::vector<bool> allowed_;
  std::vector<bool> start_;
  std::vector<bool> end_;
};

// Dense row-major matrix: one row per token, one column per label.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }
  bool all_finite() const;

  friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// Row-wise log-softmax.
ScoreMatrix log_softmax(const ScoreMatrix& logits);

// Sum of log_probs(t, labels[t]) accumulated left to right.
double path_score(const ScoreMatrix& log_probs, std::span<const int> labels);

struct ViterbiPath {
  LabelSeq labels;
  double score = 0.0;  // total log-softmax emission score
};

// Best label sequence under the scheme's start/transition/end constraints.
// Ties resolve toward the lower label index at every backtrack step.
ViterbiPath viterbi(const ScoreMatrix& logits, const TransitionTable& table);
ViterbiPath viterbi(const ScoreMatrix& logits, Scheme scheme);

std::vector<Range> extract_spans(std::span<const int> labels, Scheme scheme);

// Inverse of extract_spans for sorted, non-overlapping spans. Single-token
// spans under SE throw unless `skip_unrepresentable`, in which case they
// are left as O.
LabelSeq encode_spans(std::span<const Range> spans, size_t n, Scheme scheme,
                      bool skip_unrepresentable = false);

struct ScoredRange {
  Range range;
  double score = 0.0;  // mean token log-probability along the path

  friend bool operator==(const ScoredRange&, const ScoredRange&) = default;
};

// Viterbi + extract_spans + span scoring for one head of one window.
std::vector<ScoredRange> decode_head(const ScoreMatrix& logits, Scheme scheme);

struct TokenLogits {
  std::string qa_id;
  size_t window_index = 0;
  std::array<std::optional<ScoreMatrix>, 3> heads;  // indexed by Scheme

  const std::optional<ScoreMatrix>& head(Scheme s) const {
    return heads[static_cast<size_t>(s)];
  }
  std::optional<ScoreMatrix>& head(Scheme s) { return heads[static_cast<size_t>(s)]; }
};

// Window-local spans of one head, with the window's context token map.
struct WindowSpans {
  size_t window_index = 0;
  std::vector<mrc::TokenRef> context_map;
  std::vector<ScoredRange> spans;
};

// Maps window-local spans to document word ranges and resolves duplicates
// (keep max score) and overlaps (keep higher score, then earlier start,
// then shorter). Spans crossing a page boundary are dropped. Output has an
// empty `text`; fill it with the document's words.
std::vector<AnswerSpan> stitch_windows(std::span<const WindowSpans> windows,
                                       size_t expected_windows, const std::string& qa_id);

// Keeps exact ranges predicted by at least two heads (score = max over the
// agreeing heads). Without any such range, falls back to the single best
// span, preferring BIO, then BIOES, then SE on score ties.
std::vector<AnswerSpan> vote_fuse(std::span<const AnswerSpan> bio,
                                  std::span<const AnswerSpan> bioes,
                                  std::span<const AnswerSpan> se);

// Highest score; ties go to the earliest span.
std::optional<AnswerSpan> select_answer(std::span<const AnswerSpan> spans);

Json to_json(const ScoreMatrix& m);
ScoreMatrix matrix_from_json(const Json& v, size_t cols, std::string_view ctx);
Json to_json(const TokenLogits& l);
TokenLogits logits_from_json(const Json& v);

}  // namespace docqa::decode

#endif  // DOCQA_CORE_DECODE_HPP
