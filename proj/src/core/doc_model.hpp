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

// OCR-style document model: pages of words with normalized boxes, grouped
// into segments, plus the QA records that point into them.

#ifndef DOCQA_CORE_DOC_MODEL_HPP
#define DOCQA_CORE_DOC_MODEL_HPP

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jsonl.hpp"

namespace docqa {

inline constexpr int kCoordMax = 1000;

// Box in normalized page coordinates [0, 1000]. The all-zero box is the
// sentinel used for plain text and special tokens.
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool is_sentinel() const { return x0 == 0 && y0 == 0 && x1 == 0 && y1 == 0; }
  bool contains(const BBox& o) const {
    return x0 <= o.x0 && y0 <= o.y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }

  friend auto operator<=>(const BBox&, const BBox&) = default;
};

BBox hull(const BBox& a, const BBox& b);

// Half-open [begin, end) interval of word, token or byte indices.
struct Range {
  size_t begin = 0;
  size_t end = 0;

  size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  bool contains(const Range& o) const { return begin <= o.begin && o.end <= end; }
  bool overlaps(const Range& o) const { return begin < o.end && o.begin < end; }

  friend auto operator<=>(const Range&, const Range&) = default;
};

struct Word {
  std::string text;
  BBox box;
  size_t segment_id = 0;

  friend bool operator==(const Word&, const Word&) = default;
};

struct Segment {
  size_t id = 0;
  Range word_range;
  BBox box;  // hull of member word boxes

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Page {
  std::vector<Word> words;  // reading order
  std::vector<Segment> segments;
  int width = 0;
  int height = 0;

  friend bool operator==(const Page&, const Page&) = default;
};

enum class DocSource { kRealOcr, kSynthetic, kPlainText };

std::string_view to_string(DocSource s);
std::optional<DocSource> parse_doc_source(std::string_view s);

struct Document {
  std::string doc_id;
  std::vector<Page> pages;
  DocSource source = DocSource::kRealOcr;

  friend bool operator==(const Document&, const Document&) = default;
};

struct AnswerSpan {
  size_t page = 0;
  Range token_range;
  // Byte range into page_plain_text(page); unset when the page is unknown.
  std::optional<Range> char_range;
  std::string text;
  double score = 0.0;  // log-probability scale; 0 for gold

  friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

struct QAPair {
  std::string qa_id;
  std::string doc_id;
  std::string prompt;
  std::vector<AnswerSpan> gold;  // empty = unanswerable
  std::vector<AnswerSpan> predicted;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

// Words joined by single spaces.
std::string page_plain_text(const Page& page);

// Byte range of every word inside page_plain_text(page).
std::vector<Range> word_char_ranges(const Page& page);

std::string join_words(const Page& page, Range token_range);

// Builds a span with text and char_range derived from the page.
AnswerSpan make_span(const Page& page, size_t page_index, Range token_range, double score);

// Checks that `span` points at valid tokens of `doc` and that its text
// matches; fills char_range. Throws kInvariant on mismatch.
void resolve_span(const Document& doc, AnswerSpan& span);

// Recomputes segment hulls from member words.
void refresh_segment_boxes(Page& page);

// Full invariant check. `ctx` prefixes field names in errors.
void validate(const Document& doc);
void validate_box(const BBox& box, std::string_view ctx);

// A page of words with all-zero boxes, segmented at sentence-final
// punctuation.
Document plain_text_document(std::string doc_id, const std::vector<std::string>& words);

// JSON (one object per line in files).
Json to_json(const BBox& box);
BBox bbox_from_json(const Json& v, std::string_view ctx);
Json to_json(const Document& doc);
Document document_from_json(const Json& v);
Json to_json(const AnswerSpan& span);
AnswerSpan span_from_json(const Json& v, std::string_view ctx);
Json to_json(const QAPair& qa);
QAPair qa_from_json(const Json& v);

// Streams documents in file order; each next() validates one line.
class DocumentReader {
 public:
  explicit DocumentReader(const std::filesystem::path& path) : reader_(path) {}
  std::optional<Document> next();
  size_t line() const { return line_; }

 private:
  JsonlReader reader_;
  size_t line_ = 0;
};

std::vector<Document> load_documents(const std::filesystem::path& path);
std::vector<QAPair> load_qa(const std::filesystem::path& path);

}  // namespace docqa

#endif  // DOCQA_CORE_DOC_MODEL_HPP
