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

// Distant supervision: align key/value records with the article they were
// extracted from and emit one QA pair per value found in the text.

#ifndef DOCQA_CORE_WEAKSUP_HPP
#define DOCQA_CORE_WEAKSUP_HPP

#include <string>
#include <utility>
#include <vector>

#include "doc_model.hpp"

namespace docqa::weaksup {

struct StructuredRecord {
  std::string entity_id;
  std::vector<std::pair<std::string, std::string>> fields;  // (key, value)
};

struct SourceArticle {
  std::string entity_id;
  std::string text;
};

struct WeakQA {
  std::string entity_id;
  size_t field_index = 0;  // position of the key in the record
  std::string prompt;       // the key, verbatim
  std::string answer_text;  // normalized value
  std::vector<Range> occurrences;  // byte ranges in normalize(article.text)
  size_t chosen = 0;
};

// Every occurrence of `needle` in `haystack` that is not flanked by a
// letter or digit. Overlapping matches are all reported.
std::vector<Range> find_boundary_matches(std::string_view haystack, std::string_view needle);

std::vector<WeakQA> match_record(const StructuredRecord& record, const SourceArticle& article);

// The article as a plain-text document: one page, words of the normalized
// text.
Document article_document(const SourceArticle& article);

// Aligns the chosen occurrence with the smallest covering word range.
// `doc` must carry the normalized article text as its single page.
QAPair weakqa_to_qapair(const WeakQA& weak, const Document& doc);

std::string qa_id_for(const std::string& entity_id, size_t field_index);

StructuredRecord record_from_json(const Json& v);
Json to_json(const StructuredRecord& r);
SourceArticle article_from_json(const Json& v);
Json to_json(const SourceArticle& a);

}  // namespace docqa::weaksup

#endif  // DOCQA_CORE_WEAKSUP_HPP
