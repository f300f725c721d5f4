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

#include "weaksup.hpp"

#include <algorithm>

#include "text.hpp"

namespace docqa::weaksup {

std::vector<Range> find_boundary_matches(std::string_view haystack, std::string_view needle) {
  std::vector<Range> out;
  if (needle.empty()) return out;
  size_t pos = haystack.find(needle);
  while (pos != std::string_view::npos) {
    const size_t end = pos + needle.size();
    const char32_t before = text::code_point_before(haystack, pos);
    const char32_t after = text::code_point_at(haystack, end);
    const bool left_ok = pos == 0 || !text::is_word_char(before);
    const bool right_ok = end == haystack.size() || !text::is_word_char(after);
    if (left_ok && right_ok) out.push_back({pos, end});
    pos = haystack.find(needle, pos + 1);
  }
  return out;
}

std::vector<WeakQA> match_record(const StructuredRecord& record, const SourceArticle& article) {
  if (record.entity_id != article.entity_id) {
    throw Error(ErrorCode::kInvalidArgument,
                "record " + record.entity_id + " paired with article " + article.entity_id);
  }
  const std::string haystack = text::normalize(article.text);
  std::vector<WeakQA> out;
  for (size_t i = 0; i < record.fields.size(); ++i) {
    const auto& [key, value] = record.fields[i];
    std::string needle = text::normalize(value);
    if (key.empty() || needle.empty()) continue;
    auto occ = find_boundary_matches(haystack, needle);
    if (occ.empty()) continue;
    WeakQA w;
    w.entity_id = record.entity_id;
    w.field_index = i;
    w.prompt = key;
    w.answer_text = std::move(needle);
    w.occurrences = std::move(occ);
    w.chosen = 0;
    out.push_back(std::move(w));
  }
  return out;
}

Document article_document(const SourceArticle& article) {
  return plain_text_document(article.entity_id,
                             text::split_whitespace(text::normalize(article.text)));
}

std::string qa_id_for(const std::string& entity_id, size_t field_index) {
  return entity_id + "#" + std::to_string(field_index);
}

QAPair weakqa_to_qapair(const WeakQA& weak, const Document& doc) {
  if (doc.pages.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "article document must have exactly one page");
  }
  if (weak.chosen >= weak.occurrences.size()) {
    throw Error(ErrorCode::kInvalidArgument, "chosen occurrence out of range");
  }
  const Page& page = doc.pages.front();
  const Range occ = weak.occurrences[weak.chosen];
  const auto chars = word_char_ranges(page);

  // First word ending after the occurrence start, last word starting before
  // its end.
  auto first = std::find_if(chars.begin(), chars.end(),
                            [&](const Range& r) { return r.end > occ.begin; });
  auto last = std::find_if(chars.rbegin(), chars.rend(),
                           [&](const Range& r) { return r.begin < occ.end; });
  if (occ.empty() || first == chars.end() || last == chars.rend()) {
    throw Error(ErrorCode::kUnalignable, "unalignable span for " + weak.prompt);
  }
  const auto b = static_cast<size_t>(first - chars.begin());
  const auto e = static_cast<size_t>(chars.rend() - last);
  if (e <= b) {
    throw Error(ErrorCode::kUnalignable, "unalignable span for " + weak.prompt);
  }

  QAPair qa;
  qa.qa_id = qa_id_for(weak.entity_id, weak.field_index);
  qa.doc_id = doc.doc_id;
  qa.prompt = weak.prompt;
  qa.gold.push_back(make_span(page, 0, {b, e}, 0.0));
  return qa;
}

StructuredRecord record_from_json(const Json& v) {
  StructuredRecord r;
  r.entity_id = field::string(v, "entity_id", "");
  const Json& fields = field::array(v, "fields", "");
  for (size_t i = 0; i < fields.size(); ++i) {
    const Json& f = fields[i];
    const std::string ctx = "fields[" + std::to_string(i) + "]";
    if (!f.is_array() || f.size() != 2 || !f[0].is_string() || !f[1].is_string()) {
      throw FieldError(ErrorCode::kFormat, ctx, "expected [key, value] strings");
    }
    r.fields.emplace_back(f[0].get<std::string>(), f[1].get<std::string>());
  }
  return r;
}

Json to_json(const StructuredRecord& r) {
  Json fields = Json::array();
  for (const auto& [k, v] : r.fields) fields.push_back(Json::array({k, v}));
  return {{"entity_id", r.entity_id}, {"fields", std::move(fields)}};
}

SourceArticle article_from_json(const Json& v) {
  SourceArticle a;
  a.entity_id = field::string(v, "entity_id", "");
  a.text = field::string(v, "text", "");
  if (text::normalize(a.text).empty()) {
    throw FieldError(ErrorCode::kInvariant, "text", "empty article text");
  }
  return a;
}

Json to_json(const SourceArticle& a) { return {{"entity_id", a.entity_id}, {"text", a.text}}; }

}  // namespace docqa::weaksup
