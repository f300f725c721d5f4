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

#include "doc_model.hpp"

#include <algorithm>
#include <map>

namespace docqa {

namespace {

std::string at(std::string_view ctx, std::string_view key) {
  return std::string(ctx) + "." + std::string(key);
}

std::string idx(std::string_view ctx, size_t i) {
  return std::string(ctx) + "[" + std::to_string(i) + "]";
}

[[noreturn]] void invariant(std::string field, const std::string& what) {
  throw FieldError(ErrorCode::kInvariant, std::move(field), what);
}

bool ends_sentence(const std::string& w) {
  if (w.empty()) return false;
  const char c = w.back();
  return c == '.' || c == '!' || c == '?';
}

}  // namespace

BBox hull(const BBox& a, const BBox& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

std::string_view to_string(DocSource s) {
  switch (s) {
    case DocSource::kRealOcr: return "real_ocr";
    case DocSource::kSynthetic: return "synthetic";
    case DocSource::kPlainText: return "plain_text";
  }
  return "real_ocr";
}

std::optional<DocSource> parse_doc_source(std::string_view s) {
  if (s == "real_ocr") return DocSource::kRealOcr;
  if (s == "synthetic") return DocSource::kSynthetic;
  if (s == "plain_text") return DocSource::kPlainText;
  return std::nullopt;
}

std::string page_plain_text(const Page& page) {
  std::string out;
  for (size_t i = 0; i < page.words.size(); ++i) {
    if (i) out.push_back(' ');
    out += page.words[i].text;
  }
  return out;
}

std::vector<Range> word_char_ranges(const Page& page) {
  std::vector<Range> out;
  out.reserve(page.words.size());
  size_t pos = 0;
  for (const Word& w : page.words) {
    out.push_back({pos, pos + w.text.size()});
    pos += w.text.size() + 1;
  }
  return out;
}

std::string join_words(const Page& page, Range token_range) {
  std::string out;
  for (size_t i = token_range.begin; i < token_range.end; ++i) {
    if (i > token_range.begin) out.push_back(' ');
    out += page.words.at(i).text;
  }
  return out;
}

AnswerSpan make_span(const Page& page, size_t page_index, Range token_range, double score) {
  if (token_range.empty() || token_range.end > page.words.size()) {
    throw Error(ErrorCode::kInvariant, "span token range out of bounds");
  }
  const auto chars = word_char_ranges(page);
  AnswerSpan span;
  span.page = page_index;
  span.token_range = token_range;
  span.char_range = Range{chars[token_range.begin].begin, chars[token_range.end - 1].end};
  span.text = join_words(page, token_range);
  span.score = score;
  return span;
}

void resolve_span(const Document& doc, AnswerSpan& span) {
  if (span.page >= doc.pages.size()) {
    invariant("page", "span page out of range in document " + doc.doc_id);
  }
  const Page& page = doc.pages[span.page];
  if (span.token_range.empty() || span.token_range.end > page.words.size()) {
    invariant("token_range", "span token range out of bounds in document " + doc.doc_id);
  }
  AnswerSpan derived = make_span(page, span.page, span.token_range, span.score);
  if (derived.text != span.text) {
    invariant("text", "span text \"" + span.text + "\" does not match words \"" +
                          derived.text + "\" in document " + doc.doc_id);
  }
  span.char_range = derived.char_range;
}

void refresh_segment_boxes(Page& page) {
  for (Segment& seg : page.segments) {
    if (seg.word_range.empty() || seg.word_range.end > page.words.size()) continue;
    BBox box = page.words[seg.word_range.begin].box;
    for (size_t i = seg.word_range.begin + 1; i < seg.word_range.end; ++i) {
      box = hull(box, page.words[i].box);
    }
    seg.box = box;
  }
}

void validate_box(const BBox& box, std::string_view ctx) {
  for (int v : {box.x0, box.y0, box.x1, box.y1}) {
    if (v < 0 || v > kCoordMax) invariant(std::string(ctx), "BBox out of range");
  }
  if (box.x1 < box.x0 || box.y1 < box.y0) invariant(std::string(ctx), "BBox inverted");
}

void validate(const Document& doc) {
  if (doc.doc_id.empty()) invariant("doc_id", "empty doc_id");
  for (size_t p = 0; p < doc.pages.size(); ++p) {
    const Page& page = doc.pages[p];
    const std::string pctx = idx("pages", p);
    if (page.width < 0 || page.height < 0) invariant(pctx, "negative page size");

    std::map<size_t, const Segment*> by_id;
    std::vector<const Segment*> ordered;
    for (size_t s = 0; s < page.segments.size(); ++s) {
      const Segment& seg = page.segments[s];
      const std::string sctx = idx(at(pctx, "segments"), s);
      if (!by_id.emplace(seg.id, &seg).second) invariant(sctx, "duplicate segment id");
      if (seg.word_range.empty() || seg.word_range.end > page.words.size()) {
        invariant(at(sctx, "word_range"), "segment word_range empty or out of bounds");
      }
      ordered.push_back(&seg);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Segment* a, const Segment* b) {
      return a->word_range.begin < b->word_range.begin;
    });
    size_t covered = 0;
    for (const Segment* seg : ordered) {
      if (seg->word_range.begin != covered) {
        invariant(at(pctx, "segments"), "segment ranges must partition the word list");
      }
      covered = seg->word_range.end;
    }
    if (covered != page.words.size()) {
      invariant(at(pctx, "segments"), "segment ranges must partition the word list");
    }

    for (size_t w = 0; w < page.words.size(); ++w) {
      const Word& word = page.words[w];
      const std::string wctx = idx(at(pctx, "words"), w);
      if (word.text.empty()) invariant(at(wctx, "text"), "empty word text");
      if (word.text.find('\n') != std::string::npos) {
        invariant(at(wctx, "text"), "newline in word text");
      }
      validate_box(word.box, at(wctx, "box"));
      if (doc.source == DocSource::kPlainText && !word.box.is_sentinel()) {
        invariant(at(wctx, "box"), "non-zero box in plain_text document");
      }
      auto it = by_id.find(word.segment_id);
      if (it == by_id.end()) invariant(at(wctx, "segment_id"), "unknown segment id");
      const Segment& seg = *it->second;
      if (w < seg.word_range.begin || w >= seg.word_range.end) {
        invariant(at(wctx, "segment_id"), "word outside its segment's word_range");
      }
      if (!seg.box.contains(word.box)) {
        invariant(at(wctx, "box"), "segment box does not contain word box");
      }
    }
  }
}

Document plain_text_document(std::string doc_id, const std::vector<std::string>& words) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.source = DocSource::kPlainText;
  Page page;
  size_t seg_start = 0;
  for (size_t i = 0; i < words.size(); ++i) {
    page.words.push_back({words[i], BBox{}, page.segments.size()});
    if (ends_sentence(words[i]) || i + 1 == words.size()) {
      page.segments.push_back({page.segments.size(), {seg_start, i + 1}, BBox{}});
      seg_start = i + 1;
    }
  }
  doc.pages.push_back(std::move(page));
  return doc;
}

Json to_json(const BBox& box) { return Json::array({box.x0, box.y0, box.x1, box.y1}); }

BBox bbox_from_json(const Json& v, std::string_view ctx) {
  if (!v.is_array() || v.size() != 4) {
    throw FieldError(ErrorCode::kFormat, std::string(ctx), "expected [x0,y0,x1,y1]");
  }
  for (const Json& c : v) {
    if (!c.is_number_integer()) {
      throw FieldError(ErrorCode::kFormat, std::string(ctx), "box coordinates must be integers");
    }
  }
  BBox box{v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>()};
  validate_box(box, ctx);
  return box;
}

Json to_json(const Document& doc) {
  Json pages = Json::array();
  for (const Page& page : doc.pages) {
    Json words = Json::array();
    for (const Word& w : page.words) {
      words.push_back({{"text", w.text}, {"box", to_json(w.box)}, {"segment_id", w.segment_id}});
    }
    Json segs = Json::array();
    for (const Segment& s : page.segments) {
      segs.push_back({{"id", s.id},
                      {"word_range", Json::array({s.word_range.begin, s.word_range.end})}});
    }
    pages.push_back({{"width", page.width},
                     {"height", page.height},
                     {"words", std::move(words)},
                     {"segments", std::move(segs)}});
  }
  return {{"doc_id", doc.doc_id}, {"source", to_string(doc.source)}, {"pages", std::move(pages)}};
}

Document document_from_json(const Json& v) {
  Document doc;
  doc.doc_id = field::string(v, "doc_id", "");
  const std::string source = field::string(v, "source", "");
  auto parsed = parse_doc_source(source);
  if (!parsed) throw FieldError(ErrorCode::kFormat, "source", "unknown source \"" + source + "\"");
  doc.source = *parsed;

  const Json& pages = field::array(v, "pages", "");
  for (size_t p = 0; p < pages.size(); ++p) {
    const std::string pctx = idx("pages", p);
    const Json& pj = pages[p];
    Page page;
    page.width = static_cast<int>(field::integer(pj, "width", pctx));
    page.height = static_cast<int>(field::integer(pj, "height", pctx));
    const Json& words = field::array(pj, "words", pctx);
    for (size_t w = 0; w < words.size(); ++w) {
      const std::string wctx = idx(at(pctx, "words"), w);
      Word word;
      word.text = field::string(words[w], "text", wctx);
      word.box = bbox_from_json(field::require(words[w], "box", wctx), at(wctx, "box"));
      const int64_t sid = field::integer(words[w], "segment_id", wctx);
      if (sid < 0) invariant(at(wctx, "segment_id"), "negative segment id");
      word.segment_id = static_cast<size_t>(sid);
      page.words.push_back(std::move(word));
    }
    const Json& segs = field::array(pj, "segments", pctx);
    for (size_t s = 0; s < segs.size(); ++s) {
      const std::string sctx = idx(at(pctx, "segments"), s);
      Segment seg;
      const int64_t id = field::integer(segs[s], "id", sctx);
      if (id < 0) invariant(at(sctx, "id"), "negative segment id");
      seg.id = static_cast<size_t>(id);
      auto [b, e] = field::range(field::require(segs[s], "word_range", sctx), at(sctx, "word_range"));
      seg.word_range = {b, e};
      page.segments.push_back(seg);
    }
    refresh_segment_boxes(page);
    doc.pages.push_back(std::move(page));
  }
  validate(doc);
  return doc;
}

Json to_json(const AnswerSpan& span) {
  return {{"page", span.page},
          {"token_range", Json::array({span.token_range.begin, span.token_range.end})},
          {"text", span.text},
          {"score", span.score}};
}

AnswerSpan span_from_json(const Json& v, std::string_view ctx) {
  AnswerSpan span;
  const int64_t page = field::integer(v, "page", ctx);
  if (page < 0) invariant(at(ctx, "page"), "negative page index");
  span.page = static_cast<size_t>(page);
  auto [b, e] = field::range(field::require(v, "token_range", ctx), at(ctx, "token_range"));
  if (e <= b) invariant(at(ctx, "token_range"), "span end must exceed start");
  span.token_range = {b, e};
  span.text = field::string(v, "text", ctx);
  span.score = field::real(v, "score", ctx);
  if (auto it = v.find("char_range"); it != v.end()) {
    auto [cb, ce] = field::range(*it, at(ctx, "char_range"));
    span.char_range = Range{cb, ce};
  }
  return span;
}

Json to_json(const QAPair& qa) {
  Json gold = Json::array();
  for (const AnswerSpan& s : qa.gold) gold.push_back(to_json(s));
  return {{"qa_id", qa.qa_id}, {"doc_id", qa.doc_id}, {"prompt", qa.prompt}, {"gold", std::move(gold)}};
}

QAPair qa_from_json(const Json& v) {
  QAPair qa;
  qa.qa_id = field::string(v, "qa_id", "");
  qa.doc_id = field::string(v, "doc_id", "");
  qa.prompt = field::string(v, "prompt", "");
  const Json& gold = field::array(v, "gold", "");
  for (size_t i = 0; i < gold.size(); ++i) {
    qa.gold.push_back(span_from_json(gold[i], idx("gold", i)));
  }
  return qa;
}

std::optional<Document> DocumentReader::next() {
  auto rec = reader_.next();
  if (!rec) return std::nullopt;
  line_ = rec->line;
  try {
    return document_from_json(rec->value);
  } catch (const FieldError& e) {
    rethrow_with_line(e, rec->line, reader_.path());
  }
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  DocumentReader reader(path);
  std::vector<Document> out;
  while (auto doc = reader.next()) out.push_back(std::move(*doc));
  return out;
}

std::vector<QAPair> load_qa(const std::filesystem::path& path) {
  return read_jsonl<QAPair>(path, qa_from_json);
}

}  // namespace docqa
