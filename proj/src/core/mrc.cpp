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

#include "mrc.hpp"

#include <algorithm>

#include "text.hpp"

namespace docqa::mrc {

std::vector<Token> WhitespaceTokenizer::tokenize(std::string_view s) const {
  std::vector<Token> out;
  size_t pos = 0;
  while (pos < s.size()) {
    const text::CodePoint c = text::decode_at(s, pos);
    if (text::is_space(c.value)) {
      pos += c.size;
      continue;
    }
    const size_t start = pos;
    while (pos < s.size()) {
      const text::CodePoint d = text::decode_at(s, pos);
      if (text::is_space(d.value)) break;
      pos += d.size;
    }
    out.push_back({std::string(s.substr(start, pos - start)), {start, pos}});
  }
  return out;
}

size_t MrcWindow::context_size() const {
  return static_cast<size_t>(std::count_if(token_doc_map.begin(), token_doc_map.end(),
                                           [](const auto& r) { return r.has_value(); }));
}

std::vector<TokenRef> MrcWindow::context_map() const {
  std::vector<TokenRef> out;
  for (const auto& r : token_doc_map) {
    if (r) out.push_back(*r);
  }
  return out;
}

std::vector<size_t> window_starts(size_t n_context, size_t budget, size_t stride) {
  if (budget == 0 || stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window budget and stride must be positive");
  }
  std::vector<size_t> starts{0};
  while (starts.back() + budget < n_context) starts.push_back(starts.back() + stride);
  return starts;
}

ContextStream tokenize_document(const Document& doc, const Tokenizer& tok) {
  ContextStream s;
  s.word_tokens.resize(doc.pages.size());
  for (size_t p = 0; p < doc.pages.size(); ++p) {
    const Page& page = doc.pages[p];
    s.word_tokens[p].reserve(page.words.size());
    for (size_t w = 0; w < page.words.size(); ++w) {
      const size_t begin = s.tokens.size();
      for (Token& t : tok.tokenize(page.words[w].text)) {
        s.tokens.push_back(std::move(t.text));
        s.refs.push_back({p, w});
        s.boxes.push_back(page.words[w].box);
      }
      s.word_tokens[p].push_back({begin, s.tokens.size()});
    }
  }
  return s;
}

std::vector<MrcWindow> build_windows(const Document& doc, const QAPair& qa, const Tokenizer& tok,
                                     const layout::Canvas* canvas, const WindowConfig& cfg) {
  const std::vector<Token> prompt = tok.tokenize(qa.prompt);
  if (prompt.size() + kSpecialTokens >= cfg.max_seq) {
    throw Error(ErrorCode::kBudget, "prompt exceeds budget for " + qa.qa_id);
  }
  const size_t budget = cfg.max_seq - kSpecialTokens - prompt.size();
  const ContextStream stream = tokenize_document(doc, tok);
  const size_t n = stream.tokens.size();
  // A stride beyond the budget would leave gaps between windows.
  if (cfg.stride == 0 || (n > budget && cfg.stride > budget)) {
    throw Error(ErrorCode::kInvalidArgument,
                "stride must be in [1, " + std::to_string(budget) + "] for " + qa.qa_id);
  }

  std::vector<Range> gold;
  for (const AnswerSpan& span : qa.gold) {
    if (span.page >= doc.pages.size() || span.token_range.empty() ||
        span.token_range.end > doc.pages[span.page].words.size()) {
      throw Error(ErrorCode::kInvariant, "gold span outside document for " + qa.qa_id);
    }
    const auto& wt = stream.word_tokens[span.page];
    const Range r{wt[span.token_range.begin].begin, wt[span.token_range.end - 1].end};
    if (!r.empty()) gold.push_back(r);
  }

  const TaskId task =
      doc.source == DocSource::kPlainText ? TaskId::kPlainText : TaskId::kDocument;
  Patches patches{};
  if (canvas != nullptr && task == TaskId::kDocument) patches = extract_patches(*canvas);

  std::vector<MrcWindow> out;
  const auto starts = window_starts(n, budget, cfg.stride);
  for (size_t k = 0; k < starts.size(); ++k) {
    const Range chunk{starts[k], std::min(starts[k] + budget, n)};
    MrcWindow w;
    w.qa_id = qa.qa_id;
    w.doc_id = doc.doc_id;
    w.window_index = k;
    w.task_id = task;
    w.context_offset = chunk.begin;
    w.image_patches = patches;

    const size_t total = chunk.size() + prompt.size() + kSpecialTokens;
    w.tokens.reserve(total);
    w.boxes.reserve(total);
    w.token_doc_map.reserve(total);
    auto special = [&w](std::string t) {
      w.tokens.push_back(std::move(t));
      w.boxes.push_back(BBox{});
      w.token_doc_map.push_back(std::nullopt);
    };

    special(kCls);
    for (size_t i = chunk.begin; i < chunk.end; ++i) {
      w.tokens.push_back(stream.tokens[i]);
      w.boxes.push_back(task == TaskId::kPlainText ? BBox{} : stream.boxes[i]);
      w.token_doc_map.push_back(stream.refs[i]);
    }
    special(kSep);
    for (const Token& t : prompt) special(t.text);
    special(kSep);

    for (const Range& g : gold) {
      if (chunk.contains(g)) w.gold.push_back({g.begin - chunk.begin, g.end - chunk.begin});
    }
    w.no_answer = w.gold.empty();
    out.push_back(std::move(w));
  }
  return out;
}

Patches extract_patches(const layout::Canvas& canvas) {
  if (canvas.width < static_cast<int>(kPatchGrid) || canvas.height < static_cast<int>(kPatchGrid)) {
    throw Error(ErrorCode::kInvalidArgument, "canvas smaller than the 7x7 patch grid");
  }
  const int g = static_cast<int>(kPatchGrid);
  const int cw = canvas.width / g;
  const int ch = canvas.height / g;
  Patches out{};
  for (int r = 0; r < g; ++r) {
    const int y0 = r * ch;
    const int y1 = r == g - 1 ? canvas.height : y0 + ch;
    for (int c = 0; c < g; ++c) {
      const int x0 = c * cw;
      const int x1 = c == g - 1 ? canvas.width : x0 + cw;
      uint64_t sum = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += canvas.at(x, y);
      }
      const double count = static_cast<double>(x1 - x0) * (y1 - y0);
      out[static_cast<size_t>(r * g + c)] = static_cast<double>(sum) / (count * 255.0);
    }
  }
  return out;
}

Json to_json(const MrcWindow& w) {
  Json boxes = Json::array();
  for (const BBox& b : w.boxes) boxes.push_back(docqa::to_json(b));
  Json map = Json::array();
  for (const auto& r : w.token_doc_map) {
    map.push_back(r ? Json::array({r->page, r->word}) : Json(nullptr));
  }
  Json gold = Json::array();
  for (const Range& g : w.gold) gold.push_back(Json::array({g.begin, g.end}));
  return {{"qa_id", w.qa_id},
          {"doc_id", w.doc_id},
          {"window_index", w.window_index},
          {"task_id", static_cast<int>(w.task_id)},
          {"context_offset", w.context_offset},
          {"tokens", w.tokens},
          {"boxes", std::move(boxes)},
          {"token_doc_map", std::move(map)},
          {"image_patches", w.image_patches},
          {"gold", std::move(gold)},
          {"no_answer", w.no_answer}};
}

MrcWindow window_from_json(const Json& v) {
  MrcWindow w;
  w.qa_id = field::string(v, "qa_id", "");
  w.doc_id = field::string(v, "doc_id", "");
  w.window_index = static_cast<size_t>(field::integer(v, "window_index", ""));
  const int64_t task = field::integer(v, "task_id", "");
  if (task != 0 && task != 1) throw FieldError(ErrorCode::kFormat, "task_id", "task_id must be 0 or 1");
  w.task_id = static_cast<TaskId>(task);
  w.context_offset = static_cast<size_t>(field::integer(v, "context_offset", ""));
  for (const Json& t : field::array(v, "tokens", "")) {
    if (!t.is_string()) throw FieldError(ErrorCode::kFormat, "tokens", "expected strings");
    w.tokens.push_back(t.get<std::string>());
  }
  const Json& boxes = field::array(v, "boxes", "");
  for (size_t i = 0; i < boxes.size(); ++i) {
    w.boxes.push_back(bbox_from_json(boxes[i], "boxes[" + std::to_string(i) + "]"));
  }
  const Json& map = field::array(v, "token_doc_map", "");
  for (size_t i = 0; i < map.size(); ++i) {
    if (map[i].is_null()) {
      w.token_doc_map.push_back(std::nullopt);
    } else {
      auto [p, word] = field::range(map[i], "token_doc_map[" + std::to_string(i) + "]");
      w.token_doc_map.push_back(TokenRef{p, word});
    }
  }
  if (w.tokens.size() != w.boxes.size() || w.tokens.size() != w.token_doc_map.size()) {
    throw FieldError(ErrorCode::kInvariant, "tokens",
                     "tokens, boxes and token_doc_map lengths differ");
  }
  const Json& patches = field::array(v, "image_patches", "");
  if (patches.size() != kPatchCount) {
    throw FieldError(ErrorCode::kInvariant, "image_patches", "expected 49 patch features");
  }
  for (size_t i = 0; i < kPatchCount; ++i) {
    if (!patches[i].is_number()) {
      throw FieldError(ErrorCode::kFormat, "image_patches", "expected numbers");
    }
    w.image_patches[i] = patches[i].get<double>();
  }
  const Json& gold = field::array(v, "gold", "");
  for (size_t i = 0; i < gold.size(); ++i) {
    auto [b, e] = field::range(gold[i], "gold[" + std::to_string(i) + "]");
    w.gold.push_back({b, e});
  }
  w.no_answer = w.gold.empty();
  return w;
}

}  // namespace docqa::mrc
