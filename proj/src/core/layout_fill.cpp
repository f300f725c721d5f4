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

#include "layout_fill.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace docqa::layout {

namespace {

int scale(int coord, int extent) {
  // round-half-up of coord * extent / 1000
  return static_cast<int>((static_cast<long>(coord) * extent + kCoordMax / 2) / kCoordMax);
}

}  // namespace

PixelRect denormalize(const BBox& box, int width, int height) {
  return {scale(box.x0, width), scale(box.y0, height), scale(box.x1, width),
          scale(box.y1, height)};
}

void validate(const LayoutTemplate& tmpl) {
  if (tmpl.template_id.empty()) throw Error(ErrorCode::kInvariant, "empty template_id");
  for (size_t p = 0; p < tmpl.pages.size(); ++p) {
    const TemplatePage& page = tmpl.pages[p];
    const std::string ctx = "pages[" + std::to_string(p) + "]";
    for (size_t s = 0; s < page.slots.size(); ++s) {
      validate_box(page.slots[s], ctx + ".slots[" + std::to_string(s) + "]");
    }
    std::vector<Range> ranges;
    for (const SegmentSlots& m : page.segment_map) ranges.push_back(m.slot_range);
    std::sort(ranges.begin(), ranges.end());
    size_t covered = 0;
    for (const Range& r : ranges) {
      if (r.begin != covered || r.empty()) {
        throw FieldError(ErrorCode::kInvariant, ctx + ".segment_map",
                         "slot ranges must partition the slot list");
      }
      covered = r.end;
    }
    if (covered != page.slots.size()) {
      throw FieldError(ErrorCode::kInvariant, ctx + ".segment_map",
                       "slot ranges must partition the slot list");
    }
  }
}

FilledDocument fill_layout(const std::string& doc_id, std::span<const std::string> words,
                           std::span<const QAPair> qa, const LayoutTemplate& tmpl) {
  if (tmpl.pages.empty() || tmpl.pages.front().slots.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "template " + tmpl.template_id + " has no slots");
  }
  const TemplatePage& tpage = tmpl.pages.front();
  const size_t kept = std::min(words.size(), tpage.slots.size());

  FilledDocument out;
  out.template_id = tmpl.template_id;
  out.dropped_words = words.size() - kept;
  out.document.doc_id = doc_id + "@" + tmpl.template_id;
  out.document.source = DocSource::kSynthetic;

  Page page;
  page.width = tpage.width;
  page.height = tpage.height;
  page.words.resize(kept);
  for (size_t i = 0; i < kept; ++i) {
    page.words[i].text = words[i];
    page.words[i].box = tpage.slots[i];
  }
  std::vector<SegmentSlots> segs(tpage.segment_map.begin(), tpage.segment_map.end());
  std::sort(segs.begin(), segs.end(), [](const SegmentSlots& a, const SegmentSlots& b) {
    return a.slot_range.begin < b.slot_range.begin;
  });
  for (const SegmentSlots& m : segs) {
    if (m.slot_range.begin >= kept) break;
    Segment seg;
    seg.id = m.segment_id;
    seg.word_range = {m.slot_range.begin, std::min(m.slot_range.end, kept)};
    for (size_t i = seg.word_range.begin; i < seg.word_range.end; ++i) {
      page.words[i].segment_id = seg.id;
    }
    page.segments.push_back(seg);
  }
  refresh_segment_boxes(page);
  out.document.pages.push_back(std::move(page));
  const Page& filled = out.document.pages.front();

  for (const QAPair& pair : qa) {
    const bool cut = std::any_of(pair.gold.begin(), pair.gold.end(), [&](const AnswerSpan& s) {
      return s.page != 0 || s.token_range.end > kept;
    });
    if (cut) {
      ++out.dropped_qa;
      continue;
    }
    QAPair moved = pair;
    moved.doc_id = out.document.doc_id;
    for (AnswerSpan& s : moved.gold) {
      s = make_span(filled, 0, s.token_range, s.score);
    }
    out.qa.push_back(std::move(moved));
  }
  return out;
}

Canvas render_page(const Page& page) {
  Canvas canvas(page.width, page.height);
  for (const Word& w : page.words) {
    const PixelRect r = denormalize(w.box, page.width, page.height);
    for (int y = r.y0; y < r.y1; ++y) {
      std::fill_n(canvas.pixels.begin() + static_cast<long>(y) * page.width + r.x0, r.x1 - r.x0,
                  kInk);
    }
  }
  return canvas;
}

Canvas render_canvas(const FilledDocument& doc, size_t page) {
  if (page >= doc.document.pages.size()) {
    throw Error(ErrorCode::kInvalidArgument, "page index out of range");
  }
  return render_page(doc.document.pages[page]);
}

std::string encode_pgm(const Canvas& canvas) {
  std::string out = "P5\n" + std::to_string(canvas.width) + " " + std::to_string(canvas.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(canvas.pixels.data()), canvas.pixels.size());
  return out;
}

Canvas decode_pgm(std::string_view bytes) {
  // Header: magic, width, height, maxval separated by whitespace; comments
  // are not supported.
  size_t pos = 0;
  auto token = [&]() -> std::string_view {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  auto number = [&](std::string_view t) {
    int v = -1;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || v < 0) {
      throw Error(ErrorCode::kFormat, "bad PGM header");
    }
    return v;
  };
  if (token() != "P5") throw Error(ErrorCode::kFormat, "not a binary PGM (P5)");
  const int w = number(token());
  const int h = number(token());
  if (number(token()) != 255) throw Error(ErrorCode::kFormat, "PGM maxval must be 255");
  ++pos;  // single whitespace byte before raster
  const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
  if (bytes.size() < pos + n) throw Error(ErrorCode::kFormat, "truncated PGM raster");
  Canvas c(w, h);
  std::copy_n(bytes.begin() + static_cast<long>(pos), n, c.pixels.begin());
  return c;
}

Json canvas_sidecar(const Document& doc, size_t page) {
  const Page& p = doc.pages.at(page);
  Json words = Json::array();
  for (size_t i = 0; i < p.words.size(); ++i) {
    const PixelRect r = denormalize(p.words[i].box, p.width, p.height);
    words.push_back({{"index", i},
                     {"text", p.words[i].text},
                     {"box", to_json(p.words[i].box)},
                     {"pixel_box", Json::array({r.x0, r.y0, r.x1, r.y1})}});
  }
  return {{"doc_id", doc.doc_id},
          {"page", page},
          {"width", p.width},
          {"height", p.height},
          {"words", std::move(words)}};
}

LayoutTemplate template_from_json(const Json& v) {
  LayoutTemplate t;
  t.template_id = field::string(v, "template_id", "");
  if (auto it = v.find("provenance"); it != v.end() && it->is_string()) {
    t.provenance = it->get<std::string>();
  }
  const Json& pages = field::array(v, "pages", "");
  for (size_t p = 0; p < pages.size(); ++p) {
    const std::string ctx = "pages[" + std::to_string(p) + "]";
    TemplatePage page;
    page.width = static_cast<int>(field::integer(pages[p], "width", ctx));
    page.height = static_cast<int>(field::integer(pages[p], "height", ctx));
    if (page.width <= 0 || page.height <= 0) {
      throw FieldError(ErrorCode::kInvariant, ctx, "template page size must be positive");
    }
    const Json& slots = field::array(pages[p], "slots", ctx);
    for (size_t s = 0; s < slots.size(); ++s) {
      page.slots.push_back(bbox_from_json(slots[s], ctx + ".slots[" + std::to_string(s) + "]"));
    }
    const Json& segs = field::array(pages[p], "segment_map", ctx);
    for (size_t s = 0; s < segs.size(); ++s) {
      const std::string sctx = ctx + ".segment_map[" + std::to_string(s) + "]";
      auto [b, e] = field::range(field::require(segs[s], "slot_range", sctx), sctx + ".slot_range");
      const int64_t id = field::integer(segs[s], "segment_id", sctx);
      if (id < 0) throw FieldError(ErrorCode::kInvariant, sctx, "negative segment id");
      page.segment_map.push_back({{b, e}, static_cast<size_t>(id)});
    }
    t.pages.push_back(std::move(page));
  }
  validate(t);
  return t;
}

Json to_json(const LayoutTemplate& tmpl) {
  Json pages = Json::array();
  for (const TemplatePage& p : tmpl.pages) {
    Json slots = Json::array();
    for (const BBox& b : p.slots) slots.push_back(docqa::to_json(b));
    Json segs = Json::array();
    for (const SegmentSlots& m : p.segment_map) {
      segs.push_back({{"slot_range", Json::array({m.slot_range.begin, m.slot_range.end})},
                      {"segment_id", m.segment_id}});
    }
    pages.push_back({{"width", p.width},
                     {"height", p.height},
                     {"slots", std::move(slots)},
                     {"segment_map", std::move(segs)}});
  }
  return {{"template_id", tmpl.template_id},
          {"provenance", tmpl.provenance},
          {"pages", std::move(pages)}};
}

}  // namespace docqa::layout
