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

// Places article words into word slots harvested from real layouts and
// renders the result to a grayscale canvas.

#ifndef DOCQA_CORE_LAYOUT_FILL_HPP
#define DOCQA_CORE_LAYOUT_FILL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "doc_model.hpp"

namespace docqa::layout {

struct SegmentSlots {
  Range slot_range;
  size_t segment_id = 0;

  friend bool operator==(const SegmentSlots&, const SegmentSlots&) = default;
};

struct TemplatePage {
  int width = 0;
  int height = 0;
  std::vector<BBox> slots;  // reading order
  std::vector<SegmentSlots> segment_map;

  friend bool operator==(const TemplatePage&, const TemplatePage&) = default;
};

struct LayoutTemplate {
  std::string template_id;
  std::vector<TemplatePage> pages;
  std::string provenance;

  friend bool operator==(const LayoutTemplate&, const LayoutTemplate&) = default;
};

struct FilledDocument {
  Document document;  // source = synthetic
  std::vector<QAPair> qa;
  std::string template_id;
  size_t dropped_words = 0;
  size_t dropped_qa = 0;
};

inline constexpr uint8_t kWhite = 255;
inline constexpr uint8_t kInk = 0;

struct Canvas {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major

  Canvas() = default;
  Canvas(int w, int h, uint8_t fill = kWhite)
      : width(w), height(h), pixels(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}

  uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

// Pixel rectangle [x0,x1) x [y0,y1) a normalized box covers on a w x h page.
struct PixelRect {
  int x0, y0, x1, y1;
  long area() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
};
PixelRect denormalize(const BBox& box, int width, int height);

// Fills the first template page with `words`, one per slot. Overflow words
// are dropped along with every QA pair whose gold touches them. `qa` spans
// index into `words` (page 0).
FilledDocument fill_layout(const std::string& doc_id, std::span<const std::string> words,
                           std::span<const QAPair> qa, const LayoutTemplate& tmpl);

Canvas render_canvas(const FilledDocument& doc, size_t page);
Canvas render_page(const Page& page);

// Binary PGM (P5, maxval 255).
std::string encode_pgm(const Canvas& canvas);
Canvas decode_pgm(std::string_view bytes);

// Sidecar describing where each word was drawn.
Json canvas_sidecar(const Document& doc, size_t page);

void validate(const LayoutTemplate& tmpl);
LayoutTemplate template_from_json(const Json& v);
Json to_json(const LayoutTemplate& tmpl);

}  // namespace docqa::layout

#endif  // DOCQA_CORE_LAYOUT_FILL_HPP
