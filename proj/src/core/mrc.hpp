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

// Model-ready reading-comprehension windows:
//
//   [CLS] context_chunk [SEP] prompt [SEP]   + 7x7 image patch features
//
// Long contexts are split into overlapping chunks that advance by `stride`
// tokens until a chunk reaches the final context token.

#ifndef DOCQA_CORE_MRC_HPP
#define DOCQA_CORE_MRC_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "doc_model.hpp"
#include "layout_fill.hpp"

namespace docqa::mrc {

inline constexpr size_t kDefaultMaxSeq = 512;
inline constexpr size_t kDefaultStride = 128;
inline constexpr size_t kSpecialTokens = 3;  // CLS + 2 x SEP
inline constexpr size_t kPatchGrid = 7;
inline constexpr size_t kPatchCount = kPatchGrid * kPatchGrid;
inline constexpr const char* kCls = "[CLS]";
inline constexpr const char* kSep = "[SEP]";

struct Token {
  std::string text;
  Range chars;  // byte range in the tokenized string
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Tokens in order with non-overlapping, increasing char ranges.
  virtual std::vector<Token> tokenize(std::string_view s) const = 0;
};

// One token per whitespace-separated word.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<Token> tokenize(std::string_view s) const override;
};

struct TokenRef {
  size_t page = 0;
  size_t word = 0;

  friend auto operator<=>(const TokenRef&, const TokenRef&) = default;
};

enum class TaskId : int { kPlainText = 0, kDocument = 1 };

using Patches = std::array<double, kPatchCount>;

struct MrcWindow {
  std::string qa_id;
  std::string doc_id;
  size_t window_index = 0;
  TaskId task_id = TaskId::kDocument;
  size_t context_offset = 0;  // first context token in the document stream
  std::vector<std::string> tokens;
  std::vector<BBox> boxes;
  std::vector<std::optional<TokenRef>> token_doc_map;  // null for non-context
  Patches image_patches{};
  std::vector<Range> gold;  // window-local context token ranges
  bool no_answer = true;

  size_t context_size() const;
  // Context tokens' document references, in order.
  std::vector<TokenRef> context_map() const;

  friend bool operator==(const MrcWindow&, const MrcWindow&) = default;
};

struct WindowConfig {
  size_t max_seq = kDefaultMaxSeq;
  size_t stride = kDefaultStride;
};

// Context chunk starts for n tokens under a per-window budget.
std::vector<size_t> window_starts(size_t n_context, size_t budget, size_t stride);

// Document token stream: every word of every page, tokenized.
struct ContextStream {
  std::vector<std::string> tokens;
  std::vector<TokenRef> refs;
  std::vector<BBox> boxes;
  // Per page, per word: token index range.
  std::vector<std::vector<Range>> word_tokens;
};
ContextStream tokenize_document(const Document& doc, const Tokenizer& tok);

std::vector<MrcWindow> build_windows(const Document& doc, const QAPair& qa, const Tokenizer& tok,
                                     const layout::Canvas* canvas,
                                     const WindowConfig& cfg = {});

// Mean pixel of each cell of a 7x7 grid, in [0,1], row-major. The last
// row and column absorb remainder pixels.
Patches extract_patches(const layout::Canvas& canvas);

Json to_json(const MrcWindow& w);
MrcWindow window_from_json(const Json& v);

}  // namespace docqa::mrc

#endif  // DOCQA_CORE_MRC_HPP
