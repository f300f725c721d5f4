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

// UTF-8 text utilities shared by the matcher and the metrics. Offsets are
// always byte offsets into UTF-8 strings.

#ifndef DOCQA_CORE_TEXT_HPP
#define DOCQA_CORE_TEXT_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace docqa::text {

// Unicode NFC composition.
std::string nfc(std::string_view s);

// NFC, runs of Unicode whitespace collapsed to one ASCII space, ends
// trimmed. Case is preserved.
std::string normalize(std::string_view s);

// Full Unicode lowercase (root locale).
std::string lowercase(std::string_view s);

std::u32string to_utf32(std::string_view s);
std::string to_utf8(std::u32string_view s);

bool is_space(char32_t c);
bool is_punct(char32_t c);
// Letters and digits; matches must not touch these on either side.
bool is_word_char(char32_t c);

// Code point ending right before byte offset `pos` (0 if pos == 0).
char32_t code_point_before(std::string_view s, size_t pos);
// Code point starting at byte offset `pos` (0 if pos == size).
char32_t code_point_at(std::string_view s, size_t pos);

struct CodePoint {
  char32_t value = 0;
  size_t size = 0;  // bytes consumed
};
CodePoint decode_at(std::string_view s, size_t pos);

std::vector<std::string> split_whitespace(std::string_view s);
std::string join(std::span<const std::string> parts, std::string_view sep = " ");

}  // namespace docqa::text

#endif  // DOCQA_CORE_TEXT_HPP
