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

// JSON Lines streaming and atomic file output.

#ifndef DOCQA_CORE_JSONL_HPP
#define DOCQA_CORE_JSONL_HPP

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace docqa {

using Json = nlohmann::json;

struct JsonlRecord {
  Json value;
  size_t line = 0;  // 1-based
};

// Reads one JSON value per line. Blank lines are skipped but still counted.
class JsonlReader {
 public:
  explicit JsonlReader(const std::filesystem::path& path);

  std::optional<JsonlRecord> next();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  size_t line_ = 0;
};

// Reads every record of `path` through `decode`, re-throwing FieldErrors as
// format errors that carry the path and line number.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path,
                          const std::function<T(const Json&)>& decode);

// Formats "<what> at line N (<field>) in <path>".
[[noreturn]] void rethrow_with_line(const FieldError& e, size_t line,
                                    const std::filesystem::path& path);

// Writes to a sibling temp file; commit() renames it over the target.
// Uncommitted temp files are removed on destruction.
class AtomicWriter {
 public:
  explicit AtomicWriter(std::filesystem::path target);
  ~AtomicWriter();
  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;

  std::ostream& stream() { return out_; }
  void write_line(const Json& value);
  void write_bytes(std::string_view bytes);
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

// Field accessors that report the offending field name.
namespace field {

const Json& require(const Json& obj, std::string_view key, std::string_view ctx);
std::string string(const Json& obj, std::string_view key, std::string_view ctx);
int64_t integer(const Json& obj, std::string_view key, std::string_view ctx);
double real(const Json& obj, std::string_view key, std::string_view ctx);
const Json& array(const Json& obj, std::string_view key, std::string_view ctx);
// [a, b] pair of non-negative integers.
std::pair<size_t, size_t> range(const Json& value, std::string_view ctx);

}  // namespace field

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path,
                          const std::function<T(const Json&)>& decode) {
  JsonlReader reader(path);
  std::vector<T> out;
  while (auto rec = reader.next()) {
    try {
      out.push_back(decode(rec->value));
    } catch (const FieldError& e) {
      rethrow_with_line(e, rec->line, path);
    }
  }
  return out;
}

}  // namespace docqa

#endif  // DOCQA_CORE_JSONL_HPP
