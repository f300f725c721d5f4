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


// Shared fixtures for the unit tests.

#ifndef DOCQA_TESTS_COMMON_TEST_UTIL_HPP
#define DOCQA_TESTS_COMMON_TEST_UTIL_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doc_model.hpp"
#include "rng.hpp"

namespace docqa::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("docqa-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<std::string> numbered_words(size_t n, const std::string& prefix = "w") {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// One page, one segment per `per_segment` words, boxes laid out in rows.
inline Page grid_page(const std::vector<std::string>& words, size_t per_segment = 5) {
  Page page;
  page.width = 200;
  page.height = 200;
  for (size_t i = 0; i < words.size(); ++i) {
    const int col = static_cast<int>(i % 10);
    const int row = static_cast<int>(i / 10);
    Word w;
    w.text = words[i];
    w.box = {col * 100, row * 20, col * 100 + 90, row * 20 + 15};
    w.segment_id = i / per_segment;
    page.words.push_back(w);
  }
  for (size_t s = 0; s * per_segment < words.size(); ++s) {
    Segment seg;
    seg.id = s;
    seg.word_range = {s * per_segment, std::min(words.size(), (s + 1) * per_segment)};
    page.segments.push_back(seg);
  }
  refresh_segment_boxes(page);
  return page;
}

inline Document grid_document(const std::string& id, const std::vector<std::string>& words,
                              size_t per_segment = 5) {
  Document d;
  d.doc_id = id;
  d.source = DocSource::kRealOcr;
  d.pages.push_back(grid_page(words, per_segment));
  return d;
}

// Random sorted non-overlapping spans on n tokens with width >= min_width.
inline std::vector<Range> random_spans(Rng& rng, size_t n, size_t min_width, double density) {
  std::vector<Range> spans;
  size_t i = 0;
  while (i < n) {
    if (rng.uniform() < density && i + min_width <= n) {
      const size_t room = n - i;
      const size_t w = static_cast<size_t>(rng.between(static_cast<int64_t>(min_width),
                                                       static_cast<int64_t>(std::min<size_t>(room, 6))));
      if (w >= min_width) {
        spans.push_back({i, i + w});
        i += w;
        continue;
      }
    }
    ++i;
  }
  return spans;
}

}  // namespace docqa::testing

#endif  // DOCQA_TESTS_COMMON_TEST_UTIL_HPP
