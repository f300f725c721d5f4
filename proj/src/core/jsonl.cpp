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

#include "jsonl.hpp"

#include <unistd.h>

namespace docqa {

namespace fs = std::filesystem;

JsonlReader::JsonlReader(const fs::path& path) : path_(path), in_(path) {
  if (!in_) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }
}

std::optional<JsonlRecord> JsonlReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      return JsonlRecord{Json::parse(line), line_};
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::kFormat, "malformed JSON at line " + std::to_string(line_) +
                                          " in " + path_.string() + ": " + e.what());
    }
  }
  return std::nullopt;
}

void rethrow_with_line(const FieldError& e, size_t line, const fs::path& path) {
  std::string msg = std::string(e.what()) + " at line " + std::to_string(line);
  if (!e.field().empty()) msg += " (" + e.field() + ")";
  msg += " in " + path.string();
  throw Error(e.code(), msg);
}

AtomicWriter::AtomicWriter(fs::path target) : target_(std::move(target)) {
  if (target_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target_.parent_path(), ec);
  }
  temp_ = target_;
  temp_ += ".tmp." + std::to_string(::getpid());
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) {
    throw Error(ErrorCode::kIo, "cannot write " + target_.string());
  }
}

AtomicWriter::~AtomicWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(temp_, ec);
  }
}

void AtomicWriter::write_line(const Json& value) {
  out_ << value.dump() << '\n';
}

void AtomicWriter::write_bytes(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void AtomicWriter::commit() {
  out_.flush();
  if (!out_) {
    throw Error(ErrorCode::kIo, "write failed for " + target_.string());
  }
  out_.close();
  std::error_code ec;
  fs::rename(temp_, target_, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot rename into " + target_.string() + ": " + ec.message());
  }
  committed_ = true;
}

namespace field {

namespace {

std::string qualify(std::string_view ctx, std::string_view key) {
  if (ctx.empty()) return std::string(key);
  return std::string(ctx) + "." + std::string(key);
}

}  // namespace

const Json& require(const Json& obj, std::string_view key, std::string_view ctx) {
  if (!obj.is_object()) {
    throw FieldError(ErrorCode::kFormat, std::string(ctx), "expected JSON object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw FieldError(ErrorCode::kFormat, qualify(ctx, key), "missing field");
  }
  return *it;
}

std::string string(const Json& obj, std::string_view key, std::string_view ctx) {
  const Json& v = require(obj, key, ctx);
  if (!v.is_string()) {
    throw FieldError(ErrorCode::kFormat, qualify(ctx, key), "expected string");
  }
  return v.get<std::string>();
}

int64_t integer(const Json& obj, std::string_view key, std::string_view ctx) {
  const Json& v = require(obj, key, ctx);
  if (!v.is_number_integer()) {
    throw FieldError(ErrorCode::kFormat, qualify(ctx, key), "expected integer");
  }
  return v.get<int64_t>();
}

double real(const Json& obj, std::string_view key, std::string_view ctx) {
  const Json& v = require(obj, key, ctx);
  if (!v.is_number()) {
    throw FieldError(ErrorCode::kFormat, qualify(ctx, key), "expected number");
  }
  return v.get<double>();
}

const Json& array(const Json& obj, std::string_view key, std::string_view ctx) {
  const Json& v = require(obj, key, ctx);
  if (!v.is_array()) {
    throw FieldError(ErrorCode::kFormat, qualify(ctx, key), "expected array");
  }
  return v;
}

std::pair<size_t, size_t> range(const Json& value, std::string_view ctx) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() ||
      !value[1].is_number_integer() || value[0].get<int64_t>() < 0 ||
      value[1].get<int64_t>() < 0) {
    throw FieldError(ErrorCode::kFormat, std::string(ctx),
                     "expected [start, end] of non-negative integers");
  }
  return {value[0].get<size_t>(), value[1].get<size_t>()};
}

}  // namespace field

}  // namespace docqa
