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

#include "decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

namespace docqa::decode {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct SpanKey {
  size_t page;
  size_t begin;
  size_t end;
  friend auto operator<=>(const SpanKey&, const SpanKey&) = default;
};

SpanKey key_of(const AnswerSpan& s) { return {s.page, s.token_range.begin, s.token_range.end}; }

// Earlier page, earlier start, shorter.
bool position_less(const AnswerSpan& a, const AnswerSpan& b) {
  return std::tuple(a.page, a.token_range.begin, a.token_range.end) <
         std::tuple(b.page, b.token_range.begin, b.token_range.end);
}

TransitionTable make_table(size_t n, std::initializer_list<std::pair<int, std::vector<int>>> moves,
                           std::vector<int> starts, std::vector<int> ends) {
  std::vector<bool> allowed(n * n, false);
  for (const auto& [from, tos] : moves) {
    for (int to : tos) allowed[static_cast<size_t>(from) * n + static_cast<size_t>(to)] = true;
  }
  std::vector<bool> start(n, false);
  for (int l : starts) start[static_cast<size_t>(l)] = true;
  std::vector<bool> end(n, false);
  for (int l : ends) end[static_cast<size_t>(l)] = true;
  return {n, std::move(allowed), std::move(start), std::move(end)};
}

}  // namespace

size_t label_count(Scheme s) {
  switch (s) {
    case Scheme::kBio: return 3;
    case Scheme::kBioes: return 5;
    case Scheme::kSe: return 3;
  }
  return 0;
}

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kBio: return "bio";
    case Scheme::kBioes: return "bioes";
    case Scheme::kSe: return "se";
  }
  return "";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (Scheme s : kSchemes) {
    if (scheme_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view label_name(Scheme s, int label) {
  static constexpr std::array<std::string_view, 3> bio{"O", "B", "I"};
  static constexpr std::array<std::string_view, 5> bioes{"O", "B", "I", "E", "S"};
  static constexpr std::array<std::string_view, 3> se{"O", "S", "E"};
  const auto i = static_cast<size_t>(label);
  switch (s) {
    case Scheme::kBio: return bio.at(i);
    case Scheme::kBioes: return bioes.at(i);
    case Scheme::kSe: return se.at(i);
  }
  return "";
}

const TransitionTable& TransitionTable::of(Scheme s) {
  static const TransitionTable bio = make_table(
      3, {{kBioO, {kBioO, kBioB}}, {kBioB, {kBioO, kBioB, kBioI}}, {kBioI, {kBioO, kBioB, kBioI}}},
      {kBioO, kBioB}, {kBioO, kBioB, kBioI});
  static const TransitionTable bioes = make_table(
      5,
      {{kBioesO, {kBioesO, kBioesB, kBioesS}},
       {kBioesB, {kBioesI, kBioesE}},
       {kBioesI, {kBioesI, kBioesE}},
       {kBioesE, {kBioesO, kBioesB, kBioesS}},
       {kBioesS, {kBioesO, kBioesB, kBioesS}}},
      {kBioesO, kBioesB, kBioesS}, {kBioesO, kBioesE, kBioesS});
  // O -> E closes a span whose interior is O; an E with no open S is
  // ignored by extract_spans.
  static const TransitionTable se = make_table(
      3, {{kSeO, {kSeO, kSeS, kSeE}}, {kSeS, {kSeO, kSeE}}, {kSeE, {kSeO, kSeS}}},
      {kSeO, kSeS}, {kSeO, kSeS, kSeE});
  switch (s) {
    case Scheme::kBio: return bio;
    case Scheme::kBioes: return bioes;
    case Scheme::kSe: return se;
  }
  return bio;
}

bool TransitionTable::valid(std::span<const int> labels) const {
  if (labels.empty()) return true;
  for (int l : labels) {
    if (l < 0 || static_cast<size_t>(l) >= n_) return false;
  }
  if (!can_start(labels.front()) || !can_end(labels.back())) return false;
  for (size_t t = 1; t < labels.size(); ++t) {
    if (!allowed(labels[t - 1], labels[t])) return false;
  }
  return true;
}

bool ScoreMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ScoreMatrix log_softmax(const ScoreMatrix& logits) {
  ScoreMatrix out(logits.rows(), logits.cols());
  for (size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double lse = m + std::log(z);
    for (size_t c = 0; c < row.size(); ++c) out(r, c) = row[c] - lse;
  }
  return out;
}

double path_score(const ScoreMatrix& log_probs, std::span<const int> labels) {
  double s = 0.0;
  for (size_t t = 0; t < labels.size(); ++t) s += log_probs(t, static_cast<size_t>(labels[t]));
  return s;
}

ViterbiPath viterbi(const ScoreMatrix& logits, const TransitionTable& table) {
  if (logits.empty()) throw Error(ErrorCode::kInvalidArgument, "viterbi on empty logits");
  if (logits.cols() != table.labels()) {
    throw Error(ErrorCode::kInvalidArgument, "logit columns do not match the label set");
  }
  if (!logits.all_finite()) throw Error(ErrorCode::kInvalidArgument, "non-finite logits");

  const ScoreMatrix lp = log_softmax(logits);
  const size_t n = lp.rows();
  const size_t k = lp.cols();
  std::vector<double> delta(k);
  std::vector<double> next(k);
  std::vector<int> back(n * k, -1);

  for (size_t l = 0; l < k; ++l) {
    delta[l] = table.can_start(static_cast<int>(l)) ? lp(0, l) : kNegInf;
  }
  for (size_t t = 1; t < n; ++t) {
    for (size_t l = 0; l < k; ++l) {
      double best = kNegInf;
      int arg = -1;
      for (size_t p = 0; p < k; ++p) {
        if (!table.allowed(static_cast<int>(p), static_cast<int>(l))) continue;
        if (delta[p] == kNegInf) continue;
        if (arg < 0 || delta[p] > best) {
          best = delta[p];
          arg = static_cast<int>(p);
        }
      }
      next[l] = arg < 0 ? kNegInf : best + lp(t, l);
      back[t * k + l] = arg;
    }
    std::swap(delta, next);
  }

  int last = -1;
  for (size_t l = 0; l < k; ++l) {
    if (!table.can_end(static_cast<int>(l)) || delta[l] == kNegInf) continue;
    if (last < 0 || delta[l] > delta[static_cast<size_t>(last)]) last = static_cast<int>(l);
  }
  if (last < 0) throw Error(ErrorCode::kInternal, "no valid label sequence");

  ViterbiPath path;
  path.score = delta[static_cast<size_t>(last)];
  path.labels.assign(n, 0);
  path.labels[n - 1] = last;
  for (size_t t = n - 1; t > 0; --t) {
    path.labels[t - 1] = back[t * k + static_cast<size_t>(path.labels[t])];
  }
  return path;
}

ViterbiPath viterbi(const ScoreMatrix& logits, Scheme scheme) {
  return viterbi(logits, TransitionTable::of(scheme));
}

std::vector<Range> extract_spans(std::span<const int> labels, Scheme scheme) {
  std::vector<Range> out;
  const size_t n = labels.size();
  switch (scheme) {
    case Scheme::kBio: {
      std::optional<size_t> open;
      for (size_t t = 0; t < n; ++t) {
        const int l = labels[t];
        if (l == kBioB) {
          if (open) out.push_back({*open, t});
          open = t;
        } else if (l != kBioI && open) {
          out.push_back({*open, t});
          open.reset();
        }
      }
      if (open) out.push_back({*open, n});
      break;
    }
    case Scheme::kBioes: {
      std::optional<size_t> open;
      for (size_t t = 0; t < n; ++t) {
        const int l = labels[t];
        if (l == kBioesS) {
          out.push_back({t, t + 1});
          open.reset();
        } else if (l == kBioesB) {
          open = t;
        } else if (l == kBioesE) {
          if (open) out.push_back({*open, t + 1});
          open.reset();
        } else if (l != kBioesI) {
          open.reset();
        }
      }
      break;
    }
    case Scheme::kSe: {
      std::optional<size_t> open;
      for (size_t t = 0; t < n; ++t) {
        if (labels[t] == kSeS) {
          open = t;
        } else if (labels[t] == kSeE && open) {
          out.push_back({*open, t + 1});
          open.reset();
        }
      }
      break;
    }
  }
  return out;
}

LabelSeq encode_spans(std::span<const Range> spans, size_t n, Scheme scheme,
                      bool skip_unrepresentable) {
  LabelSeq labels(n, 0);
  size_t prev_end = 0;
  for (const Range& r : spans) {
    if (r.empty() || r.end > n || r.begin < prev_end) {
      throw Error(ErrorCode::kInvalidArgument,
                  "spans must be non-empty, in bounds, sorted and non-overlapping");
    }
    prev_end = r.end;
    switch (scheme) {
      case Scheme::kBio:
        labels[r.begin] = kBioB;
        for (size_t t = r.begin + 1; t < r.end; ++t) labels[t] = kBioI;
        break;
      case Scheme::kBioes:
        if (r.size() == 1) {
          labels[r.begin] = kBioesS;
        } else {
          labels[r.begin] = kBioesB;
          for (size_t t = r.begin + 1; t + 1 < r.end; ++t) labels[t] = kBioesI;
          labels[r.end - 1] = kBioesE;
        }
        break;
      case Scheme::kSe:
        if (r.size() == 1) {
          if (skip_unrepresentable) break;
          throw Error(ErrorCode::kInvalidArgument, "single-token span cannot be encoded in SE");
        }
        labels[r.begin] = kSeS;
        labels[r.end - 1] = kSeE;
        break;
    }
  }
  return labels;
}

std::vector<ScoredRange> decode_head(const ScoreMatrix& logits, Scheme scheme) {
  if (logits.empty()) return {};
  const ViterbiPath path = viterbi(logits, scheme);
  const ScoreMatrix lp = log_softmax(logits);
  std::vector<ScoredRange> out;
  for (const Range& r : extract_spans(path.labels, scheme)) {
    double sum = 0.0;
    for (size_t t = r.begin; t < r.end; ++t) sum += lp(t, static_cast<size_t>(path.labels[t]));
    out.push_back({r, sum / static_cast<double>(r.size())});
  }
  return out;
}

std::vector<AnswerSpan> stitch_windows(std::span<const WindowSpans> windows,
                                       size_t expected_windows, const std::string& qa_id) {
  std::set<size_t> seen;
  for (const WindowSpans& w : windows) {
    if (w.window_index >= expected_windows) {
      throw Error(ErrorCode::kInvalidArgument, "unexpected window " +
                                                   std::to_string(w.window_index) + " for " + qa_id);
    }
    seen.insert(w.window_index);
  }
  if (seen.size() != expected_windows) {
    std::string missing;
    for (size_t i = 0; i < expected_windows; ++i) {
      if (seen.count(i)) continue;
      if (!missing.empty()) missing += ", ";
      missing += std::to_string(i);
    }
    throw Error(ErrorCode::kMissingWindow, "missing windows for " + qa_id + ": " + missing);
  }

  std::map<SpanKey, double> best;
  for (const WindowSpans& w : windows) {
    for (const ScoredRange& s : w.spans) {
      if (s.range.empty() || s.range.end > w.context_map.size()) {
        throw Error(ErrorCode::kInvariant, "span outside window context for " + qa_id);
      }
      const mrc::TokenRef first = w.context_map[s.range.begin];
      const mrc::TokenRef last = w.context_map[s.range.end - 1];
      if (first.page != last.page) continue;
      const SpanKey key{first.page, first.word, last.word + 1};
      auto [it, inserted] = best.emplace(key, s.score);
      if (!inserted) it->second = std::max(it->second, s.score);
    }
  }

  std::vector<AnswerSpan> candidates;
  candidates.reserve(best.size());
  for (const auto& [key, score] : best) {
    AnswerSpan a;
    a.page = key.page;
    a.token_range = {key.begin, key.end};
    a.score = score;
    candidates.push_back(std::move(a));
  }
  std::sort(candidates.begin(), candidates.end(), [](const AnswerSpan& a, const AnswerSpan& b) {
    if (a.score != b.score) return a.score > b.score;
    return position_less(a, b);
  });
  std::vector<AnswerSpan> kept;
  for (AnswerSpan& c : candidates) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const AnswerSpan& k) {
      return k.page == c.page && k.token_range.overlaps(c.token_range);
    });
    if (!clash) kept.push_back(std::move(c));
  }
  std::sort(kept.begin(), kept.end(), position_less);
  return kept;
}

std::vector<AnswerSpan> vote_fuse(std::span<const AnswerSpan> bio,
                                  std::span<const AnswerSpan> bioes,
                                  std::span<const AnswerSpan> se) {
  struct Tally {
    AnswerSpan span;
    int votes = 0;
  };
  std::map<SpanKey, Tally> tally;
  const std::array<std::span<const AnswerSpan>, 3> heads{bio, bioes, se};
  for (const auto& head : heads) {
    std::set<SpanKey> voted;
    for (const AnswerSpan& s : head) {
      const SpanKey key = key_of(s);
      if (!voted.insert(key).second) continue;
      auto [it, inserted] = tally.emplace(key, Tally{s, 0});
      ++it->second.votes;
      if (!inserted && s.score > it->second.span.score) it->second.span.score = s.score;
    }
  }

  std::vector<AnswerSpan> out;
  for (auto& [key, t] : tally) {
    if (t.votes >= 2) out.push_back(t.span);
  }
  if (!out.empty()) return out;

  // Heads are visited in priority order and spans by position, so only a
  // strictly higher score displaces the current winner.
  const AnswerSpan* winner = nullptr;
  for (const auto& head : heads) {
    std::vector<const AnswerSpan*> ordered;
    for (const AnswerSpan& s : head) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const AnswerSpan* a, const AnswerSpan* b) { return position_less(*a, *b); });
    for (const AnswerSpan* s : ordered) {
      if (winner == nullptr || s->score > winner->score) winner = s;
    }
  }
  if (winner) out.push_back(*winner);
  return out;
}

std::optional<AnswerSpan> select_answer(std::span<const AnswerSpan> spans) {
  const AnswerSpan* best = nullptr;
  for (const AnswerSpan& s : spans) {
    if (best == nullptr || s.score > best->score ||
        (s.score == best->score && position_less(s, *best))) {
      best = &s;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

Json to_json(const ScoreMatrix& m) {
  Json rows = Json::array();
  for (size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(Json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

ScoreMatrix matrix_from_json(const Json& v, size_t cols, std::string_view ctx) {
  if (!v.is_array()) throw FieldError(ErrorCode::kFormat, std::string(ctx), "expected matrix");
  ScoreMatrix m(v.size(), cols);
  for (size_t r = 0; r < v.size(); ++r) {
    const Json& row = v[r];
    if (!row.is_array() || row.size() != cols) {
      throw FieldError(ErrorCode::kFormat, std::string(ctx) + "[" + std::to_string(r) + "]",
                       "expected " + std::to_string(cols) + " scores per token");
    }
    for (size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw FieldError(ErrorCode::kFormat, std::string(ctx), "expected numbers");
      }
      m(r, c) = row[c].get<double>();
    }
  }
  if (!m.all_finite()) throw FieldError(ErrorCode::kInvariant, std::string(ctx), "non-finite score");
  return m;
}

Json to_json(const TokenLogits& l) {
  Json out = {{"qa_id", l.qa_id}, {"window_index", l.window_index}};
  for (Scheme s : kSchemes) {
    if (const auto& m = l.head(s)) out[std::string(scheme_name(s))] = to_json(*m);
  }
  return out;
}

TokenLogits logits_from_json(const Json& v) {
  TokenLogits l;
  l.qa_id = field::string(v, "qa_id", "");
  const int64_t idx = field::integer(v, "window_index", "");
  if (idx < 0) throw FieldError(ErrorCode::kFormat, "window_index", "negative window index");
  l.window_index = static_cast<size_t>(idx);
  for (Scheme s : kSchemes) {
    const std::string name(scheme_name(s));
    if (auto it = v.find(name); it != v.end()) {
      l.head(s) = matrix_from_json(*it, label_count(s), name);
    }
  }
  return l;
}

}  // namespace docqa::decode
