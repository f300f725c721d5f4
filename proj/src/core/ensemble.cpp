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

#include "ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "decode.hpp"
#include "metrics.hpp"

namespace docqa::ensemble {

namespace {

constexpr int kMaxShiftAttempts = 10;

bool score_order(const AnswerSpan& a, const AnswerSpan& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tuple(a.page, a.token_range.begin, a.token_range.end) <
         std::tuple(b.page, b.token_range.begin, b.token_range.end);
}

std::optional<Range> shifted(Range gold, size_t n_words, size_t max_shift, Rng& rng) {
  if (max_shift == 0) return std::nullopt;
  const auto max = static_cast<int64_t>(max_shift);
  for (int attempt = 0; attempt < kMaxShiftAttempts; ++attempt) {
    // 0: start only, 1: end only, 2: both
    const uint64_t which = rng.below(3);
    auto b = static_cast<int64_t>(gold.begin);
    auto e = static_cast<int64_t>(gold.end);
    if (which != 1) {
      const int64_t mag = rng.between(1, max);
      b += rng.below(2) == 0 ? mag : -mag;  // inward : outward
    }
    if (which != 0) {
      const int64_t mag = rng.between(1, max);
      e += rng.below(2) == 0 ? -mag : mag;
    }
    b = std::clamp<int64_t>(b, 0, static_cast<int64_t>(n_words));
    e = std::clamp<int64_t>(e, 0, static_cast<int64_t>(n_words));
    const Range r{static_cast<size_t>(b), static_cast<size_t>(e)};
    if (!r.empty() && r != gold) return r;
  }
  return std::nullopt;
}

std::optional<Range> random_segment(const Page& page, Rng& rng) {
  if (page.segments.empty()) return std::nullopt;
  return page.segments[rng.below(page.segments.size())].word_range;
}

}  // namespace

std::string EchoGenModel::generate(const GenInput& input) const {
  return input.spans.empty() ? std::string() : input.spans.front();
}

DictCorrectionGenModel::DictCorrectionGenModel(std::map<std::string, std::string> corrections)
    : corrections_(std::move(corrections)) {
  corrections_.erase("");
}

std::string DictCorrectionGenModel::generate(const GenInput& input) const {
  if (input.spans.empty()) return {};
  const std::string& src = input.spans.front();
  std::string out;
  size_t pos = 0;
  while (pos < src.size()) {
    const std::pair<const std::string, std::string>* hit = nullptr;
    for (const auto& entry : corrections_) {
      if (src.compare(pos, entry.first.size(), entry.first) == 0 &&
          (hit == nullptr || entry.first.size() > hit->first.size())) {
        hit = &entry;
      }
    }
    if (hit) {
      out += hit->second;
      pos += hit->first.size();
    } else {
      out.push_back(src[pos++]);
    }
  }
  return out;
}

GenInput build_gen_input(const std::string& question, std::span<const AnswerSpan> spans,
                         const std::string& context) {
  if (spans.empty() || spans.size() > kMaxSpans) {
    throw Error(ErrorCode::kInvalidArgument, "generation input needs 1 to 3 spans");
  }
  std::vector<AnswerSpan> ordered(spans.begin(), spans.end());
  std::stable_sort(ordered.begin(), ordered.end(), score_order);

  GenInput in;
  in.question = question;
  in.context = context;
  in.text = "[CLS] " + question + " [SEP] ";
  for (const AnswerSpan& s : ordered) {
    in.spans.push_back(s.text);
    in.text += s.text + " [SEP] ";
  }
  in.text += context + " [SEP]";
  return in;
}

std::string_view mode_name(PerturbMode m) {
  switch (m) {
    case PerturbMode::kKeep: return "keep";
    case PerturbMode::kShift: return "shift";
    case PerturbMode::kSegment: return "segment";
    case PerturbMode::kEntity: return "entity";
  }
  return "keep";
}

void PerturbationConfig::validate() const {
  for (double p : {p_keep, p_shift, p_segment, p_entity}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "perturbation probabilities must be in [0,1]");
    }
  }
  if (std::abs(p_shift + p_segment + p_entity - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "p_shift + p_segment + p_entity must equal 1");
  }
}

Perturbation perturb_span(const AnswerSpan& gold, const Page& page,
                          std::span<const AnswerSpan> others, const PerturbationConfig& cfg,
                          Rng& rng) {
  Perturbation out{gold, PerturbMode::kKeep, PerturbMode::kKeep};
  if (rng.uniform() < cfg.p_keep) return out;

  const double v = rng.uniform();
  if (v < cfg.p_shift) {
    out.drawn = PerturbMode::kShift;
  } else if (v < cfg.p_shift + cfg.p_segment) {
    out.drawn = PerturbMode::kSegment;
  } else {
    out.drawn = PerturbMode::kEntity;
  }

  std::optional<Range> range;
  PerturbMode applied = out.drawn;
  switch (out.drawn) {
    case PerturbMode::kShift:
      range = shifted(gold.token_range, page.words.size(), cfg.max_shift, rng);
      break;
    case PerturbMode::kEntity: {
      std::vector<const AnswerSpan*> pool;
      for (const AnswerSpan& o : others) {
        if (o.page == gold.page && !o.token_range.empty() &&
            o.token_range.end <= page.words.size()) {
          pool.push_back(&o);
        }
      }
      if (!pool.empty()) {
        range = pool[rng.below(pool.size())]->token_range;
        break;
      }
      applied = PerturbMode::kSegment;
      range = random_segment(page, rng);
      break;
    }
    case PerturbMode::kSegment:
      range = random_segment(page, rng);
      break;
    case PerturbMode::kKeep:
      break;
  }
  if (!range) return out;
  out.span = make_span(page, gold.page, *range, gold.score);
  out.applied = applied;
  return out;
}

GenTrainingSet build_gen_training_set(std::span<const QAPair> qa,
                                      const std::map<std::string, Document>& documents,
                                      const PerturbationConfig& cfg) {
  cfg.validate();
  // Gold spans of every question, grouped by document.
  std::map<std::string, std::vector<std::pair<const QAPair*, const AnswerSpan*>>> by_doc;
  for (const QAPair& q : qa) {
    for (const AnswerSpan& g : q.gold) by_doc[q.doc_id].emplace_back(&q, &g);
  }

  GenTrainingSet out;
  for (const QAPair& q : qa) {
    if (q.gold.empty()) {
      ++out.skipped;
      continue;
    }
    auto doc_it = documents.find(q.doc_id);
    if (doc_it == documents.end()) {
      throw Error(ErrorCode::kInvalidArgument, "unknown document " + q.doc_id + " for " + q.qa_id);
    }
    const Document& doc = doc_it->second;
    std::vector<AnswerSpan> others;
    for (const auto& [owner, span] : by_doc[q.doc_id]) {
      if (owner != &q) others.push_back(*span);
    }
    Rng rng(cfg.seed ^ stable_hash(q.qa_id));
    for (const AnswerSpan& g : q.gold) {
      if (g.page >= doc.pages.size()) {
        throw Error(ErrorCode::kInvariant, "gold page out of range for " + q.qa_id);
      }
      const Page& page = doc.pages[g.page];
      const Perturbation p = perturb_span(g, page, others, cfg, rng);
      const GenInput in = build_gen_input(q.prompt, std::span(&p.span, 1), page_plain_text(page));
      out.examples.push_back({q.qa_id, in.text, g.text, p.applied});
    }
  }
  return out;
}

Json to_json(const GenExample& e) {
  return {{"qa_id", e.qa_id}, {"input", e.input}, {"target", e.target}, {"mode", mode_name(e.mode)}};
}

std::string ensemble_infer(const QAPair& qa, std::span<const std::vector<AnswerSpan>> per_model,
                           const Document& doc, const GenModel& gen, size_t span_cap) {
  std::vector<AnswerSpan> tops;
  for (const auto& spans : per_model) {
    auto top = decode::select_answer(spans);
    if (!top) continue;
    auto same = std::find_if(tops.begin(), tops.end(),
                             [&](const AnswerSpan& s) { return s.text == top->text; });
    if (same == tops.end()) {
      tops.push_back(*top);
    } else if (top->score > same->score) {
      *same = *top;
    }
  }
  if (tops.empty()) return {};
  std::stable_sort(tops.begin(), tops.end(), score_order);
  tops.resize(std::min({tops.size(), span_cap, kMaxSpans}));

  const size_t page = tops.front().page;
  const std::string context = page < doc.pages.size() ? page_plain_text(doc.pages[page]) : "";
  const GenInput in = build_gen_input(qa.prompt, tops, context);
  try {
    return gen.generate(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kGeneration, "generation failed for " + qa.qa_id + ": " + e.what());
  }
}

std::string fuse_answers(std::span<const Candidate> candidates,
                         std::span<const std::string> priority) {
  struct Group {
    std::string key;
    const Candidate* best = nullptr;
    size_t votes = 0;
    double sum = 0.0;
    size_t rank = 0;
    size_t first_seen = 0;
  };
  auto rank_of = [&](const std::string& source) {
    auto it = std::find(priority.begin(), priority.end(), source);
    return static_cast<size_t>(it - priority.begin());
  };

  std::vector<Group> groups;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    const std::string key = metrics::answer_normalize(c.answer);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.key == key; });
    if (it == groups.end()) {
      groups.push_back({key, &c, 0, 0.0, rank_of(c.source), i});
      it = groups.end() - 1;
    }
    ++it->votes;
    it->sum += c.score;
    it->rank = std::min(it->rank, rank_of(c.source));
    if (c.score > it->best->score) it->best = &c;
  }
  if (groups.empty()) return {};
  const Group* win = &groups.front();
  for (const Group& g : groups) {
    if (std::tuple(g.votes, g.sum) > std::tuple(win->votes, win->sum) ||
        (g.votes == win->votes && g.sum == win->sum && g.rank < win->rank)) {
      win = &g;
    }
  }
  return win->best->answer;
}

}  // namespace docqa::ensemble
