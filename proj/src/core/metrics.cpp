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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "text.hpp"

namespace docqa::metrics {

namespace {

const std::vector<std::string> kEmptyGold{""};

std::span<const std::string> or_empty(std::span<const std::string> golds) {
  return golds.empty() ? std::span<const std::string>(kEmptyGold) : golds;
}

std::vector<std::string> answer_tokens(std::string_view s) {
  return text::split_whitespace(answer_normalize(s));
}

double f_measure(double overlap, size_t n_pred, size_t n_gold) {
  if (overlap == 0.0) return 0.0;
  const double p = overlap / static_cast<double>(n_pred);
  const double r = overlap / static_cast<double>(n_gold);
  return 2.0 * p * r / (p + r);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kAnls: return "anls";
    case Metric::kExactMatch: return "em";
    case Metric::kTokenF1: return "f1";
    case Metric::kRougeL: return "rougel";
  }
  return "";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (Metric m : {Metric::kAnls, Metric::kExactMatch, Metric::kTokenF1, Metric::kRougeL}) {
    if (metric_name(m) == name) return m;
  }
  return std::nullopt;
}

std::string anls_normalize(std::string_view s) { return text::normalize(text::lowercase(s)); }

std::string answer_normalize(std::string_view s) {
  std::u32string u = text::to_utf32(text::normalize(text::lowercase(s)));
  auto strip = [](char32_t c) { return text::is_punct(c) || text::is_space(c); };
  size_t b = 0;
  while (b < u.size() && strip(u[b])) ++b;
  size_t e = u.size();
  while (e > b && strip(u[e - 1])) --e;
  return text::to_utf8(std::u32string_view(u).substr(b, e - b));
}

size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<size_t> prev(b.size() + 1);
  std::vector<size_t> cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<size_t> prev(b.size() + 1, 0);
  std::vector<size_t> cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double anls(std::string_view pred, std::span<const std::string> golds, double tau) {
  const std::u32string p = text::to_utf32(anls_normalize(pred));
  double best = 0.0;
  for (const std::string& g : or_empty(golds)) {
    const std::u32string q = text::to_utf32(anls_normalize(g));
    double sim = 1.0;
    if (!p.empty() || !q.empty()) {
      const double nl = static_cast<double>(levenshtein(p, q)) /
                        static_cast<double>(std::max(p.size(), q.size()));
      sim = 1.0 - nl;
    }
    best = std::max(best, sim);
  }
  return best >= tau ? best : 0.0;
}

double exact_match(std::string_view pred, std::span<const std::string> golds) {
  const std::string p = answer_normalize(pred);
  for (const std::string& g : or_empty(golds)) {
    if (answer_normalize(g) == p) return 1.0;
  }
  return 0.0;
}

double token_f1(std::string_view pred, std::span<const std::string> golds) {
  const auto p = answer_tokens(pred);
  double best = 0.0;
  for (const std::string& g : or_empty(golds)) {
    const auto q = answer_tokens(g);
    if (p.empty() || q.empty()) {
      best = std::max(best, p.empty() && q.empty() ? 1.0 : 0.0);
      continue;
    }
    std::unordered_map<std::string, long> counts;
    for (const auto& t : q) ++counts[t];
    double overlap = 0.0;
    for (const auto& t : p) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        overlap += 1.0;
      }
    }
    best = std::max(best, f_measure(overlap, p.size(), q.size()));
  }
  return best;
}

double rouge_l(std::string_view pred, std::span<const std::string> golds) {
  const auto p = answer_tokens(pred);
  double best = 0.0;
  for (const std::string& g : or_empty(golds)) {
    const auto q = answer_tokens(g);
    if (p.empty() || q.empty()) {
      best = std::max(best, p.empty() && q.empty() ? 1.0 : 0.0);
      continue;
    }
    best = std::max(best, f_measure(static_cast<double>(lcs_length(p, q)), p.size(), q.size()));
  }
  return best;
}

double score(Metric m, std::string_view pred, std::span<const std::string> golds) {
  switch (m) {
    case Metric::kAnls: return anls(pred, golds);
    case Metric::kExactMatch: return exact_match(pred, golds);
    case Metric::kTokenF1: return token_f1(pred, golds);
    case Metric::kRougeL: return rouge_l(pred, golds);
  }
  return 0.0;
}

EvalReport evaluate(std::span<const GoldQuestion> qa,
                    const std::map<std::string, std::string>& predictions,
                    std::span<const Metric> metrics) {
  EvalReport report;
  report.metrics.assign(metrics.begin(), metrics.end());
  for (Metric m : metrics) report.aggregates[m] = 0.0;
  for (const GoldQuestion& q : qa) {
    QuestionRow row;
    row.qa_id = q.qa_id;
    row.golds = q.golds;
    if (auto it = predictions.find(q.qa_id); it != predictions.end()) {
      row.prediction = it->second;
      row.answered = true;
    } else {
      ++report.unanswered;
    }
    for (Metric m : metrics) {
      const double s = score(m, row.prediction, row.golds);
      row.scores[m] = s;
      report.aggregates[m] += s;
    }
    report.questions.push_back(std::move(row));
  }
  if (!qa.empty()) {
    for (auto& [m, v] : report.aggregates) v /= static_cast<double>(qa.size());
  }
  return report;
}

Json to_json(const EvalReport& r) {
  Json names = Json::array();
  Json agg = Json::object();
  Json pct = Json::object();
  for (Metric m : r.metrics) {
    const std::string name(metric_name(m));
    names.push_back(name);
    agg[name] = r.aggregates.at(m);
    pct[name] = std::round(r.aggregates.at(m) * 10000.0) / 100.0;
  }
  Json rows = Json::array();
  for (const QuestionRow& q : r.questions) {
    Json scores = Json::object();
    for (const auto& [m, v] : q.scores) scores[std::string(metric_name(m))] = v;
    rows.push_back({{"qa_id", q.qa_id},
                    {"prediction", q.prediction},
                    {"golds", q.golds},
                    {"answered", q.answered},
                    {"scores", std::move(scores)}});
  }
  return {{"count", r.questions.size()},
          {"unanswered", r.unanswered},
          {"metrics", std::move(names)},
          {"aggregates", std::move(agg)},
          {"percent", std::move(pct)},
          {"questions", std::move(rows)}};
}

std::string to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "qa_id,answered";
  for (Metric m : r.metrics) out << ',' << metric_name(m);
  out << '\n';
  out.precision(17);
  for (const QuestionRow& q : r.questions) {
    out << csv_quote(q.qa_id) << ',' << (q.answered ? 1 : 0);
    for (Metric m : r.metrics) out << ',' << q.scores.at(m);
    out << '\n';
  }
  return out.str();
}

}  // namespace docqa::metrics
