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

#include "stages.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "layout_fill.hpp"
#include "rng.hpp"
#include "text.hpp"
#include "weaksup.hpp"

namespace docqa::stages {

namespace {

std::mutex g_log_mu;
LogSink g_log_sink;

template <typename T>
std::vector<T> read_all(const fs::path& path, T (*decode)(const Json&)) {
  return read_jsonl<T>(path, std::function<T(const Json&)>(decode));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json read_json_file(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kFormat, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& v) {
  AtomicWriter w(path);
  w.stream() << v.dump(2) << '\n';
  w.commit();
}

std::string page_image_stem(const std::string& doc_id, size_t page) {
  return doc_id + ".p" + std::to_string(page);
}

Json answer_json(const AnswerSpan& s) {
  return {{"page", s.page},
          {"token_range", Json::array({s.token_range.begin, s.token_range.end})},
          {"text", s.text},
          {"score", s.score}};
}

Json spans_json(const std::vector<AnswerSpan>& spans) {
  Json out = Json::array();
  for (const AnswerSpan& s : spans) out.push_back(answer_json(s));
  return out;
}

// Word text for every (page, word) seen in a question's windows. Tokens of
// the same word are concatenated in order.
std::map<mrc::TokenRef, std::string> window_words(const std::vector<const mrc::MrcWindow*>& ws) {
  std::map<mrc::TokenRef, std::string> words;
  for (const mrc::MrcWindow* w : ws) {
    std::map<mrc::TokenRef, std::string> local;
    for (size_t i = 0; i < w->tokens.size(); ++i) {
      if (w->token_doc_map[i]) local[*w->token_doc_map[i]] += w->tokens[i];
    }
    for (auto& [ref, text] : local) words.emplace(ref, std::move(text));
  }
  return words;
}

void fill_text(std::vector<AnswerSpan>& spans, const std::map<mrc::TokenRef, std::string>& words) {
  for (AnswerSpan& s : spans) {
    std::vector<std::string> parts;
    for (size_t i = s.token_range.begin; i < s.token_range.end; ++i) {
      auto it = words.find({s.page, i});
      if (it != words.end()) parts.push_back(it->second);
    }
    s.text = text::join(parts);
  }
}

// "answer" as a prediction string: a span object, a plain string, or null.
std::optional<std::string> answer_text(const Json& v, size_t line, const fs::path& path) {
  auto it = v.find("answer");
  if (it == v.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_object()) {
    if (auto t = it->find("text"); t != it->end() && t->is_string()) return t->get<std::string>();
  }
  throw Error(ErrorCode::kFormat, "answer must be a string, a span or null at line " +
                                      std::to_string(line) + " in " + path.string());
}

std::string line_context(size_t line, const fs::path& path) {
  return " at line " + std::to_string(line) + " in " + path.string();
}

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard<std::mutex> lock(g_log_mu);
  g_log_sink = std::move(sink);
}

void log(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_log_mu);
  if (g_log_sink) {
    g_log_sink(message);
  } else {
    std::cerr << message << '\n';
  }
}

GenWeakSummary gen_weak(const GenWeakOptions& o) {
  const auto records = read_all(o.records, &weaksup::record_from_json);
  const auto articles = read_all(o.articles, &weaksup::article_from_json);
  std::unordered_map<std::string, const weaksup::SourceArticle*> by_entity;
  for (const auto& a : articles) {
    if (!by_entity.emplace(a.entity_id, &a).second) {
      throw Error(ErrorCode::kFormat,
                  "duplicate entity_id " + a.entity_id + " in " + o.articles.string());
    }
  }

  GenWeakSummary sum;
  AtomicWriter out(o.out_qa);
  std::unordered_map<std::string, Document> docs;
  for (const auto& r : records) {
    ++sum.records;
    auto it = by_entity.find(r.entity_id);
    if (it == by_entity.end()) {
      ++sum.missing_articles;
      continue;
    }
    auto doc_it = docs.find(r.entity_id);
    if (doc_it == docs.end()) {
      doc_it = docs.emplace(r.entity_id, weaksup::article_document(*it->second)).first;
    }
    const auto weak = weaksup::match_record(r, *it->second);
    sum.unmatched_fields += r.fields.size() - weak.size();
    for (const auto& w : weak) {
      out.write_line(to_json(weaksup::weakqa_to_qapair(w, doc_it->second)));
      ++sum.qa;
    }
  }
  out.commit();

  if (o.out_docs) {
    AtomicWriter d(*o.out_docs);
    for (const auto& a : articles) d.write_line(to_json(weaksup::article_document(a)));
    d.commit();
  }
  log("gen-weak: " + std::to_string(sum.records) + " records, " + std::to_string(sum.qa) +
      " QA pairs, " + std::to_string(sum.unmatched_fields) + " unmatched fields, " +
      std::to_string(sum.missing_articles) + " records without article");
  return sum;
}

FillLayoutSummary fill_layout(const FillLayoutOptions& o) {
  const auto articles = read_all(o.articles, &weaksup::article_from_json);
  const auto qa = read_all(o.qa, &qa_from_json);
  const auto templates = read_all(o.templates, &layout::template_from_json);
  if (templates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no templates in " + o.templates.string());
  }
  for (const auto& t : templates) layout::validate(t);

  std::map<std::string, std::vector<QAPair>> qa_by_doc;
  for (const QAPair& q : qa) qa_by_doc[q.doc_id].push_back(q);

  FillLayoutSummary sum;
  AtomicWriter docs_out(o.out_docs);
  AtomicWriter qa_out(o.out_qa);
  std::set<std::string> seen;
  for (size_t i = 0; i < articles.size(); ++i) {
    const auto& article = articles[i];
    seen.insert(article.entity_id);
    const Document source = weaksup::article_document(article);
    std::vector<std::string> words;
    for (const Word& w : source.pages.front().words) words.push_back(w.text);
    const auto& pairs = qa_by_doc[article.entity_id];
    for (const QAPair& q : pairs) {
      for (AnswerSpan g : q.gold) resolve_span(source, g);
    }
    const auto& tmpl = templates[i % templates.size()];
    layout::FilledDocument filled = layout::fill_layout(article.entity_id, words, pairs, tmpl);
    validate(filled.document);
    docs_out.write_line(to_json(filled.document));
    for (const QAPair& q : filled.qa) qa_out.write_line(to_json(q));
    ++sum.documents;
    sum.qa += filled.qa.size();
    sum.dropped_words += filled.dropped_words;
    sum.dropped_qa += filled.dropped_qa;

    if (o.images_dir) {
      for (size_t p = 0; p < filled.document.pages.size(); ++p) {
        const std::string stem = page_image_stem(filled.document.doc_id, p);
        AtomicWriter img(*o.images_dir / (stem + ".pgm"));
        img.write_bytes(layout::encode_pgm(layout::render_canvas(filled, p)));
        img.commit();
        write_json_file(*o.images_dir / (stem + ".json"),
                        layout::canvas_sidecar(filled.document, p));
      }
    }
  }
  for (const auto& [doc_id, pairs] : qa_by_doc) {
    if (!seen.count(doc_id)) sum.dropped_qa += pairs.size();
  }
  docs_out.commit();
  qa_out.commit();
  log("fill-layout: " + std::to_string(sum.documents) + " documents, " + std::to_string(sum.qa) +
      " QA pairs kept, " + std::to_string(sum.dropped_qa) + " dropped, " +
      std::to_string(sum.dropped_words) + " overflow words");
  return sum;
}

BuildMrcSummary build_mrc(const BuildMrcOptions& o) {
  std::unordered_map<std::string, Document> docs;
  for (Document& d : load_documents(o.docs)) {
    const std::string id = d.doc_id;
    if (!docs.emplace(id, std::move(d)).second) {
      throw Error(ErrorCode::kFormat, "duplicate doc_id " + id + " in " + o.docs.string());
    }
  }
  const auto qa = load_qa(o.qa);
  const mrc::WhitespaceTokenizer tok;

  BuildMrcSummary sum;
  AtomicWriter out(o.out_windows);
  std::string canvas_doc;
  std::optional<layout::Canvas> canvas;
  for (const QAPair& q : qa) {
    auto it = docs.find(q.doc_id);
    if (it == docs.end()) {
      throw Error(ErrorCode::kFormat, "unknown doc_id " + q.doc_id + " for " + q.qa_id + " in " +
                                          o.qa.string());
    }
    const Document& doc = it->second;
    if (o.images_dir && canvas_doc != doc.doc_id) {
      canvas_doc = doc.doc_id;
      canvas.reset();
      const fs::path img = *o.images_dir / (page_image_stem(doc.doc_id, 0) + ".pgm");
      if (doc.source != DocSource::kPlainText && fs::exists(img)) {
        canvas = layout::decode_pgm(read_file(img));
      }
    }
    const auto windows = mrc::build_windows(doc, q, tok, canvas ? &*canvas : nullptr, o.window);
    for (const auto& w : windows) out.write_line(mrc::to_json(w));
    ++sum.questions;
    sum.windows += windows.size();
  }
  out.commit();
  log("build-mrc: " + std::to_string(sum.questions) + " questions, " +
      std::to_string(sum.windows) + " windows");
  return sum;
}

decode::Scheme rotated_scheme(uint64_t seed, const std::string& qa_id) {
  Rng rng(mix_seed(seed, stable_hash(qa_id)));
  return decode::kSchemes[rng.below(decode::kSchemes.size())];
}

OracleLogitsSummary oracle_logits(const OracleLogitsOptions& o) {
  o.noise.validate();
  JsonlReader in(o.windows);
  AtomicWriter out(o.out_logits);
  OracleLogitsSummary sum;
  while (auto rec = in.next()) {
    mrc::MrcWindow w;
    try {
      w = mrc::window_from_json(rec->value);
    } catch (const FieldError& e) {
      rethrow_with_line(e, rec->line, o.windows);
    }
    oracle::NoiseSpec noise = o.noise;
    if (o.rotate_scheme) noise.corrupt_scheme = rotated_scheme(o.noise.seed, w.qa_id);
    const auto logits = oracle::gold_to_logits(w, w.gold, noise);
    out.write_line(decode::to_json(logits.logits));
    ++sum.windows;
    for (size_t s = 0; s < 3; ++s) sum.corrupted[s] += logits.corrupted[s];
  }
  out.commit();
  log("oracle-logits: " + std::to_string(sum.windows) + " windows, corrupted tokens bio=" +
      std::to_string(sum.corrupted[0]) + " bioes=" + std::to_string(sum.corrupted[1]) +
      " se=" + std::to_string(sum.corrupted[2]));
  return sum;
}

DecodeSummary decode(const DecodeOptions& o) {
  if (o.schemes.empty()) throw Error(ErrorCode::kInvalidArgument, "no schemes selected");
  const auto windows = read_all(o.windows, &mrc::window_from_json);
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const mrc::MrcWindow*>> by_qa;
  for (const auto& w : windows) {
    auto& list = by_qa[w.qa_id];
    if (list.empty()) order.push_back(w.qa_id);
    list.push_back(&w);
  }

  std::map<std::pair<std::string, size_t>, decode::TokenLogits> logits;
  {
    JsonlReader in(o.logits);
    while (auto rec = in.next()) {
      decode::TokenLogits l;
      try {
        l = decode::logits_from_json(rec->value);
      } catch (const FieldError& e) {
        rethrow_with_line(e, rec->line, o.logits);
      }
      auto key = std::make_pair(l.qa_id, l.window_index);
      if (!logits.emplace(std::move(key), std::move(l)).second) {
        throw Error(ErrorCode::kFormat, "duplicate window" + line_context(rec->line, o.logits));
      }
    }
  }

  DecodeSummary sum;
  AtomicWriter out(o.out_predictions);
  for (const std::string& qa_id : order) {
    const auto& ws = by_qa[qa_id];
    size_t expected = 0;
    for (const auto* w : ws) expected = std::max(expected, w->window_index + 1);
    const auto words = window_words(ws);

    std::array<std::vector<AnswerSpan>, 3> per_scheme;
    Json audit = Json::object();
    for (decode::Scheme s : o.schemes) {
      std::vector<decode::WindowSpans> decoded;
      for (const auto* w : ws) {
        auto it = logits.find({qa_id, w->window_index});
        if (it == logits.end()) continue;  // reported by stitch_windows
        const auto& head = it->second.head(s);
        if (!head) {
          throw Error(ErrorCode::kFormat, "logits for " + qa_id + " window " +
                                              std::to_string(w->window_index) + " lack head " +
                                              std::string(decode::scheme_name(s)));
        }
        if (head->rows() != w->context_size()) {
          throw Error(ErrorCode::kFormat,
                      "logits for " + qa_id + " window " + std::to_string(w->window_index) +
                          " have " + std::to_string(head->rows()) + " rows, expected " +
                          std::to_string(w->context_size()));
        }
        decoded.push_back({w->window_index, w->context_map(), decode::decode_head(*head, s)});
      }
      auto spans = decode::stitch_windows(decoded, expected, qa_id);
      fill_text(spans, words);
      audit[std::string(decode::scheme_name(s))] = spans_json(spans);
      per_scheme[static_cast<size_t>(s)] = std::move(spans);
    }

    Json rec = {{"qa_id", qa_id}, {"spans", std::move(audit)}};
    std::optional<AnswerSpan> answer;
    if (o.fuse) {
      auto fused = decode::vote_fuse(per_scheme[0], per_scheme[1], per_scheme[2]);
      answer = decode::select_answer(fused);
      rec["fused"] = spans_json(fused);
    } else {
      answer = decode::select_answer(per_scheme[static_cast<size_t>(o.schemes.front())]);
    }
    rec["answer"] = answer ? answer_json(*answer) : Json(nullptr);
    out.write_line(rec);
    ++sum.questions;
    if (answer) ++sum.answered;
  }
  out.commit();
  log("decode: " + std::to_string(sum.questions) + " questions, " + std::to_string(sum.answered) +
      " answered");
  return sum;
}

ensemble::PerturbationConfig perturbation_from_json(const Json& v) {
  if (!v.is_object()) throw Error(ErrorCode::kFormat, "perturbation config must be an object");
  ensemble::PerturbationConfig c;
  const Json& p = v.contains("perturbation") ? v["perturbation"] : v;
  if (p.contains("p_keep")) c.p_keep = field::real(p, "p_keep", "");
  if (p.contains("p_shift")) c.p_shift = field::real(p, "p_shift", "");
  if (p.contains("p_segment")) c.p_segment = field::real(p, "p_segment", "");
  if (p.contains("p_entity")) c.p_entity = field::real(p, "p_entity", "");
  if (p.contains("max_shift")) {
    const int64_t m = field::integer(p, "max_shift", "");
    if (m < 0) throw Error(ErrorCode::kInvalidArgument, "max_shift must be non-negative");
    c.max_shift = static_cast<size_t>(m);
  }
  if (p.contains("seed")) c.seed = static_cast<uint64_t>(field::integer(p, "seed", ""));
  c.validate();
  return c;
}

GenTrainSummary gen_train(const GenTrainOptions& o) {
  const auto qa = load_qa(o.qa);
  std::map<std::string, Document> docs;
  for (Document& d : load_documents(o.docs)) {
    const std::string id = d.doc_id;
    docs.emplace(id, std::move(d));
  }
  const auto set = ensemble::build_gen_training_set(qa, docs, o.perturb);
  GenTrainSummary sum;
  AtomicWriter out(o.out);
  for (const auto& e : set.examples) {
    out.write_line(ensemble::to_json(e));
    ++sum.modes[std::string(ensemble::mode_name(e.mode))];
  }
  out.commit();
  sum.examples = set.examples.size();
  sum.skipped = set.skipped;
  std::string modes;
  for (const auto& [m, n] : sum.modes) modes += " " + m + "=" + std::to_string(n);
  log("gen-train: " + std::to_string(sum.examples) + " examples, " + std::to_string(sum.skipped) +
      " QA pairs without gold skipped;" + modes);
  return sum;
}

void apply_ensemble_config(const Json& v, EnsembleOptions& o) {
  if (!v.is_object()) throw Error(ErrorCode::kFormat, "ensemble config must be an object");
  if (auto it = v.find("priority"); it != v.end()) {
    if (!it->is_array()) throw Error(ErrorCode::kFormat, "priority must be a list of tags");
    o.priority.clear();
    for (const Json& t : *it) {
      if (!t.is_string()) throw Error(ErrorCode::kFormat, "priority must be a list of tags");
      o.priority.push_back(t.get<std::string>());
    }
  }
  if (v.contains("spans")) {
    const int64_t k = field::integer(v, "spans", "");
    if (k < 1 || k > static_cast<int64_t>(ensemble::kMaxSpans)) {
      throw Error(ErrorCode::kInvalidArgument, "spans must be 1, 2 or 3");
    }
    o.spans = static_cast<size_t>(k);
  }
}

namespace {

std::unique_ptr<ensemble::GenModel> make_gen_stub(const std::string& spec) {
  if (spec == "echo") return std::make_unique<ensemble::EchoGenModel>();
  if (spec.rfind("dict:", 0) == 0) {
    const fs::path path = spec.substr(5);
    const Json v = read_json_file(path);
    if (!v.is_object()) {
      throw Error(ErrorCode::kFormat, "correction dictionary must be an object in " + path.string());
    }
    std::map<std::string, std::string> table;
    for (const auto& [k, val] : v.items()) {
      if (!val.is_string()) {
        throw Error(ErrorCode::kFormat, "correction for " + k + " must be a string in " +
                                            path.string());
      }
      table[k] = val.get<std::string>();
    }
    return std::make_unique<ensemble::DictCorrectionGenModel>(std::move(table));
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown generation stub " + spec);
}

// Spans of one understanding model per question: the fused list when
// present, otherwise the single answer.
std::map<std::string, std::vector<AnswerSpan>> load_model_spans(const fs::path& path) {
  std::map<std::string, std::vector<AnswerSpan>> out;
  JsonlReader in(path);
  while (auto rec = in.next()) {
    try {
      const std::string qa_id = field::string(rec->value, "qa_id", "");
      std::vector<AnswerSpan> spans;
      if (auto f = rec->value.find("fused"); f != rec->value.end() && f->is_array()) {
        for (const Json& s : *f) spans.push_back(span_from_json(s, "fused"));
      } else if (auto a = rec->value.find("answer"); a != rec->value.end() && a->is_object()) {
        spans.push_back(span_from_json(*a, "answer"));
      }
      out[qa_id] = std::move(spans);
    } catch (const FieldError& e) {
      rethrow_with_line(e, rec->line, path);
    }
  }
  return out;
}

}  // namespace

EnsembleSummary run_ensemble(const EnsembleOptions& o) {
  if (o.predictions.empty() || o.predictions.size() > ensemble::kMaxSpans) {
    throw Error(ErrorCode::kInvalidArgument, "ensemble takes 1 to 3 prediction files");
  }
  if (o.spans < 1 || o.spans > ensemble::kMaxSpans) {
    throw Error(ErrorCode::kInvalidArgument, "spans must be 1, 2 or 3");
  }
  if (!o.sources.empty() && o.sources.size() != o.predictions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one source tag per prediction file required");
  }
  std::vector<std::map<std::string, std::vector<AnswerSpan>>> models;
  std::vector<std::string> tags;
  for (size_t i = 0; i < o.predictions.size(); ++i) {
    models.push_back(load_model_spans(o.predictions[i]));
    tags.push_back(o.sources.empty() ? o.predictions[i].stem().string() : o.sources[i]);
  }
  std::unordered_map<std::string, Document> docs;
  for (Document& d : load_documents(o.docs)) {
    const std::string id = d.doc_id;
    docs.emplace(id, std::move(d));
  }
  const auto qa = load_qa(o.qa);
  const auto gen = make_gen_stub(o.gen_stub);

  EnsembleSummary sum;
  AtomicWriter out(o.out);
  for (const QAPair& q : qa) {
    auto doc = docs.find(q.doc_id);
    if (doc == docs.end()) {
      throw Error(ErrorCode::kFormat, "unknown doc_id " + q.doc_id + " for " + q.qa_id);
    }
    std::vector<std::vector<AnswerSpan>> per_model;
    for (const auto& m : models) {
      auto it = m.find(q.qa_id);
      per_model.push_back(it == m.end() ? std::vector<AnswerSpan>{} : it->second);
    }
    Json rec = {{"qa_id", q.qa_id}};
    std::string answer;
    if (o.method == EnsembleMethod::kGenerate) {
      answer = ensemble::ensemble_infer(q, per_model, doc->second, *gen, o.spans);
    } else {
      std::vector<ensemble::Candidate> candidates;
      for (size_t i = 0; i < per_model.size(); ++i) {
        if (auto top = decode::select_answer(per_model[i])) {
          candidates.push_back({top->text, top->score, tags[i]});
        }
      }
      answer = ensemble::fuse_answers(candidates, o.priority);
    }
    rec["answer"] = answer.empty() ? Json(nullptr) : Json(answer);
    out.write_line(rec);
    ++sum.questions;
    if (!answer.empty()) ++sum.answered;
  }
  out.commit();
  log("ensemble: " + std::to_string(sum.questions) + " questions, " +
      std::to_string(sum.answered) + " answered");
  return sum;
}

metrics::EvalReport eval(const EvalOptions& o) {
  if (o.metrics.empty()) throw Error(ErrorCode::kInvalidArgument, "no metrics selected");
  std::map<std::string, std::string> predictions;
  {
    JsonlReader in(o.predictions);
    while (auto rec = in.next()) {
      std::string qa_id;
      try {
        qa_id = field::string(rec->value, "qa_id", "");
      } catch (const FieldError& e) {
        rethrow_with_line(e, rec->line, o.predictions);
      }
      if (auto a = answer_text(rec->value, rec->line, o.predictions)) {
        predictions[qa_id] = *a;
      }
    }
  }
  std::vector<metrics::GoldQuestion> golds;
  for (const QAPair& q : load_qa(o.qa)) {
    metrics::GoldQuestion g{q.qa_id, {}};
    for (const AnswerSpan& s : q.gold) g.golds.push_back(s.text);
    golds.push_back(std::move(g));
  }
  metrics::EvalReport report = metrics::evaluate(golds, predictions, o.metrics);
  write_json_file(o.out_report, metrics::to_json(report));
  if (o.out_csv) {
    AtomicWriter csv(*o.out_csv);
    csv.write_bytes(metrics::to_csv(report));
    csv.commit();
  }
  std::string line = "eval: " + std::to_string(report.questions.size()) + " questions, " +
                     std::to_string(report.unanswered) + " unanswered;";
  for (metrics::Metric m : report.metrics) {
    std::ostringstream v;
    v.precision(4);
    v << std::fixed << report.aggregates.at(m);
    line += " " + std::string(metrics::metric_name(m)) + "=" + v.str();
  }
  log(line);
  return report;
}

StageManifest manifest_from_json(const Json& v) {
  if (!v.is_object()) throw Error(ErrorCode::kFormat, "manifest config must be an object");
  StageManifest m;
  if (v.contains("seed")) m.seed = static_cast<uint64_t>(field::integer(v, "seed", ""));
  for (const Json& s : field::array(v, "stages", "")) {
    Stage st;
    st.name = field::string(s, "name", "stages");
    for (const Json& d : field::array(s, "datasets", "stages")) {
      st.datasets.push_back({field::string(d, "path", "datasets"),
                             field::real(d, "weight", "datasets")});
    }
    if (s.contains("epochs")) st.epochs = field::integer(s, "epochs", "stages");
    if (auto n = s.find("notes"); n != s.end() && n->is_string()) st.notes = *n;
    if (auto h = s.find("hyperparameters"); h != s.end()) {
      if (!h->is_object()) throw Error(ErrorCode::kFormat, "hyperparameters must be an object");
      st.hyperparameters = *h;
    }
    if (s.contains("size")) {
      const int64_t n = field::integer(s, "size", "stages");
      if (n < 0) throw Error(ErrorCode::kInvalidArgument, "stage size must be non-negative");
      st.size = static_cast<size_t>(n);
    }
    m.stages.push_back(std::move(st));
  }
  validate(m);
  return m;
}

void validate(const StageManifest& m) {
  if (m.stages.empty()) throw Error(ErrorCode::kInvalidArgument, "manifest needs at least one stage");
  for (const Stage& s : m.stages) {
    if (s.name.empty()) throw Error(ErrorCode::kInvalidArgument, "stage name must be non-empty");
    if (s.datasets.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "stage " + s.name + " has no datasets");
    }
    double total = 0.0;
    for (const StageDataset& d : s.datasets) {
      if (!(d.weight >= 0.0 && d.weight <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "weights of stage " + s.name + " must be in [0,1]");
      }
      total += d.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "weights of stage " + s.name + " must sum to 1");
    }
    if (s.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be positive");
  }
}

std::vector<size_t> apportion(const std::vector<double>& weights, size_t total) {
  std::vector<size_t> quota(weights.size(), 0);
  std::vector<std::pair<double, size_t>> rest;
  size_t given = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    quota[i] = static_cast<size_t>(std::floor(exact));
    given += quota[i];
    rest.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; given < total && k < rest.size(); ++k, ++given) ++quota[rest[k].second];
  return quota;
}

StageManifest stage_manifest(const StageManifestOptions& o) {
  StageManifest m = manifest_from_json(read_json_file(o.config));
  if (o.seed) m.seed = *o.seed;
  const fs::path base = o.config.parent_path();
  fs::create_directories(o.out_dir);

  Json stages = Json::array();
  for (size_t k = 0; k < m.stages.size(); ++k) {
    const Stage& st = m.stages[k];
    // Non-blank line numbers of every dataset.
    std::vector<std::vector<size_t>> lines;
    size_t available = 0;
    for (const StageDataset& d : st.datasets) {
      const fs::path p = fs::path(d.path).is_absolute() ? fs::path(d.path) : base / d.path;
      std::ifstream in(p);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
      std::vector<size_t> nums;
      std::string line;
      for (size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) nums.push_back(n);
      }
      available += nums.size();
      lines.push_back(std::move(nums));
    }
    const size_t size = st.size.value_or(available);
    std::vector<double> weights;
    for (const StageDataset& d : st.datasets) weights.push_back(d.weight);
    const auto quota = apportion(weights, size);

    Rng rng(mix_seed(m.seed, k));
    std::vector<std::pair<size_t, size_t>> rows;  // (dataset, line)
    Json datasets = Json::array();
    for (size_t i = 0; i < st.datasets.size(); ++i) {
      if (quota[i] > 0 && lines[i].empty()) {
        throw Error(ErrorCode::kInvalidArgument, "dataset " + st.datasets[i].path + " is empty");
      }
      // Whole shuffled passes, then a shuffled partial pass.
      std::vector<size_t> pass = lines[i];
      for (size_t taken = 0; taken < quota[i];) {
        rng.shuffle(pass.begin(), pass.end());
        for (size_t j = 0; j < pass.size() && taken < quota[i]; ++j, ++taken) {
          rows.emplace_back(i, pass[j]);
        }
      }
      datasets.push_back({{"path", st.datasets[i].path},
                          {"weight", st.datasets[i].weight},
                          {"lines", lines[i].size()},
                          {"quota", quota[i]}});
    }
    rng.shuffle(rows.begin(), rows.end());

    const std::string listing = "stage-" + std::to_string(k + 1) + ".tsv";
    AtomicWriter out(o.out_dir / listing);
    for (const auto& [i, n] : rows) out.stream() << st.datasets[i].path << '\t' << n << '\n';
    out.commit();
    stages.push_back({{"name", st.name},
                      {"datasets", std::move(datasets)},
                      {"epochs", st.epochs},
                      {"notes", st.notes},
                      {"hyperparameters", st.hyperparameters},
                      {"size", size},
                      {"listing", listing}});
  }
  write_json_file(o.out_dir / "manifest.json", {{"seed", m.seed}, {"stages", std::move(stages)}});
  log("stage-manifest: " + std::to_string(m.stages.size()) + " stages");
  return m;
}

PipelineSummary pipeline(const PipelineOptions& o) {
  fs::create_directories(o.out_dir);
  const fs::path dir = o.out_dir;
  const auto corpus = oracle::make_synthetic_corpus(o.n_docs, o.seed);
  {
    AtomicWriter r(dir / "records.jsonl");
    for (const auto& x : corpus.records) r.write_line(weaksup::to_json(x));
    r.commit();
    AtomicWriter a(dir / "articles.jsonl");
    for (const auto& x : corpus.articles) a.write_line(weaksup::to_json(x));
    a.commit();
    AtomicWriter t(dir / "templates.jsonl");
    for (const auto& x : corpus.templates) t.write_line(layout::to_json(x));
    t.commit();
  }
  log("pipeline: synthetic corpus of " + std::to_string(corpus.records.size()) + " documents");

  gen_weak({dir / "records.jsonl", dir / "articles.jsonl", dir / "weak_qa.jsonl", std::nullopt});
  FillLayoutOptions fill{dir / "articles.jsonl", dir / "weak_qa.jsonl", dir / "templates.jsonl",
                         dir / "docs.jsonl", dir / "qa.jsonl", std::nullopt};
  if (o.render) fill.images_dir = dir / "images";
  const auto filled = fill_layout(fill);
  const auto built =
      build_mrc({dir / "docs.jsonl", dir / "qa.jsonl", dir / "windows.jsonl", o.window,
                 fill.images_dir});
  OracleLogitsOptions lo{dir / "windows.jsonl", dir / "logits.jsonl", {}, false};
  lo.noise.label_noise = o.label_noise;
  lo.noise.seed = o.seed;
  oracle_logits(lo);
  DecodeOptions dec;
  dec.windows = dir / "windows.jsonl";
  dec.logits = dir / "logits.jsonl";
  dec.out_predictions = dir / "predictions.jsonl";
  dec.fuse = true;
  decode(dec);
  EvalOptions ev;
  ev.predictions = dir / "predictions.jsonl";
  ev.qa = dir / "qa.jsonl";
  ev.out_report = dir / "report.json";

  PipelineSummary sum;
  sum.documents = filled.documents;
  sum.questions = built.questions;
  sum.windows = built.windows;
  sum.report = eval(ev);
  if (o.label_noise == 0.0) {
    const double em = sum.report.aggregates.at(metrics::Metric::kExactMatch);
    if (em != 1.0) {
      throw Error(ErrorCode::kInvariant,
                  "zero-noise pipeline reached EM " + std::to_string(em) + ", expected 1");
    }
  }
  return sum;
}

}  // namespace docqa::stages
