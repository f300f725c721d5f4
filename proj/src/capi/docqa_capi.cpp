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

#include "docqa/docqa.h"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "decode.hpp"
#include "metrics.hpp"
#include "stages.hpp"
#include "text.hpp"

struct docqa_options {
  std::map<std::string, std::vector<std::string>> values;
};

struct docqa_report {
  docqa::metrics::EvalReport report;
};

namespace {

using docqa::Error;
using docqa::ErrorCode;
using docqa::Json;
namespace stages = docqa::stages;

thread_local std::string t_last_error;

docqa_status fail(docqa_status s, std::string message) {
  t_last_error = std::move(message);
  return s;
}

// Runs fn, mapping exceptions to status codes.
template <typename Fn>
docqa_status guarded(Fn&& fn) {
  try {
    fn();
    return DOCQA_OK;
  } catch (const Error& e) {
    return fail(static_cast<docqa_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DOCQA_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DOCQA_INTERNAL, e.what());
  }
}

class Args {
 public:
  Args(const docqa_options* o, std::string stage, std::set<std::string> known)
      : o_(o), stage_(std::move(stage)) {
    if (!o_) return;
    for (const auto& [k, v] : o_->values) {
      if (!known.count(k)) {
        throw Error(ErrorCode::kInvalidArgument, "unknown option " + k + " for " + stage_);
      }
    }
  }

  const std::vector<std::string>* find(const std::string& key) const {
    if (!o_) return nullptr;
    auto it = o_->values.find(key);
    return it == o_->values.end() || it->second.empty() ? nullptr : &it->second;
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto* v = find(key);
    return v ? std::optional<std::string>(v->back()) : std::nullopt;
  }

  std::string required(const std::string& key) const {
    auto v = get(key);
    if (!v) throw Error(ErrorCode::kInvalidArgument, "missing option " + key + " for " + stage_);
    return *v;
  }

  std::vector<std::string> all(const std::string& key) const {
    const auto* v = find(key);
    return v ? *v : std::vector<std::string>{};
  }

  std::optional<std::filesystem::path> path(const std::string& key) const {
    auto v = get(key);
    return v ? std::optional<std::filesystem::path>(*v) : std::nullopt;
  }

  template <typename T>
  std::optional<T> integer(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    T out{};
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) {
      throw Error(ErrorCode::kInvalidArgument, "option " + key + " expects an integer, got " + *v);
    }
    return out;
  }

  std::optional<double> real(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    char* end = nullptr;
    const double d = std::strtod(v->c_str(), &end);
    if (v->empty() || end != v->c_str() + v->size()) {
      throw Error(ErrorCode::kInvalidArgument, "option " + key + " expects a number, got " + *v);
    }
    return d;
  }

  std::optional<bool> flag(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    if (*v == "1" || *v == "true") return true;
    if (*v == "0" || *v == "false") return false;
    throw Error(ErrorCode::kInvalidArgument, "option " + key + " expects 0 or 1, got " + *v);
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    for (const std::string& v : all(key)) {
      size_t start = 0;
      while (start <= v.size()) {
        const size_t comma = std::min(v.find(',', start), v.size());
        if (comma > start) out.push_back(v.substr(start, comma - start));
        start = comma + 1;
      }
    }
    return out;
  }

 private:
  const docqa_options* o_;
  std::string stage_;
};

docqa::mrc::WindowConfig window_config(const Args& a) {
  docqa::mrc::WindowConfig w;
  if (auto v = a.integer<size_t>("max-seq")) w.max_seq = *v;
  if (auto v = a.integer<size_t>("stride")) w.stride = *v;
  return w;
}

docqa::decode::Scheme scheme_arg(const std::string& name) {
  auto s = docqa::decode::parse_scheme(name);
  if (!s) throw Error(ErrorCode::kInvalidArgument, "unknown scheme " + name);
  return *s;
}

Json read_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kFormat, "malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::optional<docqa::metrics::EvalReport> run_stage(const std::string& stage,
                                                    const docqa_options* o) {
  if (stage == "gen-weak") {
    Args a(o, stage, {"records", "articles", "out", "docs-out"});
    stages::gen_weak({a.required("records"), a.required("articles"), a.required("out"),
                      a.path("docs-out")});
  } else if (stage == "fill-layout") {
    Args a(o, stage, {"articles", "qa", "templates", "out-docs", "out-qa", "images"});
    stages::fill_layout({a.required("articles"), a.required("qa"), a.required("templates"),
                         a.required("out-docs"), a.required("out-qa"), a.path("images")});
  } else if (stage == "build-mrc") {
    Args a(o, stage, {"docs", "qa", "out", "max-seq", "stride", "images"});
    stages::build_mrc({a.required("docs"), a.required("qa"), a.required("out"), window_config(a),
                       a.path("images")});
  } else if (stage == "oracle-logits") {
    Args a(o, stage, {"windows", "out", "noise", "seed", "corrupt-scheme", "region"});
    stages::OracleLogitsOptions ol;
    ol.windows = a.required("windows");
    ol.out_logits = a.required("out");
    ol.noise.label_noise = a.real("noise").value_or(0.0);
    ol.noise.seed = a.integer<uint64_t>("seed").value_or(0);
    if (auto c = a.get("corrupt-scheme")) {
      if (*c == "rotate") {
        ol.rotate_scheme = true;
      } else {
        ol.noise.corrupt_scheme = scheme_arg(*c);
      }
    }
    if (auto r = a.get("region")) {
      if (*r == "all") {
        ol.noise.region = docqa::oracle::NoiseRegion::kAllTokens;
      } else if (*r == "gold") {
        ol.noise.region = docqa::oracle::NoiseRegion::kGoldOnly;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "region must be all or gold, got " + *r);
      }
    }
    stages::oracle_logits(ol);
  } else if (stage == "decode") {
    Args a(o, stage, {"windows", "logits", "out", "schemes", "fuse"});
    stages::DecodeOptions d;
    d.windows = a.required("windows");
    d.logits = a.required("logits");
    d.out_predictions = a.required("out");
    if (a.get("schemes")) {
      d.schemes.clear();
      for (const auto& s : a.list("schemes")) d.schemes.push_back(scheme_arg(s));
    }
    d.fuse = a.flag("fuse").value_or(false);
    stages::decode(d);
  } else if (stage == "gen-train") {
    Args a(o, stage, {"qa", "docs", "out", "config", "p-keep", "seed"});
    stages::GenTrainOptions g;
    g.qa = a.required("qa");
    g.docs = a.required("docs");
    g.out = a.required("out");
    if (auto c = a.path("config")) g.perturb = stages::perturbation_from_json(read_config(*c));
    if (auto p = a.real("p-keep")) g.perturb.p_keep = *p;
    if (auto s = a.integer<uint64_t>("seed")) g.perturb.seed = *s;
    stages::gen_train(g);
  } else if (stage == "ensemble") {
    Args a(o, stage, {"predictions", "docs", "qa", "out", "spans", "gen-stub", "method",
                      "source", "priority", "config"});
    stages::EnsembleOptions e;
    for (const auto& p : a.all("predictions")) e.predictions.emplace_back(p);
    e.docs = a.required("docs");
    e.qa = a.required("qa");
    e.out = a.required("out");
    if (auto c = a.path("config")) stages::apply_ensemble_config(read_config(*c), e);
    if (auto k = a.integer<size_t>("spans")) e.spans = *k;
    if (auto g = a.get("gen-stub")) e.gen_stub = *g;
    if (auto m = a.get("method")) {
      if (*m == "generate") {
        e.method = stages::EnsembleMethod::kGenerate;
      } else if (*m == "vote") {
        e.method = stages::EnsembleMethod::kVote;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "method must be generate or vote, got " + *m);
      }
    }
    e.sources = a.list("source");
    if (a.get("priority")) e.priority = a.list("priority");
    stages::run_ensemble(e);
  } else if (stage == "eval") {
    Args a(o, stage, {"predictions", "qa", "out", "csv", "metrics"});
    stages::EvalOptions e;
    e.predictions = a.required("predictions");
    e.qa = a.required("qa");
    e.out_report = a.required("out");
    e.out_csv = a.path("csv");
    if (a.get("metrics")) {
      e.metrics.clear();
      for (const auto& m : a.list("metrics")) {
        auto parsed = docqa::metrics::parse_metric(m);
        if (!parsed) throw Error(ErrorCode::kInvalidArgument, "unknown metric " + m);
        e.metrics.push_back(*parsed);
      }
    }
    return stages::eval(e);
  } else if (stage == "stage-manifest") {
    Args a(o, stage, {"config", "out", "seed"});
    stages::stage_manifest({a.required("config"), a.required("out"), a.integer<uint64_t>("seed")});
  } else if (stage == "pipeline") {
    Args a(o, stage, {"out", "docs", "seed", "noise", "max-seq", "stride", "render"});
    stages::PipelineOptions p;
    p.out_dir = a.required("out");
    p.n_docs = a.integer<size_t>("docs").value_or(p.n_docs);
    p.seed = a.integer<uint64_t>("seed").value_or(0);
    p.label_noise = a.real("noise").value_or(0.0);
    p.window = window_config(a);
    p.render = a.flag("render").value_or(true);
    return stages::pipeline(p).report;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown stage " + stage);
  }
  return std::nullopt;
}

}  // namespace

extern "C" {

DOCQA_API const char* docqa_version(void) { return "0.1.0"; }

DOCQA_API const char* docqa_status_name(docqa_status status) {
  switch (status) {
    case DOCQA_OK: return "ok";
    case DOCQA_INVALID_ARGUMENT: return "invalid argument";
    case DOCQA_IO: return "i/o error";
    case DOCQA_FORMAT: return "format error";
    case DOCQA_INVARIANT: return "invariant violation";
    case DOCQA_UNALIGNABLE: return "unalignable span";
    case DOCQA_BUDGET: return "budget exceeded";
    case DOCQA_MISSING_WINDOW: return "missing window";
    case DOCQA_GENERATION: return "generation failed";
    case DOCQA_INTERNAL: return "internal error";
  }
  return "unknown";
}

DOCQA_API const char* docqa_last_error(void) { return t_last_error.c_str(); }

DOCQA_API void docqa_set_log_sink(docqa_log_fn sink, void* user_data) {
  if (!sink) {
    stages::set_log_sink(nullptr);
    return;
  }
  stages::set_log_sink([sink, user_data](const std::string& m) { sink(m.c_str(), user_data); });
}

DOCQA_API docqa_options* docqa_options_create(void) { return new (std::nothrow) docqa_options; }

DOCQA_API void docqa_options_destroy(docqa_options* options) { delete options; }

DOCQA_API docqa_status docqa_options_set(docqa_options* options, const char* key,
                                         const char* value) {
  if (!options || !key || !value) return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  return guarded([&] { options->values[key] = {value}; });
}

DOCQA_API docqa_status docqa_options_add(docqa_options* options, const char* key,
                                         const char* value) {
  if (!options || !key || !value) return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  return guarded([&] { options->values[key].push_back(value); });
}

DOCQA_API docqa_status docqa_run(const char* stage, const docqa_options* options,
                                 docqa_report** report) {
  if (report) *report = nullptr;
  if (!stage) return fail(DOCQA_INVALID_ARGUMENT, "null stage");
  return guarded([&] {
    auto r = run_stage(stage, options);
    if (r && report) *report = new docqa_report{std::move(*r)};
  });
}

DOCQA_API size_t docqa_report_count(const docqa_report* report) {
  return report ? report->report.questions.size() : 0;
}

DOCQA_API size_t docqa_report_unanswered(const docqa_report* report) {
  return report ? report->report.unanswered : 0;
}

DOCQA_API docqa_status docqa_report_metric(const docqa_report* report, const char* metric,
                                           double* value) {
  if (!report || !metric || !value) return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  auto m = docqa::metrics::parse_metric(metric);
  if (!m) return fail(DOCQA_INVALID_ARGUMENT, std::string("unknown metric ") + metric);
  auto it = report->report.aggregates.find(*m);
  if (it == report->report.aggregates.end()) {
    return fail(DOCQA_INVALID_ARGUMENT, std::string("metric not evaluated: ") + metric);
  }
  *value = it->second;
  return DOCQA_OK;
}

DOCQA_API void docqa_report_destroy(docqa_report* report) { delete report; }

DOCQA_API docqa_status docqa_metric(const char* metric, const char* prediction,
                                    const char* const* golds, size_t n_golds, double* value) {
  if (!metric || !prediction || !value || (n_golds > 0 && !golds)) {
    return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  }
  auto m = docqa::metrics::parse_metric(metric);
  if (!m) return fail(DOCQA_INVALID_ARGUMENT, std::string("unknown metric ") + metric);
  return guarded([&] {
    std::vector<std::string> g;
    for (size_t i = 0; i < n_golds; ++i) {
      if (!golds[i]) throw Error(ErrorCode::kInvalidArgument, "null gold answer");
      g.emplace_back(golds[i]);
    }
    *value = docqa::metrics::score(*m, prediction, g);
  });
}

DOCQA_API docqa_status docqa_viterbi(const char* scheme, const double* logits, size_t n_tokens,
                                     int* labels, double* score) {
  if (!scheme || !logits || !labels) return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto s = scheme_arg(scheme);
    const size_t k = docqa::decode::label_count(s);
    docqa::decode::ScoreMatrix m(n_tokens, k);
    for (size_t t = 0; t < n_tokens; ++t) {
      for (size_t c = 0; c < k; ++c) m(t, c) = logits[t * k + c];
    }
    const auto path = docqa::decode::viterbi(m, s);
    for (size_t t = 0; t < n_tokens; ++t) labels[t] = path.labels[t];
    if (score) *score = path.score;
  });
}

DOCQA_API docqa_status docqa_extract_spans(const char* scheme, const int* labels,
                                           size_t n_tokens, size_t* bounds, size_t max_spans,
                                           size_t* n_spans) {
  if (!scheme || (n_tokens > 0 && !labels) || !n_spans || (max_spans > 0 && !bounds)) {
    return fail(DOCQA_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto s = scheme_arg(scheme);
    const auto k = static_cast<int>(docqa::decode::label_count(s));
    for (size_t t = 0; t < n_tokens; ++t) {
      if (labels[t] < 0 || labels[t] >= k) {
        throw Error(ErrorCode::kInvalidArgument, "label out of range at token " + std::to_string(t));
      }
    }
    const auto spans = docqa::decode::extract_spans(std::span<const int>(labels, n_tokens), s);
    *n_spans = spans.size();
    for (size_t i = 0; i < spans.size() && i < max_spans; ++i) {
      bounds[2 * i] = spans[i].begin;
      bounds[2 * i + 1] = spans[i].end;
    }
  });
}

}  // extern "C"
