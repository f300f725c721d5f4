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


#include <doctest.h>

#include <map>
#include <set>

#include "stages.hpp"
#include "test_util.hpp"

namespace docqa::stages {
namespace {

using testing::TempDir;
using testing::read_text;
using testing::write_text;

struct QuietLog {
  QuietLog() {
    set_log_sink([](const std::string&) {});
  }
  ~QuietLog() { set_log_sink({}); }
};

void write_jsonl(const fs::path& p, const std::vector<Json>& rows) {
  std::string s;
  for (const Json& r : rows) s += r.dump() + "\n";
  write_text(p, s);
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  }
  return out;
}

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

TEST_CASE("pipeline is exact and deterministic") {
  QuietLog quiet;
  TempDir a, b;
  PipelineOptions o;
  o.n_docs = 25;
  o.seed = 4;
  o.out_dir = a.path();
  const PipelineSummary sa = pipeline(o);
  o.out_dir = b.path();
  pipeline(o);
  CHECK(sa.documents == 25);
  CHECK(sa.report.aggregates.at(metrics::Metric::kExactMatch) == 1.0);
  CHECK(sa.report.aggregates.at(metrics::Metric::kAnls) == 1.0);
  CHECK(sa.report.unanswered == 0);
  const auto ta = tree(a.path());
  CHECK(ta == tree(b.path()));
  CHECK(ta.count("report.json"));
  CHECK(ta.count("predictions.jsonl"));
  CHECK(std::any_of(ta.begin(), ta.end(), [](const auto& kv) {
    return kv.first.find(".pgm") != std::string::npos;
  }));
}

TEST_CASE("pipeline with noise runs without the exactness check") {
  QuietLog quiet;
  TempDir d;
  PipelineOptions o;
  o.n_docs = 10;
  o.label_noise = 0.3;
  o.render = false;
  o.out_dir = d.path();
  const PipelineSummary s = pipeline(o);
  CHECK(s.report.aggregates.at(metrics::Metric::kExactMatch) < 1.0);
  CHECK(!fs::exists(d / "images"));
}

struct SmallRun {
  TempDir dir;
  SmallRun() {
    QuietLog quiet;
    PipelineOptions o;
    o.n_docs = 8;
    o.render = false;
    o.out_dir = dir.path();
    pipeline(o);
  }
  fs::path operator/(const std::string& n) const { return dir / n; }
};

TEST_CASE("decode rejects bad logits files") {
  QuietLog quiet;
  SmallRun run;
  const std::string logits = read_text(run / "logits.jsonl");
  const std::string first = logits.substr(0, logits.find('\n') + 1);

  DecodeOptions o;
  o.windows = run / "windows.jsonl";
  o.out_predictions = run / "p.jsonl";

  write_text(run / "dup.jsonl", logits + first);
  o.logits = run / "dup.jsonl";
  CHECK(code_of([&] { decode(o); }) == ErrorCode::kFormat);

  write_text(run / "short.jsonl", logits.substr(first.size()));
  o.logits = run / "short.jsonl";
  CHECK(code_of([&] { decode(o); }) == ErrorCode::kMissingWindow);
  CHECK(!fs::exists(run / "p.jsonl"));
}

TEST_CASE("decode heads and fusion output") {
  QuietLog quiet;
  SmallRun run;
  DecodeOptions o;
  o.windows = run / "windows.jsonl";
  o.logits = run / "logits.jsonl";
  o.out_predictions = run / "bio.jsonl";
  o.schemes = {decode::Scheme::kBio};
  decode(o);
  JsonlReader in(run / "bio.jsonl");
  auto rec = in.next();
  REQUIRE(rec);
  CHECK(rec->value["spans"].contains("bio"));
  CHECK(!rec->value["spans"].contains("se"));
  CHECK(!rec->value.contains("fused"));

  EvalOptions ev;
  ev.predictions = run / "bio.jsonl";
  ev.qa = run / "qa.jsonl";
  ev.out_report = run / "r.json";
  ev.out_csv = run / "r.csv";
  CHECK(eval(ev).aggregates.at(metrics::Metric::kExactMatch) == 1.0);
  CHECK(fs::exists(run / "r.csv"));
}

TEST_CASE("rotated scheme is spread over heads") {
  std::map<decode::Scheme, int> counts;
  for (int i = 0; i < 3000; ++i) ++counts[rotated_scheme(1, "q" + std::to_string(i))];
  for (decode::Scheme s : decode::kSchemes) CHECK(std::abs(counts[s] - 1000) < 120);
  CHECK(rotated_scheme(1, "x") == rotated_scheme(1, "x"));
}

TEST_CASE("eval accepts string, span and null answers") {
  QuietLog quiet;
  TempDir d;
  const Document doc = testing::grid_document("d", testing::numbered_words(10));
  std::vector<Json> qa;
  for (int i = 0; i < 3; ++i) {
    QAPair q;
    q.qa_id = "q" + std::to_string(i);
    q.doc_id = "d";
    q.prompt = "p";
    q.gold.push_back(make_span(doc.pages[0], 0, {size_t(i), size_t(i) + 1}, 0.0));
    qa.push_back(to_json(q));
  }
  write_jsonl(d / "qa.jsonl", qa);
  write_jsonl(d / "pred.jsonl", {Json{{"qa_id", "q0"}, {"answer", "w0"}},
                                 Json{{"qa_id", "q1"}, {"answer", {{"text", "w1"}}}},
                                 Json{{"qa_id", "q2"}, {"answer", nullptr}}});
  EvalOptions o{d / "pred.jsonl", d / "qa.jsonl", d / "r.json", std::nullopt,
                {metrics::Metric::kExactMatch}};
  const auto r = eval(o);
  CHECK(r.unanswered == 1);
  CHECK(r.aggregates.at(metrics::Metric::kExactMatch) == doctest::Approx(2.0 / 3.0));

  write_jsonl(d / "bad.jsonl", {Json{{"qa_id", "q0"}, {"answer", 3}}});
  o.predictions = d / "bad.jsonl";
  CHECK(code_of([&] { eval(o); }) == ErrorCode::kFormat);
}

TEST_CASE("ensemble stage") {
  QuietLog quiet;
  TempDir d;
  const Document doc = testing::grid_document("d", {"Obarna", "won", "the", "vote"});
  write_jsonl(d / "docs.jsonl", {to_json(doc)});
  QAPair q;
  q.qa_id = "q";
  q.doc_id = "d";
  q.prompt = "who";
  q.gold.push_back(make_span(doc.pages[0], 0, {0, 1}, 0.0));
  write_jsonl(d / "qa.jsonl", {to_json(q)});
  auto pred = [&](Range r, double score) {
    return Json{{"qa_id", "q"}, {"answer", to_json(make_span(doc.pages[0], 0, r, score))}};
  };
  write_jsonl(d / "m1.jsonl", {pred({0, 1}, -0.1)});
  write_jsonl(d / "m2.jsonl", {pred({1, 2}, -0.2)});
  write_jsonl(d / "m3.jsonl", {pred({1, 2}, -0.3)});
  write_text(d / "dict.json", R"({"rn": "m"})");

  EnsembleOptions o;
  o.predictions = {d / "m1.jsonl", d / "m2.jsonl", d / "m3.jsonl"};
  o.docs = d / "docs.jsonl";
  o.qa = d / "qa.jsonl";
  o.out = d / "out.jsonl";
  o.gen_stub = "dict:" + (d / "dict.json").string();
  run_ensemble(o);
  CHECK(read_text(d / "out.jsonl") == "{\"answer\":\"Obama\",\"qa_id\":\"q\"}\n");

  o.method = EnsembleMethod::kVote;
  run_ensemble(o);
  CHECK(read_text(d / "out.jsonl") == "{\"answer\":\"won\",\"qa_id\":\"q\"}\n");

  o.predictions = {d / "m1.jsonl", d / "m2.jsonl"};
  o.sources = {"a", "b"};
  o.priority = {"b", "a"};
  write_jsonl(d / "m2.jsonl", {pred({1, 2}, -0.1)});
  run_ensemble(o);
  CHECK(read_text(d / "out.jsonl") == "{\"answer\":\"won\",\"qa_id\":\"q\"}\n");

  apply_ensemble_config(Json::parse(R"({"priority": ["a"], "spans": 2})"), o);
  CHECK(o.priority == std::vector<std::string>{"a"});
  CHECK(o.spans == 2);
  CHECK_THROWS_AS(apply_ensemble_config(Json::parse(R"({"spans": 4})"), o), Error);
}

TEST_CASE("largest remainder apportionment") {
  CHECK(apportion({0.5, 0.3, 0.2}, 7) == std::vector<size_t>{4, 2, 1});
  CHECK(apportion({0.5, 0.5}, 3) == std::vector<size_t>{2, 1});
  CHECK(apportion({1.0}, 0) == std::vector<size_t>{0});
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(1 + rng.below(5));
    double sum = 0.0;
    for (double& x : w) sum += (x = rng.uniform() + 0.01);
    for (double& x : w) x /= sum;
    const size_t total = rng.below(1000);
    const auto q = apportion(w, total);
    size_t got = 0;
    for (size_t i = 0; i < w.size(); ++i) {
      got += q[i];
      CHECK(std::abs(static_cast<double>(q[i]) - w[i] * total) < 1.0);
    }
    CHECK(got == total);
  }
}

TEST_CASE("stage manifest listings") {
  QuietLog quiet;
  TempDir d;
  std::string a, b;
  for (int i = 0; i < 30; ++i) a += "{}\n";
  for (int i = 0; i < 10; ++i) b += "{}\n\n";
  write_text(d / "a.jsonl", a);
  write_text(d / "b.jsonl", b);
  write_text(d / "config.json", R"({
    "seed": 3,
    "stages": [
      {"name": "weak", "datasets": [{"path": "a.jsonl", "weight": 1.0}], "epochs": 1},
      {"name": "open", "datasets": [{"path": "a.jsonl", "weight": 0.75},
                                    {"path": "b.jsonl", "weight": 0.25}], "size": 100,
       "hyperparameters": {"lr": 3e-5}},
      {"name": "vertical", "datasets": [{"path": "b.jsonl", "weight": 1.0}], "epochs": 3}
    ]})");
  const StageManifest m = stage_manifest({d / "config.json", d / "out", std::nullopt});
  REQUIRE(m.stages.size() == 3);
  const Json manifest = Json::parse(read_text(d / "out" / "manifest.json"));
  CHECK(manifest["stages"][0]["name"] == "weak");
  CHECK(manifest["stages"][1]["name"] == "open");
  CHECK(manifest["stages"][2]["name"] == "vertical");
  CHECK(manifest["stages"][1]["hyperparameters"]["lr"] == 3e-5);

  const std::string s2 = read_text(d / "out" / "stage-2.tsv");
  std::map<std::string, size_t> per;
  std::set<size_t> b_lines;
  std::istringstream rows(s2);
  std::string path;
  size_t line = 0;
  while (rows >> path >> line) {
    ++per[path];
    if (path == "b.jsonl") b_lines.insert(line);
  }
  CHECK(per["a.jsonl"] == 75);
  CHECK(per["b.jsonl"] == 25);
  for (size_t n : b_lines) CHECK(n % 2 == 1);
  CHECK(b_lines.size() == 10);

  const std::string s1 = read_text(d / "out" / "stage-1.tsv");
  CHECK(std::count(s1.begin(), s1.end(), '\n') == 30);

  stage_manifest({d / "config.json", d / "again", std::nullopt});
  CHECK(tree(d / "out") == tree(d / "again"));
  stage_manifest({d / "config.json", d / "other", 4});
  CHECK(read_text(d / "out" / "stage-2.tsv") != read_text(d / "other" / "stage-2.tsv"));
}

TEST_CASE("stage manifest validation") {
  auto bad = [](const char* text) {
    return code_of([&] { manifest_from_json(Json::parse(text)); });
  };
  CHECK(bad(R"({"stages": []})") == ErrorCode::kInvalidArgument);
  CHECK(bad(R"({"stages": [{"name": "s", "datasets": [{"path": "a", "weight": 0.6}]}]})") ==
        ErrorCode::kInvalidArgument);
  CHECK(bad(R"({"stages": [{"name": "s", "datasets": [{"path": "a", "weight": 1}], "epochs": 0}]})") ==
        ErrorCode::kInvalidArgument);
  CHECK(bad(R"({"stages": [{"datasets": []}]})") == ErrorCode::kFormat);
}

TEST_CASE("gen-weak rejects duplicate articles") {
  QuietLog quiet;
  TempDir d;
  write_jsonl(d / "records.jsonl", {Json{{"entity_id", "e"}, {"fields", Json::array()}}});
  write_jsonl(d / "articles.jsonl", {Json{{"entity_id", "e"}, {"text", "x"}},
                                     Json{{"entity_id", "e"}, {"text", "y"}}});
  CHECK(code_of([&] {
          gen_weak({d / "records.jsonl", d / "articles.jsonl", d / "qa.jsonl", std::nullopt});
        }) == ErrorCode::kFormat);
}

TEST_CASE("gen-train output") {
  QuietLog quiet;
  SmallRun run;
  GenTrainOptions o;
  o.qa = run / "qa.jsonl";
  o.docs = run / "docs.jsonl";
  o.out = run / "train.jsonl";
  const GenTrainSummary s = gen_train(o);
  CHECK(s.examples > 0);
  JsonlReader in(run / "train.jsonl");
  size_t n = 0;
  while (auto rec = in.next()) {
    const Json& v = rec->value;
    CHECK(v["input"].get<std::string>().rfind("[CLS] ", 0) == 0);
    CHECK(std::set<std::string>{"keep", "shift", "segment", "entity"}.count(v["mode"]));
    ++n;
  }
  CHECK(n == s.examples);
  const std::string first = read_text(run / "train.jsonl");
  gen_train(o);
  CHECK(read_text(run / "train.jsonl") == first);
}

}  // namespace
}  // namespace docqa::stages
