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

// File-to-file pipeline stages. Each stage reads JSON Lines inputs, writes
// its outputs atomically and reports counts through the log sink.

#ifndef DOCQA_CORE_STAGES_HPP
#define DOCQA_CORE_STAGES_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decode.hpp"
#include "ensemble.hpp"
#include "metrics.hpp"
#include "mrc.hpp"
#include "oracle.hpp"

namespace docqa::stages {

namespace fs = std::filesystem;

using LogSink = std::function<void(const std::string&)>;

// Replaces the process-wide sink; an empty function restores stderr.
void set_log_sink(LogSink sink);
void log(const std::string& message);

struct GenWeakOptions {
  fs::path records;
  fs::path articles;
  fs::path out_qa;
  std::optional<fs::path> out_docs;  // plain-text article documents
};

struct GenWeakSummary {
  size_t records = 0;
  size_t qa = 0;
  size_t unmatched_fields = 0;
  size_t missing_articles = 0;
};

GenWeakSummary gen_weak(const GenWeakOptions& o);

struct FillLayoutOptions {
  fs::path articles;
  fs::path qa;
  fs::path templates;
  fs::path out_docs;
  fs::path out_qa;
  std::optional<fs::path> images_dir;  // <doc_id>.p<k>.pgm + .json sidecar
};

struct FillLayoutSummary {
  size_t documents = 0;
  size_t qa = 0;
  size_t dropped_words = 0;
  size_t dropped_qa = 0;
};

// Article i is filled into template i mod |templates|.
FillLayoutSummary fill_layout(const FillLayoutOptions& o);

struct BuildMrcOptions {
  fs::path docs;
  fs::path qa;
  fs::path out_windows;
  mrc::WindowConfig window;
  std::optional<fs::path> images_dir;  // page-0 canvas of each document
};

struct BuildMrcSummary {
  size_t questions = 0;
  size_t windows = 0;
};

BuildMrcSummary build_mrc(const BuildMrcOptions& o);

struct OracleLogitsOptions {
  fs::path windows;
  fs::path out_logits;
  oracle::NoiseSpec noise;
  // Corrupt one head per question, chosen from the seed and qa_id.
  bool rotate_scheme = false;
};

struct OracleLogitsSummary {
  size_t windows = 0;
  std::array<size_t, 3> corrupted{};
};

OracleLogitsSummary oracle_logits(const OracleLogitsOptions& o);

// Head corrupted for `qa_id` when rotating.
decode::Scheme rotated_scheme(uint64_t seed, const std::string& qa_id);

struct DecodeOptions {
  fs::path windows;
  fs::path logits;
  fs::path out_predictions;
  std::vector<decode::Scheme> schemes{decode::kSchemes.begin(), decode::kSchemes.end()};
  bool fuse = false;
};

struct DecodeSummary {
  size_t questions = 0;
  size_t answered = 0;
};

DecodeSummary decode(const DecodeOptions& o);

struct GenTrainOptions {
  fs::path qa;
  fs::path docs;
  fs::path out;
  ensemble::PerturbationConfig perturb;
};

ensemble::PerturbationConfig perturbation_from_json(const Json& v);

struct GenTrainSummary {
  size_t examples = 0;
  size_t skipped = 0;
  std::map<std::string, size_t> modes;
};

GenTrainSummary gen_train(const GenTrainOptions& o);

enum class EnsembleMethod { kGenerate, kVote };

struct EnsembleOptions {
  std::vector<fs::path> predictions;  // one file per understanding model
  fs::path docs;
  fs::path qa;
  fs::path out;
  size_t spans = ensemble::kMaxSpans;
  std::string gen_stub = "echo";  // echo | dict:<path>
  EnsembleMethod method = EnsembleMethod::kGenerate;
  std::vector<std::string> sources;   // tag per predictions file
  std::vector<std::string> priority;  // for vote ties
};

// Optional JSON config: {"priority": [...], "spans": k}.
void apply_ensemble_config(const Json& v, EnsembleOptions& o);

struct EnsembleSummary {
  size_t questions = 0;
  size_t answered = 0;
};

EnsembleSummary run_ensemble(const EnsembleOptions& o);

struct EvalOptions {
  fs::path predictions;
  fs::path qa;
  fs::path out_report;
  std::optional<fs::path> out_csv;
  std::vector<metrics::Metric> metrics{metrics::Metric::kAnls, metrics::Metric::kExactMatch,
                                       metrics::Metric::kTokenF1, metrics::Metric::kRougeL};
};

metrics::EvalReport eval(const EvalOptions& o);

// Curriculum of dataset mixtures, one listing per stage.
struct StageDataset {
  std::string path;
  double weight = 0.0;
};

struct Stage {
  std::string name;
  std::vector<StageDataset> datasets;
  int64_t epochs = 1;
  std::string notes;
  Json hyperparameters = Json::object();
  std::optional<size_t> size;  // listing length; default = total input lines
};

struct StageManifest {
  std::vector<Stage> stages;
  uint64_t seed = 0;
};

StageManifest manifest_from_json(const Json& v);
void validate(const StageManifest& m);

struct StageManifestOptions {
  fs::path config;
  fs::path out_dir;
  std::optional<uint64_t> seed;  // overrides the config
};

// Writes manifest.json and stage-<k>.tsv ("path<TAB>line" per row).
StageManifest stage_manifest(const StageManifestOptions& o);

// Quotas proportional to weights summing to `total` (largest remainder,
// ties to the earlier dataset).
std::vector<size_t> apportion(const std::vector<double>& weights, size_t total);

struct PipelineOptions {
  fs::path out_dir;
  size_t n_docs = 500;
  uint64_t seed = 0;
  double label_noise = 0.0;
  mrc::WindowConfig window;
  bool render = true;
};

struct PipelineSummary {
  size_t documents = 0;
  size_t questions = 0;
  size_t windows = 0;
  metrics::EvalReport report;
};

// Synthetic corpus through gen-weak, fill-layout, build-mrc, oracle
// logits, decode (fused) and eval. With zero noise, any EM below 1 is an
// error.
PipelineSummary pipeline(const PipelineOptions& o);

}  // namespace docqa::stages

#endif  // DOCQA_CORE_STAGES_HPP
