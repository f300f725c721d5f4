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

// docqa command line. Every subcommand forwards its flags to docqa_run()
// of the shared library. Exit status is 0 on success, 2 on any error.

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "docqa/docqa.h"

namespace {

constexpr int kExitError = 2;

enum Kind { kValue, kRequired, kRepeated, kFlag };

struct Flag {
  const char* name;  // also the docqa_run option key
  Kind kind;
  const char* help;
};

struct Command {
  const char* name;
  const char* help;
  std::vector<Flag> flags;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"gen-weak",
       "Match structured records against articles into weakly supervised QA pairs",
       {{"records", kRequired, "record file (JSONL {entity_id, fields})"},
        {"articles", kRequired, "article file (JSONL {entity_id, text})"},
        {"out", kRequired, "output QA file"},
        {"docs-out", kValue, "also write the plain-text article documents"}}},
      {"fill-layout",
       "Fill articles and their QA pairs into layout templates",
       {{"articles", kRequired, "article file"},
        {"qa", kRequired, "QA file from gen-weak"},
        {"templates", kRequired, "layout template file"},
        {"out-docs", kRequired, "output document file"},
        {"out-qa", kRequired, "output QA file (re-indexed)"},
        {"images", kValue, "directory for rendered PGM pages and sidecars"}}},
      {"build-mrc",
       "Build sliding MRC windows for every QA pair",
       {{"docs", kRequired, "document file"},
        {"qa", kRequired, "QA file"},
        {"out", kRequired, "output window file"},
        {"max-seq", kValue, "max text tokens per window (default 512)"},
        {"stride", kValue, "window stride in tokens (default 128)"},
        {"images", kValue, "directory of rendered pages for patch features"}}},
      {"oracle-logits",
       "Synthesize logits from the gold spans of each window",
       {{"windows", kRequired, "window file"},
        {"out", kRequired, "output logits file"},
        {"noise", kValue, "per-token corruption probability (default 0)"},
        {"seed", kValue, "random seed (default 0)"},
        {"corrupt-scheme", kValue, "corrupt only bio, bioes, se, or rotate per question"},
        {"region", kValue, "all or gold: tokens eligible for corruption"}}},
      {"decode",
       "Viterbi-decode logits into answer spans",
       {{"windows", kRequired, "window file"},
        {"logits", kRequired, "logits file"},
        {"out", kRequired, "output predictions file"},
        {"schemes", kValue, "comma list of bio,bioes,se (default all)"},
        {"fuse", kFlag, "fuse the heads by 2-of-3 vote"}}},
      {"gen-train",
       "Build generation training data from perturbed gold spans",
       {{"qa", kRequired, "QA file"},
        {"docs", kRequired, "document file"},
        {"out", kRequired, "output training file"},
        {"config", kValue, "perturbation config JSON"},
        {"p-keep", kValue, "probability of keeping the gold span (default 0.8)"},
        {"seed", kValue, "random seed (default 0)"}}},
      {"ensemble",
       "Combine understanding predictions through a generation stub or a vote",
       {{"predictions", kRepeated, "predictions file, one per model (1 to 3)"},
        {"docs", kRequired, "document file"},
        {"qa", kRequired, "QA file"},
        {"out", kRequired, "output predictions file"},
        {"spans", kValue, "number of spans fed to the generator: 1, 2 or 3"},
        {"gen-stub", kValue, "echo or dict:<path>"},
        {"method", kValue, "generate (default) or vote"},
        {"source", kValue, "comma list of source tags, one per predictions file"},
        {"priority", kValue, "comma list of source tags for vote ties"},
        {"config", kValue, "ensemble config JSON {priority, spans}"}}},
      {"eval",
       "Score predictions against gold answers",
       {{"predictions", kRequired, "predictions file"},
        {"qa", kRequired, "QA file"},
        {"out", kRequired, "output report (JSON)"},
        {"csv", kValue, "also write per-question CSV"},
        {"metrics", kValue, "comma list of anls,em,f1,rougel (default all)"}}},
      {"stage-manifest",
       "Write a multi-stage dataset curriculum",
       {{"config", kRequired, "manifest config JSON"},
        {"out", kRequired, "output directory"},
        {"seed", kValue, "override the config seed"}}},
      {"pipeline",
       "Run the whole pipeline on a synthetic corpus",
       {{"out", kRequired, "output directory"},
        {"docs", kValue, "number of synthetic documents (default 500)"},
        {"seed", kValue, "random seed (default 0)"},
        {"noise", kValue, "label noise of the oracle logits (default 0)"},
        {"max-seq", kValue, "max text tokens per window (default 512)"},
        {"stride", kValue, "window stride (default 128)"},
        {"no-render", kFlag, "skip page rendering"}}},
  };
  return cmds;
}

struct Values {
  std::map<std::string, std::string> single;
  std::map<std::string, std::vector<std::string>> repeated;
  std::map<std::string, bool> flags;
};

void print_report(docqa_report* report) {
  std::printf("{\"count\": %zu, \"unanswered\": %zu", docqa_report_count(report),
              docqa_report_unanswered(report));
  for (const char* m : {"anls", "em", "f1", "rougel"}) {
    double v = 0.0;
    if (docqa_report_metric(report, m, &v) == DOCQA_OK) std::printf(", \"%s\": %.6f", m, v);
  }
  std::printf("}\n");
}

int run(const Command& cmd, const Values& values) {
  std::unique_ptr<docqa_options, decltype(&docqa_options_destroy)> opts(docqa_options_create(),
                                                                       &docqa_options_destroy);
  if (!opts) {
    std::fprintf(stderr, "docqa: out of memory\n");
    return kExitError;
  }
  for (const auto& [k, v] : values.single) {
    if (!v.empty()) docqa_options_set(opts.get(), k.c_str(), v.c_str());
  }
  for (const auto& [k, vs] : values.repeated) {
    for (const auto& v : vs) docqa_options_add(opts.get(), k.c_str(), v.c_str());
  }
  for (const auto& [k, on] : values.flags) {
    if (k == "fuse" && on) docqa_options_set(opts.get(), "fuse", "1");
    if (k == "no-render" && on) docqa_options_set(opts.get(), "render", "0");
  }
  docqa_report* report = nullptr;
  const docqa_status status = docqa_run(cmd.name, opts.get(), &report);
  if (status != DOCQA_OK) {
    std::fprintf(stderr, "docqa %s: %s: %s\n", cmd.name, docqa_status_name(status),
                 docqa_last_error());
    return kExitError;
  }
  if (report) {
    print_report(report);
    docqa_report_destroy(report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document QA pipeline toolkit"};
  app.set_version_flag("--version", docqa_version());
  app.require_subcommand(1);

  Values values;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    for (const Flag& f : cmd.flags) {
      const std::string name = std::string("--") + f.name;
      switch (f.kind) {
        case kValue:
          sub->add_option(name, values.single[f.name], f.help);
          break;
        case kRequired:
          sub->add_option(name, values.single[f.name], f.help)->required();
          break;
        case kRepeated:
          sub->add_option(name, values.repeated[f.name], f.help)->required();
          break;
        case kFlag:
          sub->add_flag(name, values.flags[f.name], f.help);
          break;
      }
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  for (const auto& [sub, cmd] : subs) {
    if (sub->parsed()) return run(*cmd, values);
  }
  return kExitError;
}
