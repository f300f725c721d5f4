/*
 * Copyright 2026 The docqa Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of libdocqa.
 *
 * Every call that can fail returns a docqa_status; on failure the message
 * is available from docqa_last_error() on the same thread until the next
 * failing call.
 *
 * Stages are run by name with a bag of string options:
 *
 *   docqa_options* o = docqa_options_create();
 *   docqa_options_set(o, "docs", "docs.jsonl");
 *   docqa_options_set(o, "qa", "qa.jsonl");
 *   docqa_options_set(o, "out", "windows.jsonl");
 *   if (docqa_run("build-mrc", o, NULL) != DOCQA_OK) puts(docqa_last_error());
 *   docqa_options_destroy(o);
 *
 * Stage options (* = required, + = repeatable):
 *   gen-weak        records* articles* out* docs-out
 *   fill-layout     articles* qa* templates* out-docs* out-qa* images
 *   build-mrc       docs* qa* out* max-seq stride images
 *   oracle-logits   windows* out* noise seed corrupt-scheme region
 *                   (corrupt-scheme: bio|bioes|se|rotate, region: all|gold)
 *   decode          windows* logits* out* schemes fuse
 *   gen-train       qa* docs* out* config p-keep seed
 *   ensemble        predictions*+ docs* qa* out* spans gen-stub method
 *                   source+ priority+ config
 *   eval            predictions* qa* out* csv metrics
 *   stage-manifest  config* out* seed
 *   pipeline        out* docs seed noise max-seq stride render
 *
 * Booleans are "0"/"1", lists are comma separated.
 */

#ifndef DOCQA_DOCQA_H_
#define DOCQA_DOCQA_H_

#include <stddef.h>

#if defined(_WIN32)
#define DOCQA_API __declspec(dllexport)
#else
#define DOCQA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum docqa_status {
  DOCQA_OK = 0,
  DOCQA_INVALID_ARGUMENT = 1,
  DOCQA_IO = 2,
  DOCQA_FORMAT = 3,
  DOCQA_INVARIANT = 4,
  DOCQA_UNALIGNABLE = 5,
  DOCQA_BUDGET = 6,
  DOCQA_MISSING_WINDOW = 7,
  DOCQA_GENERATION = 8,
  DOCQA_INTERNAL = 99
} docqa_status;

DOCQA_API const char* docqa_version(void);
DOCQA_API const char* docqa_status_name(docqa_status status);
DOCQA_API const char* docqa_last_error(void);

/* Progress messages. A NULL sink restores the default (stderr). */
typedef void (*docqa_log_fn)(const char* message, void* user_data);
DOCQA_API void docqa_set_log_sink(docqa_log_fn sink, void* user_data);

typedef struct docqa_options docqa_options;

DOCQA_API docqa_options* docqa_options_create(void);
DOCQA_API void docqa_options_destroy(docqa_options* options);
/* Replaces any earlier values of key. */
DOCQA_API docqa_status docqa_options_set(docqa_options* options, const char* key,
                                         const char* value);
/* Appends a value to a repeatable key. */
DOCQA_API docqa_status docqa_options_add(docqa_options* options, const char* key,
                                         const char* value);

typedef struct docqa_report docqa_report;

/* Runs a stage. For "eval" and "pipeline", *report receives the evaluation
 * report when report is non-NULL; it is set to NULL for other stages. */
DOCQA_API docqa_status docqa_run(const char* stage, const docqa_options* options,
                                 docqa_report** report);

DOCQA_API size_t docqa_report_count(const docqa_report* report);
DOCQA_API size_t docqa_report_unanswered(const docqa_report* report);
/* metric: anls, em, f1 or rougel; must have been evaluated. */
DOCQA_API docqa_status docqa_report_metric(const docqa_report* report, const char* metric,
                                           double* value);
DOCQA_API void docqa_report_destroy(docqa_report* report);

/* Scores one prediction against its gold answers. */
DOCQA_API docqa_status docqa_metric(const char* metric, const char* prediction,
                                    const char* const* golds, size_t n_golds, double* value);

/* Constrained Viterbi over a row-major n_tokens x n_labels logit matrix for
 * scheme bio (O B I), bioes (O B I E S) or se (O S E). labels receives
 * n_tokens entries; score the total log-softmax emission score. */
DOCQA_API docqa_status docqa_viterbi(const char* scheme, const double* logits, size_t n_tokens,
                                     int* labels, double* score);

/* Spans of a label sequence as [begin, end) pairs in bounds (2 entries per
 * span, at most max_spans spans written). *n_spans is the total found. */
DOCQA_API docqa_status docqa_extract_spans(const char* scheme, const int* labels,
                                           size_t n_tokens, size_t* bounds, size_t max_spans,
                                           size_t* n_spans);

#ifdef __cplusplus
}
#endif

#endif /* DOCQA_DOCQA_H_ */
