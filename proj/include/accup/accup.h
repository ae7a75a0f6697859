/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the accup library.
 *
 * Every function returns an accup_status. On failure the message of the most
 * recent error on the calling thread is available from accup_last_error().
 * Strings returned through char** out-parameters are owned by the caller and
 * must be released with accup_string_free(). Handles are released with the
 * matching *_free function; passing NULL to a *_free function is a no-op. */
#ifndef ACCUP_ACCUP_H_
#define ACCUP_ACCUP_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ACCUP_API __declspec(dllexport)
#else
#define ACCUP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum accup_status {
  ACCUP_OK = 0,
  ACCUP_ERR_INTERNAL = 1,
  ACCUP_ERR_CONFIG = 2,
  /* Malformed, truncated or inconsistent data files and tensor shapes. */
  ACCUP_ERR_DATA = 3,
  ACCUP_ERR_NUMERIC = 4,
  ACCUP_ERR_CONTRACT = 5,
  ACCUP_ERR_IO = 6
} accup_status;

typedef struct accup_dataset accup_dataset;
typedef struct accup_model accup_model;
typedef struct accup_session accup_session;

ACCUP_API const char* accup_version(void);
ACCUP_API const char* accup_last_error(void);
ACCUP_API const char* accup_status_name(accup_status status);
ACCUP_API void accup_string_free(char* s);

/* Datasets. */
ACCUP_API accup_status accup_dataset_load(const char* path, accup_dataset** out);
ACCUP_API accup_status accup_dataset_save(const accup_dataset* ds, const char* path);
ACCUP_API accup_status accup_dataset_info(const accup_dataset* ds, size_t* count,
                                          size_t* channels, size_t* length,
                                          size_t* classes);
/* Copies labels into `labels`, which must hold `count` entries. */
ACCUP_API accup_status accup_dataset_labels(const accup_dataset* ds,
                                            int32_t* labels, size_t count);
/* Source and target domains of the synthetic data section of an experiment
 * configuration (JSON text). */
ACCUP_API accup_status accup_dataset_generate(const char* config_json,
                                              accup_dataset** source,
                                              accup_dataset** target);
ACCUP_API void accup_dataset_free(accup_dataset* ds);

/* Models. The encoder and pretraining sections of `config_json` apply; the
 * input channel count is taken from `source`. `train_accuracy` may be NULL. */
ACCUP_API accup_status accup_model_pretrain(const char* config_json,
                                            const accup_dataset* source,
                                            uint64_t seed, accup_model** out,
                                            double* train_accuracy);
ACCUP_API accup_status accup_model_load(const char* path, accup_model** out);
ACCUP_API accup_status accup_model_save(const accup_model* model, const char* path);
ACCUP_API accup_status accup_model_hash(const accup_model* model, char** hex);
ACCUP_API void accup_model_free(accup_model* model);

/* Streaming sessions. `strategy_json` is an object with optional keys
 * "strategy", "accup" and "baseline", as in an experiment configuration. */
ACCUP_API accup_status accup_session_create(const accup_model* model,
                                            const char* strategy_json,
                                            uint64_t seed, accup_session** out);
/* `values` holds batch*channels*length doubles, series-major then channel.
 * Writes `batch` predictions; `loss` may be NULL. */
ACCUP_API accup_status accup_session_adapt_batch(accup_session* session,
                                                 const double* values,
                                                 size_t batch, size_t channels,
                                                 size_t length,
                                                 int32_t* predictions,
                                                 double* loss);
/* Writes the support set of an accup session as a snapshot file. */
ACCUP_API accup_status accup_session_export_support(const accup_session* session,
                                                    const char* path);
ACCUP_API void accup_session_free(accup_session* session);

/* Experiments. The report is returned as JSON text; outputs are written when
 * the configuration names an output directory. */
ACCUP_API accup_status accup_config_resolve(const char* config_json,
                                            char** resolved_json, char** hash);
ACCUP_API accup_status accup_experiment_run(const char* config_json,
                                            char** report_json);
/* `workers` overrides the sweep's worker count when non-zero. */
ACCUP_API accup_status accup_sweep_run(const char* sweep_json, size_t workers,
                                       char** summary_csv);
/* Mean and standard deviation table of a summary.csv text. */
ACCUP_API accup_status accup_report_render(const char* summary_csv, char** table);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* ACCUP_ACCUP_H_ */
