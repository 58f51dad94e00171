/*
 * Copyright 2026 The DPC Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of libdpc.
 *
 * Every function returns a dpc_status. On failure the message of the most
 * recent error on the calling thread is available from dpc_last_error().
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Strings returned through char** are released with
 * dpc_string_free.
 */

#ifndef DPC_DPC_H_
#define DPC_DPC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DPC_BUILDING_LIBRARY)
#define DPC_API __attribute__((visibility("default")))
#else
#define DPC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpc_status {
  DPC_OK = 0,
  DPC_ERR_PARAMETER = 1,
  DPC_ERR_STRUCTURAL = 2,
  DPC_ERR_INGESTION = 3,
  DPC_ERR_IO = 4,
  DPC_ERR_NUMERIC = 5,
  DPC_ERR_TRAINING = 6,
  DPC_ERR_INTERNAL = 7
} dpc_status;

typedef struct dpc_config dpc_config;
typedef struct dpc_dataset dpc_dataset;
typedef struct dpc_autoencoder dpc_autoencoder;
typedef struct dpc_prototypes dpc_prototypes;
typedef struct dpc_classifier dpc_classifier;

DPC_API const char* dpc_version(void);
DPC_API const char* dpc_status_name(dpc_status status);
/* Message of the last failure on this thread; "" when there was none. */
DPC_API const char* dpc_last_error(void);
/* Process exit code for a status: 0 ok, 2 usage / config / input errors,
 * 3 numeric or training failures, 1 internal errors. */
DPC_API int dpc_exit_code(dpc_status status);
DPC_API void dpc_string_free(char* s);

/* ---- configuration ---- */
DPC_API dpc_status dpc_config_default(dpc_config** out);
DPC_API dpc_status dpc_config_load(const char* path, dpc_config** out);
DPC_API dpc_status dpc_config_parse(const char* json_text, dpc_config** out);
/* key: JSON pointer ("/attack/kind") or dotted path ("attack.kind");
 * value_json: a JSON value, or a bare string. */
DPC_API dpc_status dpc_config_set(dpc_config* config, const char* key,
                                  const char* value_json);
/* Returns the value of one key as JSON text. */
DPC_API dpc_status dpc_config_get(const dpc_config* config, const char* key,
                                  char** value_json);
DPC_API dpc_status dpc_config_validate(const dpc_config* config);
DPC_API dpc_status dpc_config_to_json(const dpc_config* config, char** out);
DPC_API void dpc_config_free(dpc_config* config);

/* ---- datasets ---- */
DPC_API dpc_status dpc_dataset_load(const dpc_config* config, uint64_t seed,
                                    dpc_dataset** out);
DPC_API size_t dpc_dataset_rows(const dpc_dataset* dataset);
DPC_API size_t dpc_dataset_cols(const dpc_dataset* dataset);
DPC_API dpc_status dpc_dataset_row(const dpc_dataset* dataset, size_t row, double* out,
                                   size_t out_len, int* label);
DPC_API void dpc_dataset_free(dpc_dataset* dataset);

/* ---- trained artifacts ---- */
DPC_API dpc_status dpc_autoencoder_load(const char* path, dpc_autoencoder** out);
DPC_API size_t dpc_autoencoder_input_dim(const dpc_autoencoder* ae);
DPC_API size_t dpc_autoencoder_latent_dim(const dpc_autoencoder* ae);
DPC_API void dpc_autoencoder_free(dpc_autoencoder* ae);

DPC_API dpc_status dpc_prototypes_load(const char* path, dpc_prototypes** out);
DPC_API size_t dpc_prototypes_count(const dpc_prototypes* prototypes);
DPC_API void dpc_prototypes_free(dpc_prototypes* prototypes);

DPC_API dpc_status dpc_classifier_load(const char* path, dpc_classifier** out);
DPC_API size_t dpc_classifier_input_dim(const dpc_classifier* classifier);
DPC_API size_t dpc_classifier_class_count(const dpc_classifier* classifier);
DPC_API dpc_status dpc_classifier_predict(const dpc_classifier* classifier,
                                          const double* x, size_t x_len, double* proba,
                                          size_t proba_len);
DPC_API void dpc_classifier_free(dpc_classifier* classifier);

/* ---- counterfactual search ----
 * Takes released artifacts only; no dataset handle is involved. */
typedef struct dpc_search_options {
  double alpha;
  double beta;
  double gamma;
  size_t iterations;
  double step_size;
  double init_jitter;
  uint64_t seed;
} dpc_search_options;

/* Defaults: (1, 0.5, 0.1), 500 iterations, step 0.05, no jitter. */
DPC_API dpc_search_options dpc_search_options_default(void);
DPC_API dpc_status dpc_search(const dpc_autoencoder* ae, const dpc_prototypes* prototypes,
                              const dpc_classifier* target, const double* query,
                              size_t query_len, int target_class,
                              const dpc_search_options* options, double* sample,
                              size_t sample_len, int* predicted_class);

/* ---- commands ----
 * Each writes its artifacts below the configured out_dir and, when
 * metrics_csv is non-null, returns the emitted metric rows as CSV. */
DPC_API dpc_status dpc_cmd_train_ae(const dpc_config* config, char** metrics_csv);
DPC_API dpc_status dpc_cmd_explain(const dpc_config* config, const char* queries_path,
                                   char** metrics_csv);
DPC_API dpc_status dpc_cmd_attack(const dpc_config* config, char** metrics_csv);
DPC_API dpc_status dpc_cmd_sweep(const dpc_config* config, char** metrics_csv);
DPC_API dpc_status dpc_cmd_report(const char* directory, const char* output_csv,
                                  size_t* rows);

#ifdef __cplusplus
}
#endif

#endif /* DPC_DPC_H_ */
