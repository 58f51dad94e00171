// Copyright 2026 The DPC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpc/dpc.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "dpc/core.hpp"
#include "dpc/error.hpp"
#include "dpc/experiment.hpp"
#include "dpc/model_io.hpp"

struct dpc_config {
  dpc::ExperimentConfig value;
};
struct dpc_dataset {
  dpc::Dataset value;
};
struct dpc_autoencoder {
  dpc::AutoencoderFile value;
};
struct dpc_prototypes {
  dpc::PrototypeSet value;
};
struct dpc_classifier {
  dpc::ClassifierFile value;
};

namespace {

thread_local std::string g_last_error;

dpc_status StatusOf(dpc::ErrorKind kind) {
  switch (kind) {
    case dpc::ErrorKind::kParameter: return DPC_ERR_PARAMETER;
    case dpc::ErrorKind::kStructural: return DPC_ERR_STRUCTURAL;
    case dpc::ErrorKind::kIngestion: return DPC_ERR_INGESTION;
    case dpc::ErrorKind::kIo: return DPC_ERR_IO;
    case dpc::ErrorKind::kNumeric: return DPC_ERR_NUMERIC;
    case dpc::ErrorKind::kTraining: return DPC_ERR_TRAINING;
  }
  return DPC_ERR_INTERNAL;
}

template <typename F>
dpc_status Guard(F&& body) {
  try {
    g_last_error.clear();
    body();
    return DPC_OK;
  } catch (const dpc::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DPC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DPC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DPC_ERR_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  dpc::Require(p != nullptr, dpc::ErrorKind::kParameter, std::string(what) + " is null");
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void EmitRows(const std::vector<dpc::MetricRow>& rows, char** out) {
  if (out != nullptr) *out = CopyString(dpc::MetricRowsToCsv(rows));
}

}  // namespace

extern "C" {

const char* dpc_version(void) { return "1.0.0"; }

const char* dpc_status_name(dpc_status status) {
  switch (status) {
    case DPC_OK: return "ok";
    case DPC_ERR_PARAMETER: return "parameter error";
    case DPC_ERR_STRUCTURAL: return "structural error";
    case DPC_ERR_INGESTION: return "ingestion error";
    case DPC_ERR_IO: return "i/o error";
    case DPC_ERR_NUMERIC: return "numeric error";
    case DPC_ERR_TRAINING: return "training error";
    case DPC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dpc_last_error(void) { return g_last_error.c_str(); }

int dpc_exit_code(dpc_status status) {
  switch (status) {
    case DPC_OK: return 0;
    case DPC_ERR_PARAMETER:
    case DPC_ERR_STRUCTURAL:
    case DPC_ERR_INGESTION:
    case DPC_ERR_IO: return 2;
    case DPC_ERR_NUMERIC:
    case DPC_ERR_TRAINING: return 3;
    case DPC_ERR_INTERNAL: return 1;
  }
  return 1;
}

void dpc_string_free(char* s) { std::free(s); }

// ---- configuration ----

dpc_status dpc_config_default(dpc_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = new dpc_config{};
  });
}

dpc_status dpc_config_load(const char* path, dpc_config** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new dpc_config{dpc::ExperimentConfig::LoadFile(path)};
  });
}

dpc_status dpc_config_parse(const char* json_text, dpc_config** out) {
  return Guard([&] {
    NotNull(json_text, "json_text");
    NotNull(out, "out");
    *out = new dpc_config{dpc::ExperimentConfig::FromJsonText(json_text)};
  });
}

dpc_status dpc_config_set(dpc_config* config, const char* key, const char* value_json) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    NotNull(value_json, "value");
    config->value.Set(key, value_json);
  });
}

dpc_status dpc_config_get(const dpc_config* config, const char* key, char** value_json) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(key, "key");
    NotNull(value_json, "value_json");
    *value_json = CopyString(config->value.Get(key));
  });
}

dpc_status dpc_config_validate(const dpc_config* config) {
  return Guard([&] {
    NotNull(config, "config");
    config->value.Validate();
  });
}

dpc_status dpc_config_to_json(const dpc_config* config, char** out) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(out, "out");
    *out = CopyString(config->value.ToJsonText());
  });
}

void dpc_config_free(dpc_config* config) { delete config; }

// ---- datasets ----

dpc_status dpc_dataset_load(const dpc_config* config, uint64_t seed, dpc_dataset** out) {
  return Guard([&] {
    NotNull(config, "config");
    NotNull(out, "out");
    *out = new dpc_dataset{dpc::LoadExperimentData(config->value, seed)};
  });
}

size_t dpc_dataset_rows(const dpc_dataset* dataset) {
  return dataset ? dataset->value.size() : 0;
}

size_t dpc_dataset_cols(const dpc_dataset* dataset) {
  return dataset ? dataset->value.dim() : 0;
}

dpc_status dpc_dataset_row(const dpc_dataset* dataset, size_t row, double* out,
                           size_t out_len, int* label) {
  return Guard([&] {
    NotNull(dataset, "dataset");
    NotNull(out, "out");
    const auto& d = dataset->value;
    dpc::Require(row < d.size(), dpc::ErrorKind::kParameter, "row out of range");
    dpc::Require(out_len == d.dim(), dpc::ErrorKind::kStructural,
                 "output buffer length does not match the dataset width");
    const auto r = d.features.row(row);
    std::copy(r.begin(), r.end(), out);
    if (label != nullptr) *label = d.labels[row];
  });
}

void dpc_dataset_free(dpc_dataset* dataset) { delete dataset; }

// ---- trained artifacts ----

dpc_status dpc_autoencoder_load(const char* path, dpc_autoencoder** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new dpc_autoencoder{dpc::AutoencoderFromJsonText(dpc::ReadTextFile(path))};
  });
}

size_t dpc_autoencoder_input_dim(const dpc_autoencoder* ae) {
  return ae ? ae->value.model.input_dim() : 0;
}

size_t dpc_autoencoder_latent_dim(const dpc_autoencoder* ae) {
  return ae ? ae->value.model.latent_dim() : 0;
}

void dpc_autoencoder_free(dpc_autoencoder* ae) { delete ae; }

dpc_status dpc_prototypes_load(const char* path, dpc_prototypes** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new dpc_prototypes{dpc::PrototypeSet::FromJsonText(dpc::ReadTextFile(path))};
  });
}

size_t dpc_prototypes_count(const dpc_prototypes* prototypes) {
  return prototypes ? prototypes->value.prototypes.size() : 0;
}

void dpc_prototypes_free(dpc_prototypes* prototypes) { delete prototypes; }

dpc_status dpc_classifier_load(const char* path, dpc_classifier** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new dpc_classifier{dpc::ClassifierFromJsonText(dpc::ReadTextFile(path))};
  });
}

size_t dpc_classifier_input_dim(const dpc_classifier* classifier) {
  return classifier ? classifier->value.net.input_dim : 0;
}

size_t dpc_classifier_class_count(const dpc_classifier* classifier) {
  return classifier ? classifier->value.net.output_dim() : 0;
}

dpc_status dpc_classifier_predict(const dpc_classifier* classifier, const double* x,
                                  size_t x_len, double* proba, size_t proba_len) {
  return Guard([&] {
    NotNull(classifier, "classifier");
    NotNull(x, "x");
    NotNull(proba, "proba");
    const auto& net = classifier->value.net;
    dpc::Require(proba_len == net.output_dim(), dpc::ErrorKind::kStructural,
                 "probability buffer length does not match the class count");
    const dpc::Vector p = dpc::PredictProba(net, {x, x_len});
    std::copy(p.begin(), p.end(), proba);
  });
}

void dpc_classifier_free(dpc_classifier* classifier) { delete classifier; }

// ---- counterfactual search ----

dpc_search_options dpc_search_options_default(void) {
  const dpc::SearchConfig c;
  return {c.alpha, c.beta, c.gamma, c.iterations, c.step_size, c.init_jitter, 0};
}

dpc_status dpc_search(const dpc_autoencoder* ae, const dpc_prototypes* prototypes,
                      const dpc_classifier* target, const double* query, size_t query_len,
                      int target_class, const dpc_search_options* options, double* sample,
                      size_t sample_len, int* predicted_class) {
  return Guard([&] {
    NotNull(ae, "autoencoder");
    NotNull(prototypes, "prototypes");
    NotNull(target, "target");
    NotNull(query, "query");
    NotNull(sample, "sample");
    const dpc_search_options o = options ? *options : dpc_search_options_default();
    dpc::SearchConfig c;
    c.alpha = o.alpha;
    c.beta = o.beta;
    c.gamma = o.gamma;
    c.iterations = o.iterations;
    c.step_size = o.step_size;
    c.init_jitter = o.init_jitter;
    c.target_class = target_class;
    dpc::Require(sample_len == ae->value.model.input_dim(), dpc::ErrorKind::kStructural,
                 "sample buffer length does not match the model input");
    dpc::Rng rng(o.seed);
    const dpc::CounterfactualResult r =
        dpc::SearchCounterfactual(prototypes->value, {query, query_len}, target->value.net,
                                  ae->value.model, c, rng);
    std::copy(r.sample.begin(), r.sample.end(), sample);
    if (predicted_class != nullptr) *predicted_class = r.predicted_class;
  });
}

// ---- commands ----

dpc_status dpc_cmd_train_ae(const dpc_config* config, char** metrics_csv) {
  return Guard([&] {
    NotNull(config, "config");
    EmitRows(dpc::CmdTrainAe(config->value), metrics_csv);
  });
}

dpc_status dpc_cmd_explain(const dpc_config* config, const char* queries_path,
                           char** metrics_csv) {
  return Guard([&] {
    NotNull(config, "config");
    EmitRows(dpc::CmdExplain(config->value, queries_path ? queries_path : ""), metrics_csv);
  });
}

dpc_status dpc_cmd_attack(const dpc_config* config, char** metrics_csv) {
  return Guard([&] {
    NotNull(config, "config");
    EmitRows(dpc::CmdAttack(config->value), metrics_csv);
  });
}

dpc_status dpc_cmd_sweep(const dpc_config* config, char** metrics_csv) {
  return Guard([&] {
    NotNull(config, "config");
    EmitRows(dpc::CmdSweep(config->value), metrics_csv);
  });
}

dpc_status dpc_cmd_report(const char* directory, const char* output_csv, size_t* rows) {
  return Guard([&] {
    NotNull(directory, "directory");
    NotNull(output_csv, "output_csv");
    const std::size_t n = dpc::CmdReport(directory, output_csv);
    if (rows != nullptr) *rows = n;
  });
}

}  // extern "C"
