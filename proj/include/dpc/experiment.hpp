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

// Experiment driver behind the command line: configuration, the five
// commands and metric / CSV emission.
//
// All randomness of a run derives from one experiment seed through the named
// substreams "data", "split", "target", "ae", "search", "queries" and
// "attack".

#ifndef DPC_EXPERIMENT_HPP_
#define DPC_EXPERIMENT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpc/attacks.hpp"
#include "dpc/autoencoder.hpp"
#include "dpc/classifier.hpp"
#include "dpc/core.hpp"
#include "dpc/data.hpp"

namespace dpc {

struct DatasetConfig {
  std::string kind = "synth";  // synth, csv or idx
  std::string name;            // defaults to "synth" or the file stem
  std::string path;            // CSV file or IDX images
  std::string schema_path;     // CSV only
  std::string labels_path;     // IDX only
  BlobOptions blobs{.n_per_class = 1250, .dim = 8, .class_count = 2};
  // With attribute_values > 0 the synthetic data gains a categorical "attr"
  // column correlated with the label with probability `leak`.
  std::size_t attribute_values = 0;
  double leak = 0.0;
};

struct ExplainConfig {
  std::size_t queries = 500;
  // |S^cf|: counterfactuals per query used for the average distance.
  std::size_t replicates = 10;
  // Start jitter of replicates 1..R-1; replicate 0 starts at delta = 0.
  double jitter = 0.05;
};

struct AttackConfig {
  std::string kind = "extract";  // extract, membership, attribute
  std::vector<std::size_t> query_counts = {250};
  std::size_t per_query = 1;
  // Rows per SplitPlan subset; 0 uses N / 4.
  std::size_t subset_size = 0;
  std::vector<std::string> generators = {"base", "non_dp", "dpc"};
  std::vector<std::string> scenarios = {"known", "unknown"};
  std::string attribute = "attr";
  std::size_t baseline_steps = 200;
  double baseline_step_size = 0.05;
  ClassifierTrainOptions surrogate_training{};
  AttackTrainOptions attack_training{};
};

struct ExperimentConfig {
  DatasetConfig dataset;
  AutoencoderSpec autoencoder{.encoder_widths = {8, 4}};
  AutoencoderTrainOptions autoencoder_training{};
  double epsilon = 1.0;
  std::vector<double> epsilons = {0.0005, 0.01, 0.1, 1.0};  // sweep only
  // Empty uses the explicit search fields.
  std::string search_preset = "mixed";
  SearchConfig search{};
  ExplainConfig explain{};
  ClassifierSpec target{.hidden_widths = {16}};
  ClassifierTrainOptions target_training{};
  AttackConfig attack{};
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";
  double holdout_fraction = 0.2;
  // Sweep worker threads; 0 uses the hardware concurrency.
  std::size_t workers = 0;

  // Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig FromJsonText(const std::string& text);
  static ExperimentConfig LoadFile(const std::filesystem::path& path);
  std::string ToJsonText() const;
  // Sets one key, addressed as a JSON pointer ("/attack/kind") or a dotted
  // path ("attack.kind"), to a JSON value.
  void Set(const std::string& key, const std::string& value_json);
  std::string Get(const std::string& key) const;
  // Throws kParameter for invalid values (epsilon <= 0, no seeds, ...).
  void Validate() const;
  // The search settings after applying the preset.
  SearchConfig ResolvedSearch() const;
  std::string dataset_name() const;
};

struct MetricRow {
  std::string metric;  // MSE, FR, AD, surrogate_accuracy, ...
  std::string dataset;
  double epsilon = 0.0;
  std::string generator;
  std::string scenario;
  std::uint64_t seed = 0;
  double value = 0.0;
};

std::string MetricRowsToJsonText(const std::vector<MetricRow>& rows);
std::vector<MetricRow> MetricRowsFromJsonText(const std::string& text);
// Header "metric,dataset,epsilon,generator,scenario,seed,value" plus rows.
std::string MetricRowsToCsv(const std::vector<MetricRow>& rows);

// "%.17g", with inf / -inf / nan spelled out.
std::string FormatReal(double value);
// Quotes a CSV cell when needed.
std::string CsvCell(const std::string& text);

// The dataset of one run, and its deterministic train / holdout split.
Dataset LoadExperimentData(const ExperimentConfig& config, std::uint64_t seed);
struct TrainHoldout {
  Dataset train;
  Dataset holdout;
};
TrainHoldout SplitTrainHoldout(const Dataset& data, double holdout_fraction,
                               std::uint64_t seed);

// Per-query outcome of the explain command.
struct ExplainRecord {
  std::size_t query_index = 0;
  std::size_t replicate = 0;
  int target_class = 0;
  int predicted_class = 0;
  bool flipped = false;
  Vector query;
  Vector counterfactual;
};

struct ExplainMetrics {
  double flipping_ratio = 0.0;  // over replicate-0 counterfactuals
  double average_distance = 0.0;
  std::vector<ExplainRecord> records;
};

// Runs `replicates` searches per query and scores them.
ExplainMetrics ExplainQueries(const Autoencoder& ae, const PrototypeSet& prototypes,
                              const DenseNet& target_model, const Matrix& queries,
                              const SearchConfig& search, const ExplainConfig& explain,
                              const Rng& rng);
// Recomputes FR and AD from stored records, in the same order as
// ExplainQueries.
ExplainMetrics ScoreExplainRecords(std::vector<ExplainRecord> records);
std::string ExplainRecordsToCsv(const std::vector<ExplainRecord>& records);
std::vector<ExplainRecord> ExplainRecordsFromCsv(const std::string& text);

// Commands. Each returns the metric rows it emitted and writes its files
// into `dir` (per seed when several seeds are configured).
std::vector<MetricRow> CmdTrainAe(const ExperimentConfig& config);
std::vector<MetricRow> CmdExplain(const ExperimentConfig& config,
                                  const std::string& queries_path = "");
std::vector<MetricRow> CmdAttack(const ExperimentConfig& config);
std::vector<MetricRow> CmdSweep(const ExperimentConfig& config);
// Merges every *.metrics.json and *.report.json below `directory` into
// `output_csv` and returns the number of data rows.
std::size_t CmdReport(const std::filesystem::path& directory,
                      const std::filesystem::path& output_csv);

// One seed of each command, writing into `dir`.
std::vector<MetricRow> RunTrainAe(const ExperimentConfig& config, std::uint64_t seed,
                                  const std::filesystem::path& dir);
std::vector<MetricRow> RunExplain(const ExperimentConfig& config, std::uint64_t seed,
                                  const std::filesystem::path& dir,
                                  const std::string& queries_path = "");
std::vector<AttackReport> RunAttack(const ExperimentConfig& config, std::uint64_t seed,
                                    const std::filesystem::path& dir);

}  // namespace dpc

#endif  // DPC_EXPERIMENT_HPP_
