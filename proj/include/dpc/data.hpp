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

// Dataset ingestion. Every feature that leaves this module lies in [-1, 1]:
// numeric columns are min-max scaled with the schema bounds, categorical
// columns are one-hot encoded with hot = 1 and cold = -1.

#ifndef DPC_DATA_HPP_
#define DPC_DATA_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dpc/numerics.hpp"

namespace dpc {

enum class ColumnKind { kNumeric, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  double min = 0.0;  // numeric only
  double max = 1.0;
  std::vector<std::string> values;  // categorical only

  std::size_t width() const {
    return kind == ColumnKind::kNumeric ? 1 : values.size();
  }

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string label_name;
  // Class names in index order. Empty means integer labels 0..C-1.
  std::vector<std::string> label_values;

  std::size_t encoded_width() const;
  // Offset of a column's first encoded feature.
  std::size_t offset_of(std::size_t column) const;
  // Index of the named column; throws kParameter when absent.
  std::size_t column_index(const std::string& name) const;

  static FeatureSchema FromJsonText(const std::string& text);
  static FeatureSchema LoadFile(const std::filesystem::path& path);
  std::string ToJsonText() const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct Dataset {
  Matrix features;  // N x d, entries in [-1, 1]
  std::vector<int> labels;
  int class_count = 0;
  FeatureSchema schema;
  // Numeric cells clamped into the schema bounds during ingestion.
  std::size_t clamped_cells = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  Dataset Subset(std::span<const std::size_t> indices) const;
  // Throws kParameter if an entry leaves [-1, 1] or a label is out of range.
  void Validate() const;
};

// Min-max scale into [-1, 1], clamping out-of-range values. Returns whether a
// clamp happened through `clamped`.
double ScaleNumeric(double raw, double min, double max, bool* clamped = nullptr);

// Encodes one raw record (one string per schema column, label excluded).
Vector EncodeRecord(const FeatureSchema& schema,
                    const std::vector<std::string>& cells,
                    std::size_t* clamped = nullptr);
// Inverse of EncodeRecord: inverse min-max for numeric columns, argmax over
// each one-hot block for categorical columns.
std::vector<std::string> DecodeRecord(const FeatureSchema& schema,
                                      std::span<const double> features);

Dataset LoadCsv(const std::filesystem::path& path, const FeatureSchema& schema);
Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path);

struct BlobOptions {
  std::size_t n_per_class = 100;
  std::size_t dim = 2;
  int class_count = 2;
  double separation = 1.5;
  // Per-coordinate standard deviation of each blob.
  double spread = 0.3;
};

// Gaussian blobs whose class means are pairwise `separation` apart (exactly,
// when class_count <= dim), clamped to [-1, 1]. Rows are interleaved by
// class.
Dataset SynthBlobs(Rng& rng, const BlobOptions& options);

// Blobs plus one categorical column "attr" with `attribute_values` values
// whose value is correlated with the class label with probability `leak`
// (0 = independent noise, 1 = deterministic function of the label).
Dataset SynthBlobsWithAttribute(Rng& rng, const BlobOptions& options,
                                std::size_t attribute_values, double leak);

// The four disjoint subsets used by the attack protocol, each split 50/50.
// Set 0 belongs to the model owner; sets 1-3 to the adversary.
struct SplitPlan {
  struct Part {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
  };
  std::array<Part, 4> sets;
};

SplitPlan MakeSplitPlan(Rng& rng, const Dataset& dataset, std::size_t subset_size);

}  // namespace dpc

#endif  // DPC_DATA_HPP_
