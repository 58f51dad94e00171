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

#include "dpc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "dpc/error.hpp"

namespace dpc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Schema

std::size_t FeatureSchema::encoded_width() const {
  std::size_t w = 0;
  for (const auto& c : columns) w += c.width();
  return w;
}

std::size_t FeatureSchema::offset_of(std::size_t column) const {
  Require(column < columns.size(), ErrorKind::kParameter, "column index out of range");
  std::size_t off = 0;
  for (std::size_t i = 0; i < column; ++i) off += columns[i].width();
  return off;
}

std::size_t FeatureSchema::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  Fail(ErrorKind::kParameter, "column '" + name + "' is not in the schema");
}

FeatureSchema FeatureSchema::FromJsonText(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("schema is not valid JSON: ") + e.what());
  }
  FeatureSchema schema;
  try {
    const json& label = doc.at("label");
    schema.label_name = label.at("name").get<std::string>();
    if (label.contains("values")) {
      schema.label_values = label.at("values").get<std::vector<std::string>>();
    }
    for (const json& col : doc.at("columns")) {
      ColumnSpec spec;
      spec.name = col.at("name").get<std::string>();
      const std::string kind = col.at("kind").get<std::string>();
      if (kind == "numeric") {
        spec.kind = ColumnKind::kNumeric;
        spec.min = col.at("min").get<double>();
        spec.max = col.at("max").get<double>();
        Require(spec.max > spec.min, ErrorKind::kIngestion,
                "schema column '" + spec.name + "' needs max > min");
      } else if (kind == "categorical") {
        spec.kind = ColumnKind::kCategorical;
        spec.values = col.at("values").get<std::vector<std::string>>();
        Require(!spec.values.empty(), ErrorKind::kIngestion,
                "schema column '" + spec.name + "' has no values");
      } else {
        Fail(ErrorKind::kIngestion, "schema column '" + spec.name +
                                        "' has unknown kind '" + kind + "'");
      }
      schema.columns.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("malformed schema: ") + e.what());
  }
  Require(!schema.columns.empty(), ErrorKind::kIngestion, "schema lists no columns");
  return schema;
}

FeatureSchema FeatureSchema::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kIo, "cannot open schema file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromJsonText(ss.str());
}

std::string FeatureSchema::ToJsonText() const {
  json doc;
  doc["label"]["name"] = label_name;
  if (!label_values.empty()) doc["label"]["values"] = label_values;
  doc["columns"] = json::array();
  for (const auto& c : columns) {
    json col;
    col["name"] = c.name;
    if (c.kind == ColumnKind::kNumeric) {
      col["kind"] = "numeric";
      col["min"] = c.min;
      col["max"] = c.max;
    } else {
      col["kind"] = "categorical";
      col["values"] = c.values;
    }
    doc["columns"].push_back(col);
  }
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Encoding

double ScaleNumeric(double raw, double min, double max, bool* clamped) {
  double v = 2.0 * (raw - min) / (max - min) - 1.0;
  bool c = false;
  if (v < -1.0) {
    v = -1.0;
    c = true;
  } else if (v > 1.0) {
    v = 1.0;
    c = true;
  }
  if (clamped) *clamped = c;
  return v;
}

Vector EncodeRecord(const FeatureSchema& schema,
                    const std::vector<std::string>& cells, std::size_t* clamped) {
  Require(cells.size() == schema.columns.size(), ErrorKind::kIngestion,
          "record has " + std::to_string(cells.size()) + " cells, schema has " +
              std::to_string(schema.columns.size()) + " columns");
  Vector out;
  out.reserve(schema.encoded_width());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const ColumnSpec& spec = schema.columns[c];
    if (spec.kind == ColumnKind::kNumeric) {
      double raw = 0.0;
      try {
        std::size_t used = 0;
        raw = std::stod(cells[c], &used);
        Require(used == cells[c].size(), ErrorKind::kIngestion, "");
      } catch (...) {
        Fail(ErrorKind::kIngestion, "column '" + spec.name +
                                        "': cannot parse '" + cells[c] +
                                        "' as a number");
      }
      bool was_clamped = false;
      out.push_back(ScaleNumeric(raw, spec.min, spec.max, &was_clamped));
      if (was_clamped && clamped) ++*clamped;
    } else {
      auto it = std::find(spec.values.begin(), spec.values.end(), cells[c]);
      Require(it != spec.values.end(), ErrorKind::kIngestion,
              "column '" + spec.name + "': unknown categorical value '" +
                  cells[c] + "'");
      const auto hot = static_cast<std::size_t>(it - spec.values.begin());
      for (std::size_t v = 0; v < spec.values.size(); ++v) {
        out.push_back(v == hot ? 1.0 : -1.0);
      }
    }
  }
  return out;
}

std::vector<std::string> DecodeRecord(const FeatureSchema& schema,
                                      std::span<const double> features) {
  Require(features.size() == schema.encoded_width(), ErrorKind::kStructural,
          "feature vector width does not match the schema");
  std::vector<std::string> out;
  std::size_t off = 0;
  for (const auto& spec : schema.columns) {
    if (spec.kind == ColumnKind::kNumeric) {
      const double v = std::clamp(features[off], -1.0, 1.0);
      const double raw = spec.min + (v + 1.0) * 0.5 * (spec.max - spec.min);
      std::ostringstream os;
      os.precision(17);
      os << raw;
      out.push_back(os.str());
    } else {
      std::size_t best = 0;
      for (std::size_t v = 1; v < spec.values.size(); ++v) {
        if (features[off + v] > features[off + best]) best = v;
      }
      out.push_back(spec.values[best]);
    }
    off += spec.width();
  }
  return out;
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.SelectRows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.class_count = class_count;
  out.schema = schema;
  return out;
}

void Dataset::Validate() const {
  Require(features.rows() == labels.size(), ErrorKind::kStructural,
          "feature rows and label count differ");
  Require(class_count > 0, ErrorKind::kParameter, "class_count must be positive");
  for (double v : features.data()) {
    Require(v >= -1.0 && v <= 1.0, ErrorKind::kParameter,
            "feature entry outside [-1, 1]");
  }
  for (int y : labels) {
    Require(y >= 0 && y < class_count, ErrorKind::kParameter, "label out of range");
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

}  // namespace

Dataset LoadCsv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kIo, "cannot open CSV file " + path.string());
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kIngestion,
          path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = SplitCsvLine(line);

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    Require(position.emplace(header[i], i).second, ErrorKind::kIngestion,
            path.string() + ": duplicate header column '" + header[i] + "'");
  }
  std::vector<std::size_t> source(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = position.find(schema.columns[c].name);
    Require(it != position.end(), ErrorKind::kIngestion,
            path.string() + ": header lacks schema column '" +
                schema.columns[c].name + "'");
    source[c] = it->second;
  }
  const auto label_it = position.find(schema.label_name);
  const bool has_label = label_it != position.end();
  const std::size_t expected = schema.columns.size() + (has_label ? 1 : 0);
  Require(header.size() == expected, ErrorKind::kIngestion,
          path.string() + ": header has columns that are not in the schema");

  Dataset ds;
  ds.schema = schema;
  std::vector<double> flat;
  std::size_t row = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = SplitCsvLine(line);
    Require(cells.size() == header.size(), ErrorKind::kIngestion,
            path.string() + ": row " + std::to_string(row) + " has " +
                std::to_string(cells.size()) + " cells, expected " +
                std::to_string(header.size()));
    std::vector<std::string> ordered(schema.columns.size());
    for (std::size_t c = 0; c < source.size(); ++c) ordered[c] = cells[source[c]];
    Vector enc;
    try {
      enc = EncodeRecord(schema, ordered, &ds.clamped_cells);
    } catch (const Error& e) {
      Fail(ErrorKind::kIngestion,
           path.string() + ": row " + std::to_string(row) + ", " + e.what());
    }
    flat.insert(flat.end(), enc.begin(), enc.end());
    int label = 0;
    if (has_label) {
      const std::string& raw = cells[label_it->second];
      if (!schema.label_values.empty()) {
        auto it = std::find(schema.label_values.begin(), schema.label_values.end(), raw);
        Require(it != schema.label_values.end(), ErrorKind::kIngestion,
                path.string() + ": row " + std::to_string(row) + ", column '" +
                    schema.label_name + "': unknown label '" + raw + "'");
        label = static_cast<int>(it - schema.label_values.begin());
      } else {
        try {
          label = std::stoi(raw);
        } catch (...) {
          label = -1;
        }
        Require(label >= 0, ErrorKind::kIngestion,
                path.string() + ": row " + std::to_string(row) + ", column '" +
                    schema.label_name + "': invalid label '" + raw + "'");
      }
    }
    max_label = std::max(max_label, label);
    ds.labels.push_back(label);
  }
  const std::size_t d = schema.encoded_width();
  ds.features = Matrix(ds.labels.size(), d);
  ds.features.data() = std::move(flat);
  ds.class_count = schema.label_values.empty()
                       ? std::max(1, max_label + 1)
                       : static_cast<int>(schema.label_values.size());
  if (ds.clamped_cells > 0) {
    std::cerr << "warning: " << path.string() << ": clamped " << ds.clamped_cells
              << " numeric cell(s) into schema bounds\n";
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> ReadAll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t ReadBigEndian(const std::vector<unsigned char>& bytes,
                            std::size_t offset, const std::filesystem::path& path) {
  Require(offset + 4 <= bytes.size(), ErrorKind::kIngestion,
          path.string() + ": truncated at byte offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset LoadIdx(const std::filesystem::path& images_path,
                const std::filesystem::path& labels_path) {
  const auto images = ReadAll(images_path);
  const auto labels = ReadAll(labels_path);

  const std::uint32_t image_magic = ReadBigEndian(images, 0, images_path);
  Require(image_magic == 0x00000803, ErrorKind::kIngestion,
          images_path.string() + ": bad magic at byte offset 0");
  const std::uint32_t label_magic = ReadBigEndian(labels, 0, labels_path);
  Require(label_magic == 0x00000801, ErrorKind::kIngestion,
          labels_path.string() + ": bad magic at byte offset 0");

  const std::size_t n = ReadBigEndian(images, 4, images_path);
  const std::size_t rows = ReadBigEndian(images, 8, images_path);
  const std::size_t cols = ReadBigEndian(images, 12, images_path);
  const std::size_t n_labels = ReadBigEndian(labels, 4, labels_path);
  Require(n == n_labels, ErrorKind::kIngestion,
          "IDX image count " + std::to_string(n) + " differs from label count " +
              std::to_string(n_labels));
  const std::size_t d = rows * cols;
  const std::size_t image_end = 16 + n * d;
  Require(images.size() >= image_end, ErrorKind::kIngestion,
          images_path.string() + ": truncated at byte offset " +
              std::to_string(images.size()) + " (expected " +
              std::to_string(image_end) + " bytes)");
  Require(labels.size() >= 8 + n, ErrorKind::kIngestion,
          labels_path.string() + ": truncated at byte offset " +
              std::to_string(labels.size()) + " (expected " +
              std::to_string(8 + n) + " bytes)");

  Dataset ds;
  ds.features = Matrix(n, d);
  for (std::size_t i = 0; i < n * d; ++i) {
    ds.features.data()[i] = static_cast<double>(images[16 + i]) / 127.5 - 1.0;
  }
  int max_label = 0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = labels[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.class_count = max_label + 1;
  ds.schema.label_name = "label";
  ds.schema.columns.reserve(d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      ColumnSpec spec;
      spec.name = "px_" + std::to_string(r) + "_" + std::to_string(c);
      spec.min = 0.0;
      spec.max = 255.0;
      ds.schema.columns.push_back(std::move(spec));
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

FeatureSchema NumericSchema(std::size_t d) {
  FeatureSchema schema;
  schema.label_name = "label";
  for (std::size_t j = 0; j < d; ++j) {
    ColumnSpec spec;
    spec.name = "x" + std::to_string(j);
    spec.min = -1.0;
    spec.max = 1.0;
    schema.columns.push_back(std::move(spec));
  }
  return schema;
}

Matrix BlobMeans(Rng& rng, const BlobOptions& o) {
  const auto k = static_cast<std::size_t>(o.class_count);
  Matrix means(k, o.dim);
  if (k <= o.dim) {
    // Scaled simplex corners: pairwise distance is exactly `separation`.
    const double a = o.separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < k; ++c) means(c, c) = a;
  } else {
    for (std::size_t c = 0; c < k; ++c) {
      auto r = means.row(c);
      for (double& v : r) v = rng.Normal();
      const double n = Norm2(r);
      for (double& v : r) v *= 0.5 * o.separation / (n > 0 ? n : 1.0);
    }
  }
  for (std::size_t j = 0; j < o.dim; ++j) {
    double centre = 0.0;
    for (std::size_t c = 0; c < k; ++c) centre += means(c, j);
    centre /= static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) means(c, j) -= centre;
  }
  return means;
}

}  // namespace

Dataset SynthBlobs(Rng& rng, const BlobOptions& o) {
  Require(o.dim >= 2, ErrorKind::kParameter, "synth_blobs needs d >= 2");
  Require(o.class_count >= 1, ErrorKind::kParameter, "synth_blobs needs class_count >= 1");
  Require(o.separation >= 0.0 && o.spread > 0.0, ErrorKind::kParameter,
          "synth_blobs needs separation >= 0 and spread > 0");
  const auto k = static_cast<std::size_t>(o.class_count);
  const Matrix means = BlobMeans(rng, o);
  Dataset ds;
  ds.class_count = o.class_count;
  ds.schema = NumericSchema(o.dim);
  ds.features = Matrix(o.n_per_class * k, o.dim);
  ds.labels.reserve(o.n_per_class * k);
  std::size_t row = 0;
  for (std::size_t i = 0; i < o.n_per_class; ++i) {
    for (std::size_t c = 0; c < k; ++c, ++row) {
      for (std::size_t j = 0; j < o.dim; ++j) {
        ds.features(row, j) =
            std::clamp(means(c, j) + o.spread * rng.Normal(), -1.0, 1.0);
      }
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

Dataset SynthBlobsWithAttribute(Rng& rng, const BlobOptions& o,
                                std::size_t attribute_values, double leak) {
  Require(attribute_values >= 2, ErrorKind::kParameter,
          "attribute needs at least two values");
  Require(leak >= 0.0 && leak <= 1.0, ErrorKind::kParameter, "leak must lie in [0, 1]");
  Dataset base = SynthBlobs(rng, o);
  ColumnSpec attr;
  attr.name = "attr";
  attr.kind = ColumnKind::kCategorical;
  for (std::size_t v = 0; v < attribute_values; ++v) {
    attr.values.push_back("v" + std::to_string(v));
  }
  Dataset ds;
  ds.class_count = base.class_count;
  ds.labels = base.labels;
  ds.schema = base.schema;
  ds.schema.columns.push_back(attr);
  ds.features = Matrix(base.size(), o.dim + attribute_values);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::copy_n(base.features.row(i).begin(), o.dim, ds.features.row(i).begin());
    std::size_t value = rng.Index(attribute_values);
    if (rng.Uniform() < leak) {
      value = static_cast<std::size_t>(base.labels[i]) % attribute_values;
    }
    for (std::size_t v = 0; v < attribute_values; ++v) {
      ds.features(i, o.dim + v) = v == value ? 1.0 : -1.0;
    }
  }
  return ds;
}

SplitPlan MakeSplitPlan(Rng& rng, const Dataset& dataset, std::size_t subset_size) {
  Require(subset_size >= 2, ErrorKind::kParameter, "subset_size must be at least 2");
  Require(4 * subset_size <= dataset.size(), ErrorKind::kParameter,
          "split plan needs 4 x " + std::to_string(subset_size) + " rows but the dataset has " +
              std::to_string(dataset.size()));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.Shuffle(order);
  SplitPlan plan;
  const std::size_t half = subset_size / 2;
  for (std::size_t s = 0; s < 4; ++s) {
    auto first = order.begin() + static_cast<std::ptrdiff_t>(s * subset_size);
    plan.sets[s].train.assign(first, first + static_cast<std::ptrdiff_t>(half));
    plan.sets[s].test.assign(first + static_cast<std::ptrdiff_t>(half),
                             first + static_cast<std::ptrdiff_t>(subset_size));
  }
  return plan;
}

}  // namespace dpc
