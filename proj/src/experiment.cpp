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

#include "dpc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "dpc/error.hpp"
#include "dpc/model_io.hpp"

namespace dpc {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

json EpsilonJson(double eps) { return std::isinf(eps) ? json("inf") : json(eps); }

double ReadEpsilon(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    Fail(ErrorKind::kParameter, "epsilon must be a number or \"inf\", got \"" + s + "\"");
  }
  return j.get<double>();
}

json ConfigToJson(const ExperimentConfig& c) {
  json j;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind},
                  {"name", d.name},
                  {"path", d.path},
                  {"schema", d.schema_path},
                  {"labels", d.labels_path},
                  {"synth",
                   {{"n_per_class", d.blobs.n_per_class},
                    {"dim", d.blobs.dim},
                    {"class_count", d.blobs.class_count},
                    {"separation", d.blobs.separation},
                    {"spread", d.blobs.spread},
                    {"attribute_values", d.attribute_values},
                    {"leak", d.leak}}}};
  j["autoencoder"] = {{"encoder_widths", c.autoencoder.encoder_widths},
                      {"tied_weights", c.autoencoder.tied_weights},
                      {"epochs", c.autoencoder_training.epochs},
                      {"batch_size", c.autoencoder_training.batch_size},
                      {"learning_rate", c.autoencoder_training.adam.learning_rate}};
  j["epsilon"] = EpsilonJson(c.epsilon);
  j["epsilons"] = json::array();
  for (double e : c.epsilons) j["epsilons"].push_back(EpsilonJson(e));
  j["search"] = {{"preset", c.search_preset},     {"alpha", c.search.alpha},
                 {"beta", c.search.beta},         {"gamma", c.search.gamma},
                 {"iterations", c.search.iterations}, {"step_size", c.search.step_size}};
  j["explain"] = {{"queries", c.explain.queries},
                  {"replicates", c.explain.replicates},
                  {"jitter", c.explain.jitter}};
  j["target"] = {{"hidden_widths", c.target.hidden_widths},
                 {"activation", ActivationName(c.target.activation)},
                 {"epochs", c.target_training.epochs},
                 {"batch_size", c.target_training.batch_size},
                 {"learning_rate", c.target_training.adam.learning_rate}};
  const auto& a = c.attack;
  j["attack"] = {{"kind", a.kind},
                 {"query_counts", a.query_counts},
                 {"per_query", a.per_query},
                 {"subset_size", a.subset_size},
                 {"generators", a.generators},
                 {"scenarios", a.scenarios},
                 {"attribute", a.attribute},
                 {"baseline_steps", a.baseline_steps},
                 {"baseline_step_size", a.baseline_step_size},
                 {"surrogate_epochs", a.surrogate_training.epochs},
                 {"surrogate_batch_size", a.surrogate_training.batch_size},
                 {"surrogate_learning_rate", a.surrogate_training.adam.learning_rate},
                 {"attack_epochs", a.attack_training.epochs},
                 {"attack_batch_size", a.attack_training.batch_size},
                 {"attack_learning_rate", a.attack_training.adagrad.learning_rate},
                 {"attack_decay", a.attack_training.adagrad.decay}};
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  j["holdout_fraction"] = c.holdout_fraction;
  j["workers"] = c.workers;
  return j;
}

ExperimentConfig ConfigFromJson(const json& j) {
  ExperimentConfig c;
  const json& d = j.at("dataset");
  c.dataset.kind = d.at("kind").get<std::string>();
  c.dataset.name = d.at("name").get<std::string>();
  c.dataset.path = d.at("path").get<std::string>();
  c.dataset.schema_path = d.at("schema").get<std::string>();
  c.dataset.labels_path = d.at("labels").get<std::string>();
  const json& s = d.at("synth");
  c.dataset.blobs.n_per_class = s.at("n_per_class").get<std::size_t>();
  c.dataset.blobs.dim = s.at("dim").get<std::size_t>();
  c.dataset.blobs.class_count = s.at("class_count").get<int>();
  c.dataset.blobs.separation = s.at("separation").get<double>();
  c.dataset.blobs.spread = s.at("spread").get<double>();
  c.dataset.attribute_values = s.at("attribute_values").get<std::size_t>();
  c.dataset.leak = s.at("leak").get<double>();

  const json& ae = j.at("autoencoder");
  c.autoencoder.encoder_widths = ae.at("encoder_widths").get<std::vector<std::size_t>>();
  c.autoencoder.tied_weights = ae.at("tied_weights").get<bool>();
  c.autoencoder_training.epochs = ae.at("epochs").get<std::size_t>();
  c.autoencoder_training.batch_size = ae.at("batch_size").get<std::size_t>();
  c.autoencoder_training.adam.learning_rate = ae.at("learning_rate").get<double>();

  c.epsilon = ReadEpsilon(j.at("epsilon"));
  c.epsilons.clear();
  for (const json& e : j.at("epsilons")) c.epsilons.push_back(ReadEpsilon(e));

  const json& se = j.at("search");
  c.search_preset = se.at("preset").get<std::string>();
  c.search.alpha = se.at("alpha").get<double>();
  c.search.beta = se.at("beta").get<double>();
  c.search.gamma = se.at("gamma").get<double>();
  c.search.iterations = se.at("iterations").get<std::size_t>();
  c.search.step_size = se.at("step_size").get<double>();

  const json& ex = j.at("explain");
  c.explain.queries = ex.at("queries").get<std::size_t>();
  c.explain.replicates = ex.at("replicates").get<std::size_t>();
  c.explain.jitter = ex.at("jitter").get<double>();

  const json& t = j.at("target");
  c.target.hidden_widths = t.at("hidden_widths").get<std::vector<std::size_t>>();
  c.target.activation = ParseActivation(t.at("activation").get<std::string>());
  c.target_training.epochs = t.at("epochs").get<std::size_t>();
  c.target_training.batch_size = t.at("batch_size").get<std::size_t>();
  c.target_training.adam.learning_rate = t.at("learning_rate").get<double>();

  const json& a = j.at("attack");
  c.attack.kind = a.at("kind").get<std::string>();
  c.attack.query_counts = a.at("query_counts").get<std::vector<std::size_t>>();
  c.attack.per_query = a.at("per_query").get<std::size_t>();
  c.attack.subset_size = a.at("subset_size").get<std::size_t>();
  c.attack.generators = a.at("generators").get<std::vector<std::string>>();
  c.attack.scenarios = a.at("scenarios").get<std::vector<std::string>>();
  c.attack.attribute = a.at("attribute").get<std::string>();
  c.attack.baseline_steps = a.at("baseline_steps").get<std::size_t>();
  c.attack.baseline_step_size = a.at("baseline_step_size").get<double>();
  c.attack.surrogate_training.epochs = a.at("surrogate_epochs").get<std::size_t>();
  c.attack.surrogate_training.batch_size = a.at("surrogate_batch_size").get<std::size_t>();
  c.attack.surrogate_training.adam.learning_rate =
      a.at("surrogate_learning_rate").get<double>();
  c.attack.attack_training.epochs = a.at("attack_epochs").get<std::size_t>();
  c.attack.attack_training.batch_size = a.at("attack_batch_size").get<std::size_t>();
  c.attack.attack_training.adagrad.learning_rate =
      a.at("attack_learning_rate").get<double>();
  c.attack.attack_training.adagrad.decay = a.at("attack_decay").get<double>();

  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.out_dir = j.at("out_dir").get<std::string>();
  c.holdout_fraction = j.at("holdout_fraction").get<double>();
  c.workers = j.at("workers").get<std::size_t>();
  return c;
}

// Overlays `patch` onto `base`, rejecting keys `base` does not have.
void MergeInto(json& base, const json& patch, const std::string& where) {
  Require(patch.is_object(), ErrorKind::kParameter,
          "config section " + (where.empty() ? std::string("/") : where) +
              " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where + "/" + it.key();
    Require(base.contains(it.key()), ErrorKind::kParameter, "unknown config key " + key);
    json& slot = base[it.key()];
    if (slot.is_object() && !it.value().is_null()) {
      MergeInto(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

ExperimentConfig ParseChecked(const json& doc) {
  try {
    return ConfigFromJson(doc);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParameter, std::string("invalid config value: ") + e.what());
  }
}

bool Contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

ExperimentConfig ExperimentConfig::FromJsonText(const std::string& text) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParameter, std::string("config is not valid JSON: ") + e.what());
  }
  json doc = ConfigToJson(ExperimentConfig{});
  MergeInto(doc, patch, "");
  return ParseChecked(doc);
}

ExperimentConfig ExperimentConfig::LoadFile(const fs::path& path) {
  Require(fs::exists(path), ErrorKind::kIo, "config file not found: " + path.string());
  return FromJsonText(ReadTextFile(path));
}

std::string ExperimentConfig::ToJsonText() const { return ConfigToJson(*this).dump(2) + "\n"; }

namespace {

json::json_pointer ConfigPointer(const json& doc, const std::string& key) {
  std::string pointer = key;
  if (pointer.empty() || pointer[0] != '/') {
    pointer = "/" + pointer;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
  }
  json::json_pointer ptr;
  try {
    ptr = json::json_pointer(pointer);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kParameter, "bad config key '" + key + "': " + e.what());
  }
  Require(doc.contains(ptr), ErrorKind::kParameter, "unknown config key " + pointer);
  return ptr;
}

}  // namespace

std::string ExperimentConfig::Get(const std::string& key) const {
  const json doc = ConfigToJson(*this);
  return doc[ConfigPointer(doc, key)].dump();
}

void ExperimentConfig::Set(const std::string& key, const std::string& value_json) {
  json value;
  try {
    value = json::parse(value_json);
  } catch (const json::exception&) {
    value = value_json;  // bare strings
  }
  json doc = ConfigToJson(*this);
  doc[ConfigPointer(doc, key)] = value;
  *this = ParseChecked(doc);
}

SearchConfig ExperimentConfig::ResolvedSearch() const {
  SearchConfig s = search;
  if (!search_preset.empty()) {
    const SearchConfig p = SearchConfig::Preset(search_preset);
    s.alpha = p.alpha;
    s.beta = p.beta;
    s.gamma = p.gamma;
  }
  return s;
}

std::string ExperimentConfig::dataset_name() const {
  if (!dataset.name.empty()) return dataset.name;
  if (dataset.kind == "synth") return "synth";
  return fs::path(dataset.path).stem().string();
}

void ExperimentConfig::Validate() const {
  const auto positive_eps = [](double e) { return e > 0.0 && !std::isnan(e); };
  Require(positive_eps(epsilon), ErrorKind::kParameter, "epsilon must be positive");
  for (double e : epsilons) {
    Require(positive_eps(e), ErrorKind::kParameter, "every sweep epsilon must be positive");
  }
  Require(!seeds.empty(), ErrorKind::kParameter, "at least one seed is required");
  Require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorKind::kParameter,
          "holdout_fraction must lie in (0, 1)");
  autoencoder.Validate();
  target.Validate();
  ResolvedSearch().Validate();
  Require(explain.queries > 0 && explain.replicates > 0, ErrorKind::kParameter,
          "explain needs positive queries and replicates");
  Require(explain.jitter >= 0.0, ErrorKind::kParameter, "jitter must be non-negative");

  const auto& d = dataset;
  if (d.kind == "synth") {
    Require(d.blobs.n_per_class > 0 && d.blobs.dim > 0 && d.blobs.class_count >= 2,
            ErrorKind::kParameter, "synthetic data needs rows, columns and two classes");
    Require(d.leak >= 0.0 && d.leak <= 1.0, ErrorKind::kParameter,
            "leak must lie in [0, 1]");
  } else if (d.kind == "csv") {
    Require(!d.path.empty(), ErrorKind::kParameter, "csv dataset needs a path");
    Require(!d.schema_path.empty(), ErrorKind::kParameter, "csv dataset needs a schema");
  } else if (d.kind == "idx") {
    Require(!d.path.empty() && !d.labels_path.empty(), ErrorKind::kParameter,
            "idx dataset needs image and label paths");
  } else {
    Fail(ErrorKind::kParameter, "unknown dataset kind '" + d.kind + "'");
  }

  const auto& a = attack;
  Require(a.kind == "extract" || a.kind == "membership" || a.kind == "attribute",
          ErrorKind::kParameter, "unknown attack kind '" + a.kind + "'");
  Require(!a.query_counts.empty(), ErrorKind::kParameter, "attack needs query counts");
  for (std::size_t q : a.query_counts) {
    Require(q > 0, ErrorKind::kParameter, "query counts must be positive");
  }
  Require(!a.generators.empty() && !a.scenarios.empty(), ErrorKind::kParameter,
          "attack needs generators and scenarios");
  for (const auto& g : a.generators) {
    Require(g == "base" || g == "non_dp" || g == "dpc", ErrorKind::kParameter,
            "unknown generator '" + g + "'");
  }
  for (const auto& s : a.scenarios) {
    Require(s == "known" || s == "unknown", ErrorKind::kParameter,
            "unknown scenario '" + s + "'");
  }
  Require(a.baseline_step_size > 0.0, ErrorKind::kParameter,
          "baseline step size must be positive");
}

// ---------------------------------------------------------------------------
// Metric rows and CSV helpers

std::string FormatReal(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string CsvCell(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string MetricRowsToJsonText(const std::vector<MetricRow>& rows) {
  json doc;
  doc["rows"] = json::array();
  for (const auto& r : rows) {
    doc["rows"].push_back({{"metric", r.metric},
                           {"dataset", r.dataset},
                           {"epsilon", std::isinf(r.epsilon) ? json() : json(r.epsilon)},
                           {"generator", r.generator},
                           {"scenario", r.scenario},
                           {"seed", r.seed},
                           {"value", r.value}});
  }
  return doc.dump(1) + "\n";
}

std::vector<MetricRow> MetricRowsFromJsonText(const std::string& text) {
  try {
    const json doc = json::parse(text);
    std::vector<MetricRow> rows;
    for (const json& r : doc.at("rows")) {
      MetricRow m;
      m.metric = r.at("metric").get<std::string>();
      m.dataset = r.at("dataset").get<std::string>();
      m.epsilon = r.at("epsilon").is_null() ? std::numeric_limits<double>::infinity()
                                            : r.at("epsilon").get<double>();
      m.generator = r.at("generator").get<std::string>();
      m.scenario = r.at("scenario").get<std::string>();
      m.seed = r.at("seed").get<std::uint64_t>();
      m.value = r.at("value").get<double>();
      rows.push_back(std::move(m));
    }
    return rows;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kIngestion, std::string("malformed metrics file: ") + e.what());
  }
}

namespace {

constexpr const char* kReportHeader = "metric,dataset,epsilon,generator,scenario,seed,value";

std::string MetricRowCsv(const MetricRow& r) {
  return CsvCell(r.metric) + "," + CsvCell(r.dataset) + "," + FormatReal(r.epsilon) + "," +
         CsvCell(r.generator) + "," + CsvCell(r.scenario) + "," + std::to_string(r.seed) +
         "," + FormatReal(r.value);
}

// The scenario column carries the query count, and the attack variant when
// it is not the default one: "known/q250", "unknown/q500/threshold".
MetricRow ReportRow(const AttackReport& r) {
  std::string scenario = r.scenario + "/q" + std::to_string(r.query_count);
  if (r.kind == "membership_threshold") scenario += "/threshold";
  return {r.metric, r.dataset, r.epsilon, r.generator, scenario, r.seed, r.value};
}

fs::path RunDir(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.seeds.size() == 1) return config.out_dir;
  return fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
}

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double ParseReal(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    Fail(ErrorKind::kIngestion, "not a number: '" + s + "'");
  }
  Require(used == s.size(), ErrorKind::kIngestion, "not a number: '" + s + "'");
  return v;
}

}  // namespace

std::string MetricRowsToCsv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& r : rows) out += MetricRowCsv(r) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Data

Dataset LoadExperimentData(const ExperimentConfig& config, std::uint64_t seed) {
  const auto& d = config.dataset;
  Dataset data;
  if (d.kind == "synth") {
    Rng rng = Rng(seed).Substream("data");
    data = d.attribute_values > 0
               ? SynthBlobsWithAttribute(rng, d.blobs, d.attribute_values, d.leak)
               : SynthBlobs(rng, d.blobs);
  } else if (d.kind == "csv") {
    Require(fs::exists(d.schema_path), ErrorKind::kIo,
            "schema file not found: " + d.schema_path);
    Require(fs::exists(d.path), ErrorKind::kIo, "dataset file not found: " + d.path);
    data = LoadCsv(d.path, FeatureSchema::LoadFile(d.schema_path));
  } else if (d.kind == "idx") {
    data = LoadIdx(d.path, d.labels_path);
  } else {
    Fail(ErrorKind::kParameter, "unknown dataset kind '" + d.kind + "'");
  }
  Require(data.size() > 0, ErrorKind::kIngestion, "dataset is empty");
  return data;
}

TrainHoldout SplitTrainHoldout(const Dataset& data, double holdout_fraction,
                               std::uint64_t seed) {
  Require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorKind::kParameter,
          "holdout_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).Substream("split");
  rng.Shuffle(order);
  const auto n_hold = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(data.size())));
  Require(n_hold > 0 && n_hold < data.size(), ErrorKind::kParameter,
          "dataset too small for a train / holdout split");
  const std::span<const std::size_t> all(order);
  return {data.Subset(all.subspan(n_hold)), data.Subset(all.first(n_hold))};
}

// ---------------------------------------------------------------------------
// Explain

ExplainMetrics ExplainQueries(const Autoencoder& ae, const PrototypeSet& prototypes,
                              const DenseNet& target_model, const Matrix& queries,
                              const SearchConfig& search, const ExplainConfig& explain,
                              const Rng& rng) {
  Require(queries.rows() > 0, ErrorKind::kParameter, "no queries to explain");
  Require(explain.replicates > 0, ErrorKind::kParameter, "replicates must be positive");
  const std::size_t classes = target_model.output_dim();
  Rng search_rng = rng;
  std::vector<ExplainRecord> records;
  records.reserve(queries.rows() * explain.replicates);
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto q = queries.row(i);
    const int y = PredictLabel(target_model, q);
    const int target =
        static_cast<int>((static_cast<std::size_t>(y) + 1 +
                          (classes > 2 ? search_rng.Index(classes - 1) : 0)) %
                         classes);
    for (std::size_t r = 0; r < explain.replicates; ++r) {
      SearchConfig c = search;
      c.target_class = target;
      c.init_jitter = r == 0 ? 0.0 : explain.jitter;
      CounterfactualResult cf =
          SearchCounterfactual(prototypes, q, target_model, ae, c, search_rng);
      records.push_back({i, r, target, cf.predicted_class, cf.flipped,
                         Vector(q.begin(), q.end()), std::move(cf.sample)});
    }
  }
  return ScoreExplainRecords(std::move(records));
}

ExplainMetrics ScoreExplainRecords(std::vector<ExplainRecord> records) {
  Require(!records.empty(), ErrorKind::kParameter, "no counterfactual records");
  ExplainMetrics m;
  std::size_t queries = 0;
  std::size_t flipped = 0;
  double distance_sum = 0.0;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    double per_query = 0.0;
    while (j < records.size() && records[j].query_index == records[i].query_index) {
      const auto& r = records[j];
      Vector diff(r.query.size());
      for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = r.counterfactual[k] - r.query[k];
      per_query += Norm2(diff);
      if (r.replicate == 0 && r.flipped) ++flipped;
      ++j;
    }
    distance_sum += per_query / static_cast<double>(j - i);
    ++queries;
    i = j;
  }
  m.flipping_ratio = static_cast<double>(flipped) / static_cast<double>(queries);
  m.average_distance = distance_sum / static_cast<double>(queries);
  m.records = std::move(records);
  return m;
}

std::string ExplainRecordsToCsv(const std::vector<ExplainRecord>& records) {
  std::string out = "query_index,replicate,target_class,predicted_class,flipped";
  const std::size_t d = records.empty() ? 0 : records.front().query.size();
  for (std::size_t k = 0; k < d; ++k) out += ",q_" + std::to_string(k);
  for (std::size_t k = 0; k < d; ++k) out += ",cf_" + std::to_string(k);
  out += "\n";
  for (const auto& r : records) {
    out += std::to_string(r.query_index) + "," + std::to_string(r.replicate) + "," +
           std::to_string(r.target_class) + "," + std::to_string(r.predicted_class) + "," +
           (r.flipped ? "1" : "0");
    for (double v : r.query) out += "," + FormatReal(v);
    for (double v : r.counterfactual) out += "," + FormatReal(v);
    out += "\n";
  }
  return out;
}

std::vector<ExplainRecord> ExplainRecordsFromCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kIngestion,
          "counterfactual file is empty");
  const std::size_t columns = SplitLine(line).size();
  Require(columns >= 5 && (columns - 5) % 2 == 0, ErrorKind::kIngestion,
          "counterfactual file has a malformed header");
  const std::size_t d = (columns - 5) / 2;
  std::vector<ExplainRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitLine(line);
    Require(cells.size() == columns, ErrorKind::kIngestion,
            "counterfactual file line " + std::to_string(line_no) + " has " +
                std::to_string(cells.size()) + " fields, expected " +
                std::to_string(columns));
    ExplainRecord r;
    r.query_index = static_cast<std::size_t>(ParseReal(cells[0]));
    r.replicate = static_cast<std::size_t>(ParseReal(cells[1]));
    r.target_class = static_cast<int>(ParseReal(cells[2]));
    r.predicted_class = static_cast<int>(ParseReal(cells[3]));
    r.flipped = cells[4] == "1";
    for (std::size_t k = 0; k < d; ++k) r.query.push_back(ParseReal(cells[5 + k]));
    for (std::size_t k = 0; k < d; ++k) r.counterfactual.push_back(ParseReal(cells[5 + d + k]));
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Commands, one seed

std::vector<MetricRow> RunTrainAe(const ExperimentConfig& config, std::uint64_t seed,
                                  const fs::path& dir) {
  const Dataset data = LoadExperimentData(config, seed);
  const TrainHoldout split = SplitTrainHoldout(data, config.holdout_fraction, seed);
  const Rng root(seed);

  const DenseNet target = TrainClassifier(config.target, split.train,
                                          config.target_training, root.Substream("target"));
  TrainedAutoencoder ae =
      TrainAutoencoder(config.autoencoder, split.train, config.epsilon,
                       config.autoencoder_training, root.Substream("ae"), &split.holdout);
  const PrototypeSet prototypes = BuildPrototypes(ae.model, split.train);

  fs::create_directories(dir);
  WriteTextFile(dir / "model.json",
                AutoencoderToJsonText({ae.model, MakeNoiseReference(ae.noise, "noise.json")}));
  WriteTextFile(dir / "noise.json", ae.noise.ToJsonText());
  WriteTextFile(dir / "prototypes.json", prototypes.ToJsonText());
  WriteTextFile(dir / "target.json", ClassifierToJsonText({target, config.target}));
  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < ae.epoch_loss.size(); ++e) {
    loss += std::to_string(e) + "," + FormatReal(ae.epoch_loss[e]) + "\n";
  }
  WriteTextFile(dir / "loss.csv", loss);

  std::vector<MetricRow> rows{
      {"MSE", config.dataset_name(), config.epsilon, "dpc", "", seed, ae.holdout_mse}};
  WriteTextFile(dir / "train-ae.metrics.json", MetricRowsToJsonText(rows));
  return rows;
}

std::vector<MetricRow> RunExplain(const ExperimentConfig& config, std::uint64_t seed,
                                  const fs::path& dir, const std::string& queries_path) {
  for (const char* f : {"model.json", "prototypes.json", "target.json"}) {
    Require(fs::exists(dir / f), ErrorKind::kIo,
            "missing " + (dir / f).string() + " (run train-ae first)");
  }
  const AutoencoderFile model = AutoencoderFromJsonText(ReadTextFile(dir / "model.json"));
  const PrototypeSet prototypes =
      PrototypeSet::FromJsonText(ReadTextFile(dir / "prototypes.json"));
  const ClassifierFile target = ClassifierFromJsonText(ReadTextFile(dir / "target.json"));

  Matrix queries;
  if (!queries_path.empty()) {
    Require(fs::exists(queries_path), ErrorKind::kIo,
            "queries file not found: " + queries_path);
    Require(config.dataset.kind == "csv", ErrorKind::kParameter,
            "a queries file needs a csv dataset schema");
    queries = LoadCsv(queries_path, FeatureSchema::LoadFile(config.dataset.schema_path))
                  .features;
  } else {
    const TrainHoldout split =
        SplitTrainHoldout(LoadExperimentData(config, seed), config.holdout_fraction, seed);
    const std::size_t n = std::min(config.explain.queries, split.holdout.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    queries = split.holdout.features.SelectRows(idx);
  }
  Require(queries.cols() == model.model.input_dim(), ErrorKind::kStructural,
          "query width does not match the trained model");

  const ExplainMetrics m =
      ExplainQueries(model.model, prototypes, target.net, queries, config.ResolvedSearch(),
                     config.explain, Rng(seed).Substream("search"));
  WriteTextFile(dir / "counterfactuals.csv", ExplainRecordsToCsv(m.records));
  const double eps = model.noise.epsilon;
  std::vector<MetricRow> rows{
      {"FR", config.dataset_name(), eps, "dpc", "", seed, m.flipping_ratio},
      {"AD", config.dataset_name(), eps, "dpc", "", seed, m.average_distance}};
  WriteTextFile(dir / "explain.metrics.json", MetricRowsToJsonText(rows));
  return rows;
}

std::vector<AttackReport> RunAttack(const ExperimentConfig& config, std::uint64_t seed,
                                    const fs::path& dir) {
  const AttackConfig& ac = config.attack;
  const Dataset data = LoadExperimentData(config, seed);
  const Rng root(seed);
  const std::size_t subset = ac.subset_size > 0 ? ac.subset_size : data.size() / 4;
  Rng split_rng = root.Substream("split");
  const SplitPlan plan = MakeSplitPlan(split_rng, data, subset);
  const std::size_t classes = static_cast<std::size_t>(std::max(data.class_count, 2));

  const Dataset owner_train = data.Subset(plan.sets[0].train);
  const Dataset owner_test = data.Subset(plan.sets[0].test);
  const DenseNet target = TrainClassifier(config.target, owner_train,
                                          config.target_training, root.Substream("target"));

  std::optional<TrainedAutoencoder> ae;
  PrototypeSet prototypes;
  if (Contains(ac.generators, "dpc")) {
    ae = TrainAutoencoder(config.autoencoder, owner_train, config.epsilon,
                          config.autoencoder_training, root.Substream("ae"));
    prototypes = BuildPrototypes(ae->model, owner_train);
  }

  std::vector<std::size_t> pool;
  for (std::size_t k = 1; k < plan.sets.size(); ++k) {
    pool.insert(pool.end(), plan.sets[k].train.begin(), plan.sets[k].train.end());
    pool.insert(pool.end(), plan.sets[k].test.begin(), plan.sets[k].test.end());
  }
  Rng query_rng = root.Substream("queries");
  std::vector<std::size_t> shuffled = pool;
  query_rng.Shuffle(shuffled);

  const Rng attack_rng = root.Substream("attack");
  std::size_t attribute_column = 0;
  if (ac.kind == "attribute") {
    attribute_column = data.schema.column_index(ac.attribute);
    Require(data.schema.columns[attribute_column].kind == ColumnKind::kCategorical,
            ErrorKind::kParameter, "attribute '" + ac.attribute + "' is not categorical");
  }

  // Membership: candidates, shadows and attack nets are shared across
  // generators.
  MembershipCandidates candidates;
  std::map<std::string, std::vector<ShadowModel>> shadows;
  std::map<std::string, DenseNet> attack_nets;
  if (ac.kind == "membership") {
    Rng cand_rng = attack_rng.Substream("candidates");
    candidates =
        BuildMembershipCandidates(data, plan.sets[0].train, plan.sets[0].test, cand_rng);
    for (const auto& scenario : ac.scenarios) {
      const ClassifierSpec spec =
          scenario == "known" ? config.target : WidenSpec(config.target);
      shadows[scenario] = TrainShadowModels(data, plan, spec, ac.surrogate_training,
                                            attack_rng.Substream("shadows_" + scenario));
      attack_nets[scenario] = TrainMembershipAttackNet(
          shadows[scenario], AttackNetSpec::ForInput(classes), ac.attack_training,
          attack_rng.Substream("attack_net_" + scenario));
    }
  }
  const Dataset adversary = data.Subset(pool);

  std::vector<AttackReport> reports;
  fs::create_directories(dir);
  for (std::size_t xq : ac.query_counts) {
    Require(xq <= shuffled.size(), ErrorKind::kParameter,
            "query count " + std::to_string(xq) + " exceeds the adversary pool (" +
                std::to_string(shuffled.size()) + " rows)");
    const Matrix queries = data.features.SelectRows(std::span(shuffled).first(xq));
    for (const auto& gen : ac.generators) {
      CounterfactualGenerator generator;
      if (gen == "non_dp") {
        generator = MakeBaselineGenerator(ac.baseline_steps, ac.baseline_step_size);
      } else if (gen == "dpc") {
        generator = MakeDpcGenerator(ae->model, prototypes, config.ResolvedSearch());
      }
      Rng transfer_rng = attack_rng.Substream("transfer_" + gen + "_" + std::to_string(xq));
      const TransferSet transfer = BuildTransferSet(
          queries, target, generator, gen == "base" ? 0 : ac.per_query, transfer_rng);
      for (const auto& scenario : ac.scenarios) {
        const std::string tag = scenario + "_" + std::to_string(xq);
        SurrogateResult sur = ExtractSurrogate(
            transfer, config.target, scenario == "known", classes, ac.surrogate_training,
            attack_rng.Substream("surrogate_" + tag), owner_test, &target);
        std::vector<AttackReport> out;
        if (ac.kind == "extract") {
          out.push_back(sur.report);
        } else if (ac.kind == "membership") {
          out.push_back(ThresholdMembershipInference(sur.net, shadows[scenario], candidates));
          out.push_back(
              EvaluateMembershipAttack(attack_nets[scenario], sur.net, candidates));
        } else {
          out.push_back(AttributeInference(sur.net, ac.attribute, adversary, owner_train,
                                           ac.attack_training,
                                           attack_rng.Substream("attribute_" + tag)));
        }
        for (auto& r : out) {
          r.dataset = config.dataset_name();
          r.query_count = xq;
          r.epsilon = config.epsilon;
          r.generator = gen;
          r.scenario = scenario;
          r.seed = seed;
          WriteTextFile(dir / (r.kind + "_q" + std::to_string(xq) + "_" + gen + "_" +
                               scenario + ".report.json"),
                        r.ToJsonText());
          reports.push_back(std::move(r));
        }
      }
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Commands, all seeds

std::vector<MetricRow> CmdTrainAe(const ExperimentConfig& config) {
  config.Validate();
  std::vector<MetricRow> rows;
  for (std::uint64_t seed : config.seeds) {
    auto r = RunTrainAe(config, seed, RunDir(config, seed));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

std::vector<MetricRow> CmdExplain(const ExperimentConfig& config,
                                  const std::string& queries_path) {
  config.Validate();
  std::vector<MetricRow> rows;
  for (std::uint64_t seed : config.seeds) {
    auto r = RunExplain(config, seed, RunDir(config, seed), queries_path);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

std::vector<MetricRow> CmdAttack(const ExperimentConfig& config) {
  config.Validate();
  std::vector<MetricRow> rows;
  for (std::uint64_t seed : config.seeds) {
    const fs::path dir = RunDir(config, seed);
    const auto reports = RunAttack(config, seed, dir);
    std::vector<MetricRow> seed_rows;
    for (const auto& r : reports) seed_rows.push_back(ReportRow(r));
    WriteTextFile(dir / "attack.csv", MetricRowsToCsv(seed_rows));
    rows.insert(rows.end(), seed_rows.begin(), seed_rows.end());
  }
  return rows;
}

std::vector<MetricRow> CmdSweep(const ExperimentConfig& config) {
  config.Validate();
  Require(!config.epsilons.empty(), ErrorKind::kParameter, "sweep needs epsilons");
  struct Cell {
    double epsilon;
    std::uint64_t seed;
    std::vector<MetricRow> rows;
    std::string error;
    ErrorKind kind = ErrorKind::kTraining;
  };
  std::vector<Cell> cells;
  for (double e : config.epsilons) {
    for (std::uint64_t s : config.seeds) cells.push_back({e, s, {}, {}});
  }
  const auto cell_dir = [&](const Cell& c) {
    std::ostringstream name;
    name << "eps_" << c.epsilon;
    return fs::path(config.out_dir) / name.str() / ("seed_" + std::to_string(c.seed));
  };

  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        ExperimentConfig cc = config;
        cc.epsilon = c.epsilon;
        cc.seeds = {c.seed};
        const fs::path dir = cell_dir(c);
        c.rows = RunTrainAe(cc, c.seed, dir);
        auto ex = RunExplain(cc, c.seed, dir);
        c.rows.insert(c.rows.end(), ex.begin(), ex.end());
      } catch (const Error& e) {
        c.error = e.what();
        c.kind = e.kind();
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  std::size_t workers = config.workers > 0
                            ? config.workers
                            : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, cells.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<MetricRow> rows;
  std::string sweep = "metric,epsilon,seed,value\n";
  std::string failures = "epsilon,seed,error\n";
  std::size_t failed = 0;
  for (const auto& c : cells) {
    if (!c.error.empty()) {
      ++failed;
      failures += FormatReal(c.epsilon) + "," + std::to_string(c.seed) + "," +
                  CsvCell(c.error) + "\n";
      continue;
    }
    for (const auto& r : c.rows) {
      sweep += CsvCell(r.metric) + "," + FormatReal(c.epsilon) + "," +
               std::to_string(c.seed) + "," + FormatReal(r.value) + "\n";
      rows.push_back(r);
    }
  }

  // Per (metric, epsilon) mean and sample standard deviation, in the order the
  // metrics and epsilons first appear.
  std::string plot = "metric,epsilon,mean,std,count\n";
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    if (!Contains(metrics, r.metric)) metrics.push_back(r.metric);
  }
  for (const auto& metric : metrics) {
    for (double e : config.epsilons) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.metric == metric && r.epsilon == e) v.push_back(r.value);
      }
      if (v.empty()) continue;
      double sum = 0.0;
      for (double x : v) sum += x;
      const double mean = sum / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      plot += CsvCell(metric) + "," + FormatReal(e) + "," + FormatReal(mean) + "," +
              FormatReal(sd) + "," + std::to_string(v.size()) + "\n";
    }
  }
  const fs::path out(config.out_dir);
  WriteTextFile(out / "sweep.csv", sweep);
  WriteTextFile(out / "plot_data.csv", plot);
  WriteTextFile(out / "failures.csv", failures);
  if (failed == cells.size()) {
    Fail(cells.front().kind, "every sweep cell failed; first error: " + cells.front().error);
  }
  return rows;
}

std::size_t CmdReport(const fs::path& directory, const fs::path& output_csv) {
  Require(fs::is_directory(directory), ErrorKind::kIo,
          "report directory not found: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const auto ends_with = [&](const std::string& suffix) {
      return name.size() >= suffix.size() &&
             name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".metrics.json") || ends_with(".report.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::string out = std::string(kReportHeader) + "\n";
  std::size_t count = 0;
  for (const auto& path : files) {
    const std::string rel = fs::relative(path, directory).generic_string();
    try {
      const std::string text = ReadTextFile(path);
      std::vector<MetricRow> rows;
      if (path.filename().string().find(".report.json") != std::string::npos) {
        rows.push_back(ReportRow(AttackReport::FromJsonText(text)));
      } else {
        rows = MetricRowsFromJsonText(text);
      }
      for (const auto& r : rows) {
        out += MetricRowCsv(r) + "\n";
        ++count;
      }
    } catch (const Error& e) {
      out += "warning," + CsvCell(rel + ": " + e.what()) + ",,,,,\n";
      ++count;
    }
  }
  WriteTextFile(output_csv, out);
  return count;
}

}  // namespace dpc
