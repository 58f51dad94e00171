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

// Command-line driver. Talks to the library through its C interface only.
//
//   dpc train-ae --config exp.json --epsilon 0.1
//   dpc explain  --config exp.json
//   dpc attack   --config exp.json --kind membership
//   dpc sweep    --config exp.json --epsilons 0.01,0.1,1
//   dpc report   out/

#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpc/dpc.h"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string epsilon;
  std::string dataset;
  std::string schema;
  std::string labels;
  std::vector<std::string> sets;
};

void AddCommonFlags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)");
  cmd->add_option("--seed", f.seed, "Experiment seed (replaces the config's seed list)");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
  cmd->add_option("--epsilon", f.epsilon, "Privacy budget (positive, or inf)");
  cmd->add_option("--dataset", f.dataset, "'synth', a CSV file or IDX images");
  cmd->add_option("--schema", f.schema, "Feature schema of a CSV dataset");
  cmd->add_option("--labels", f.labels, "IDX label file (selects IDX input)");
  cmd->add_option("--set", f.sets, "Override a config key: key=json (repeatable)");
}

using ConfigPtr = std::unique_ptr<dpc_config, decltype(&dpc_config_free)>;

int Report(dpc_status status) {
  if (status != DPC_OK) {
    std::fprintf(stderr, "error (%s): %s\n", dpc_status_name(status), dpc_last_error());
  }
  return dpc_exit_code(status);
}

std::string Quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Builds the configuration: file (or defaults), then --set, then flags.
dpc_status BuildConfig(const CommonFlags& f, ConfigPtr& out) {
  dpc_config* raw = nullptr;
  dpc_status st = f.config.empty() ? dpc_config_default(&raw)
                                   : dpc_config_load(f.config.c_str(), &raw);
  if (st != DPC_OK) return st;
  out.reset(raw);
  const auto set = [&](const std::string& key, const std::string& value) {
    return st == DPC_OK ? (st = dpc_config_set(raw, key.c_str(), value.c_str())) : st;
  };
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      st = dpc_config_set(raw, kv.c_str(), "");  // reports the malformed key
      if (st == DPC_OK) st = DPC_ERR_PARAMETER;
      return st;
    }
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) set("/seeds", "[" + std::to_string(*f.seed) + "]");
  if (!f.out_dir.empty()) set("/out_dir", Quote(f.out_dir));
  if (!f.epsilon.empty()) {
    set("/epsilon", f.epsilon == "inf" ? Quote("inf") : f.epsilon);
  }
  if (!f.dataset.empty()) {
    if (f.dataset == "synth") {
      set("/dataset/kind", Quote("synth"));
    } else {
      set("/dataset/kind", Quote(f.labels.empty() ? "csv" : "idx"));
      set("/dataset/path", Quote(f.dataset));
    }
  }
  if (!f.schema.empty()) set("/dataset/schema", Quote(f.schema));
  if (!f.labels.empty()) set("/dataset/labels", Quote(f.labels));
  if (st == DPC_OK) st = dpc_config_validate(raw);
  return st;
}

int RunWithConfig(const CommonFlags& f,
                  const std::function<dpc_status(const dpc_config*, char**)>& command) {
  ConfigPtr config(nullptr, &dpc_config_free);
  dpc_status st = BuildConfig(f, config);
  if (st != DPC_OK) return Report(st);
  char* csv = nullptr;
  st = command(config.get(), &csv);
  if (csv != nullptr) {
    std::fputs(csv, stdout);
    dpc_string_free(csv);
  }
  return Report(st);
}

std::string JoinJsonList(const std::vector<std::string>& items, bool quote) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    out += quote ? Quote(items[i]) : items[i];
  }
  return out + "]";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private counterfactuals: training, explanation and "
               "attack experiments"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* train = app.add_subcommand("train-ae", "Train the private autoencoder, "
                                               "prototypes and target model");
  AddCommonFlags(train, flags);

  std::string queries;
  auto* explain = app.add_subcommand("explain", "Search counterfactuals; emit FR and AD");
  AddCommonFlags(explain, flags);
  explain->add_option("--queries", queries, "CSV of query records (schema of --schema)");

  std::string kind;
  std::vector<std::string> query_counts;
  auto* attack = app.add_subcommand("attack", "Extraction / inference attack campaign");
  AddCommonFlags(attack, flags);
  attack->add_option("--kind", kind, "extract, membership or attribute");
  attack->add_option("--query-counts", query_counts, "|X_q| values")->delimiter(',');

  std::vector<std::string> epsilons;
  auto* sweep = app.add_subcommand("sweep", "Full pipeline over epsilons x seeds");
  AddCommonFlags(sweep, flags);
  sweep->add_option("--epsilons", epsilons, "Comma-separated budgets")->delimiter(',');

  std::string report_dir;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Merge metric and attack files into one CSV");
  AddCommonFlags(report, flags);
  report->add_option("directory", report_dir, "Directory to scan (default: --out-dir)");
  report->add_option("--output", report_out, "CSV path (default: <directory>/report.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train->parsed()) return RunWithConfig(flags, dpc_cmd_train_ae);
  if (explain->parsed()) {
    return RunWithConfig(flags, [&](const dpc_config* c, char** out) {
      return dpc_cmd_explain(c, queries.empty() ? nullptr : queries.c_str(), out);
    });
  }
  if (attack->parsed()) {
    if (!kind.empty()) flags.sets.push_back("/attack/kind=" + Quote(kind));
    if (!query_counts.empty()) {
      flags.sets.push_back("/attack/query_counts=" + JoinJsonList(query_counts, false));
    }
    return RunWithConfig(flags, dpc_cmd_attack);
  }
  if (sweep->parsed()) {
    if (!epsilons.empty()) {
      for (auto& e : epsilons) {
        if (e == "inf") e = Quote(e);
      }
      flags.sets.push_back("/epsilons=" + JoinJsonList(epsilons, false));
    }
    return RunWithConfig(flags, dpc_cmd_sweep);
  }
  if (report->parsed()) {
    std::string dir = report_dir;
    if (dir.empty()) {
      ConfigPtr config(nullptr, &dpc_config_free);
      dpc_status st = BuildConfig(flags, config);
      char* text = nullptr;
      if (st == DPC_OK) st = dpc_config_get(config.get(), "/out_dir", &text);
      if (st != DPC_OK) return Report(st);
      dir = text;  // a JSON string
      dpc_string_free(text);
      dir = dir.substr(1, dir.size() - 2);
    }
    const std::string out = report_out.empty() ? dir + "/report.csv" : report_out;
    std::size_t rows = 0;
    const dpc_status st = dpc_cmd_report(dir.c_str(), out.c_str(), &rows);
    if (st == DPC_OK) std::printf("%s: %zu rows\n", out.c_str(), rows);
    return Report(st);
  }
  return 2;
}
