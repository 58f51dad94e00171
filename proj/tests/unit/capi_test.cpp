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

// Exercises the library only through dpc.h, as the command line does.

#include "dpc/dpc.h"

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace {

struct Config {
  dpc_config* raw = nullptr;
  ~Config() { dpc_config_free(raw); }
};

std::string TakeString(char* s) {
  std::string out = s == nullptr ? "" : s;
  dpc_string_free(s);
  return out;
}

void SmallSetup(dpc_config* c, const std::string& out_dir) {
  ASSERT_EQ(dpc_config_set(c, "/dataset/synth/n_per_class", "100"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/dataset/synth/dim", "4"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/autoencoder/encoder_widths", "[4,2]"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/autoencoder/epochs", "30"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/target/epochs", "30"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/explain/queries", "10"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/explain/replicates", "2"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "/epsilon", "\"inf\""), DPC_OK);
  ASSERT_EQ(dpc_config_set(c, "out_dir", out_dir.c_str()), DPC_OK);
}

TEST(CApiTest, StatusNamesAndExitCodes) {
  EXPECT_EQ(dpc_exit_code(DPC_OK), 0);
  for (dpc_status s : {DPC_ERR_PARAMETER, DPC_ERR_STRUCTURAL, DPC_ERR_INGESTION, DPC_ERR_IO}) {
    EXPECT_EQ(dpc_exit_code(s), 2) << dpc_status_name(s);
  }
  EXPECT_EQ(dpc_exit_code(DPC_ERR_NUMERIC), 3);
  EXPECT_EQ(dpc_exit_code(DPC_ERR_TRAINING), 3);
  EXPECT_EQ(dpc_exit_code(DPC_ERR_INTERNAL), 1);
  EXPECT_STREQ(dpc_status_name(DPC_OK), "ok");
  EXPECT_STRNE(dpc_version(), "");
}

TEST(CApiTest, ConfigSetGetAndErrors) {
  Config c;
  ASSERT_EQ(dpc_config_default(&c.raw), DPC_OK);
  EXPECT_STREQ(dpc_last_error(), "");
  ASSERT_EQ(dpc_config_set(c.raw, "attack.kind", "membership"), DPC_OK);
  char* value = nullptr;
  ASSERT_EQ(dpc_config_get(c.raw, "/attack/kind", &value), DPC_OK);
  EXPECT_EQ(TakeString(value), "\"membership\"");

  EXPECT_EQ(dpc_config_set(c.raw, "/no/such/key", "1"), DPC_ERR_PARAMETER);
  EXPECT_NE(std::string(dpc_last_error()).find("/no/such/key"), std::string::npos);
  ASSERT_EQ(dpc_config_set(c.raw, "/epsilon", "-1"), DPC_OK);
  EXPECT_EQ(dpc_config_validate(c.raw), DPC_ERR_PARAMETER);

  Config parsed;
  EXPECT_EQ(dpc_config_parse("{\"seeds\": [1, 2]}", &parsed.raw), DPC_OK);
  ASSERT_EQ(dpc_config_get(parsed.raw, "seeds", &value), DPC_OK);
  EXPECT_EQ(TakeString(value), "[1,2]");
  dpc_config* bad = nullptr;
  EXPECT_EQ(dpc_config_parse("{\"bogus\": 1}", &bad), DPC_ERR_PARAMETER);
  EXPECT_EQ(bad, nullptr);
  EXPECT_EQ(dpc_config_load("/nonexistent/config.json", &bad), DPC_ERR_IO);
  EXPECT_EQ(dpc_config_default(nullptr), DPC_ERR_PARAMETER);

  char* json = nullptr;
  ASSERT_EQ(dpc_config_to_json(parsed.raw, &json), DPC_OK);
  Config again;
  EXPECT_EQ(dpc_config_parse(json, &again.raw), DPC_OK);
  dpc_string_free(json);
}

TEST(CApiTest, DatasetRows) {
  Config c;
  ASSERT_EQ(dpc_config_default(&c.raw), DPC_OK);
  ASSERT_EQ(dpc_config_set(c.raw, "/dataset/kind", "csv"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c.raw, "/dataset/path", DPC_FIXTURE_DIR "/three_rows.csv"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c.raw, "/dataset/schema", DPC_FIXTURE_DIR "/three_rows.schema.json"),
            DPC_OK);
  dpc_dataset* ds = nullptr;
  ASSERT_EQ(dpc_dataset_load(c.raw, 0, &ds), DPC_OK) << dpc_last_error();
  EXPECT_EQ(dpc_dataset_rows(ds), 3u);
  EXPECT_EQ(dpc_dataset_cols(ds), 5u);
  std::vector<double> row(5);
  int label = -1;
  ASSERT_EQ(dpc_dataset_row(ds, 0, row.data(), row.size(), &label), DPC_OK);
  EXPECT_EQ(row, (std::vector<double>{0.0, -1.0, 1.0, -1.0, -1.0}));
  EXPECT_EQ(label, 1);
  EXPECT_EQ(dpc_dataset_row(ds, 3, row.data(), row.size(), &label), DPC_ERR_PARAMETER);
  EXPECT_EQ(dpc_dataset_row(ds, 0, row.data(), 2, &label), DPC_ERR_STRUCTURAL);
  dpc_dataset_free(ds);

  ASSERT_EQ(dpc_config_set(c.raw, "/dataset/schema", "/nonexistent/s.json"), DPC_OK);
  EXPECT_EQ(dpc_dataset_load(c.raw, 0, &ds), DPC_ERR_IO);
  EXPECT_NE(std::string(dpc_last_error()).find("/nonexistent/s.json"), std::string::npos);
}

TEST(CApiTest, TrainLoadPredictAndSearch) {
  const auto dir = dpc::testing::TempDir("capi_pipeline");
  Config c;
  ASSERT_EQ(dpc_config_default(&c.raw), DPC_OK);
  SmallSetup(c.raw, dir.string());
  char* csv = nullptr;
  ASSERT_EQ(dpc_cmd_train_ae(c.raw, &csv), DPC_OK) << dpc_last_error();
  EXPECT_EQ(TakeString(csv).rfind("metric,dataset,epsilon,generator,scenario,seed,value\nMSE,", 0),
            0u);

  dpc_autoencoder* ae = nullptr;
  dpc_prototypes* protos = nullptr;
  dpc_classifier* target = nullptr;
  ASSERT_EQ(dpc_autoencoder_load((dir / "model.json").c_str(), &ae), DPC_OK);
  ASSERT_EQ(dpc_prototypes_load((dir / "prototypes.json").c_str(), &protos), DPC_OK);
  ASSERT_EQ(dpc_classifier_load((dir / "target.json").c_str(), &target), DPC_OK);
  EXPECT_EQ(dpc_autoencoder_input_dim(ae), 4u);
  EXPECT_EQ(dpc_autoencoder_latent_dim(ae), 2u);
  EXPECT_EQ(dpc_prototypes_count(protos), 2u);
  EXPECT_EQ(dpc_classifier_input_dim(target), 4u);
  EXPECT_EQ(dpc_classifier_class_count(target), 2u);

  const double query[4] = {-0.5, -0.5, -0.5, -0.5};
  double proba[2];
  ASSERT_EQ(dpc_classifier_predict(target, query, 4, proba, 2), DPC_OK);
  EXPECT_NEAR(proba[0] + proba[1], 1.0, 1e-12);
  EXPECT_EQ(dpc_classifier_predict(target, query, 3, proba, 2), DPC_ERR_STRUCTURAL);

  const int y = proba[1] > proba[0] ? 1 : 0;
  dpc_search_options opts = dpc_search_options_default();
  EXPECT_EQ(opts.alpha, 1.0);
  EXPECT_EQ(opts.beta, 0.5);
  EXPECT_EQ(opts.gamma, 0.1);
  EXPECT_EQ(opts.iterations, 500u);
  EXPECT_EQ(opts.step_size, 0.05);
  double sample[4];
  int predicted = -1;
  ASSERT_EQ(dpc_search(ae, protos, target, query, 4, 1 - y, &opts, sample, 4, &predicted),
            DPC_OK)
      << dpc_last_error();
  EXPECT_EQ(dpc_classifier_predict(target, sample, 4, proba, 2), DPC_OK);
  EXPECT_EQ(predicted, proba[1] > proba[0] ? 1 : 0);
  EXPECT_EQ(dpc_search(ae, protos, target, query, 4, 7, &opts, sample, 4, &predicted),
            DPC_ERR_PARAMETER);

  ASSERT_EQ(dpc_cmd_explain(c.raw, nullptr, &csv), DPC_OK) << dpc_last_error();
  const std::string rows = TakeString(csv);
  EXPECT_NE(rows.find("\nFR,synth,inf,dpc,,0,"), std::string::npos);
  EXPECT_NE(rows.find("\nAD,synth,inf,dpc,,0,"), std::string::npos);

  std::size_t count = 0;
  ASSERT_EQ(dpc_cmd_report(dir.c_str(), (dir / "report.csv").c_str(), &count), DPC_OK);
  EXPECT_EQ(count, 3u);

  dpc_autoencoder_free(ae);
  dpc_prototypes_free(protos);
  dpc_classifier_free(target);
}

TEST(CApiTest, LoadErrorsAndNullHandles) {
  dpc_autoencoder* ae = nullptr;
  EXPECT_EQ(dpc_autoencoder_load("/nonexistent/model.json", &ae), DPC_ERR_IO);
  const auto dir = dpc::testing::TempDir("capi_bad");
  {
    std::FILE* f = std::fopen((dir / "bad.json").c_str(), "w");
    std::fputs("{\"format\": 1}", f);
    std::fclose(f);
  }
  EXPECT_EQ(dpc_autoencoder_load((dir / "bad.json").c_str(), &ae), DPC_ERR_INGESTION);
  dpc_classifier* cl = nullptr;
  EXPECT_EQ(dpc_classifier_load((dir / "bad.json").c_str(), &cl), DPC_ERR_INGESTION);
  double out[2];
  EXPECT_EQ(dpc_classifier_predict(nullptr, out, 2, out, 2), DPC_ERR_PARAMETER);
  EXPECT_EQ(dpc_cmd_train_ae(nullptr, nullptr), DPC_ERR_PARAMETER);
  // Releasing null handles is a no-op.
  dpc_config_free(nullptr);
  dpc_dataset_free(nullptr);
  dpc_autoencoder_free(nullptr);
  dpc_string_free(nullptr);
}

TEST(CApiTest, TrainingFailureMapsToExitThree) {
  const auto dir = dpc::testing::TempDir("capi_diverge");
  Config c;
  ASSERT_EQ(dpc_config_default(&c.raw), DPC_OK);
  SmallSetup(c.raw, dir.string());
  // Unbounded relu units and an absurd step overflow the logits.
  ASSERT_EQ(dpc_config_set(c.raw, "/target/activation", "relu"), DPC_OK);
  ASSERT_EQ(dpc_config_set(c.raw, "/target/learning_rate", "1e300"), DPC_OK);
  const dpc_status st = dpc_cmd_train_ae(c.raw, nullptr);
  EXPECT_EQ(dpc_exit_code(st), 3) << dpc_status_name(st) << ": " << dpc_last_error();
}

}  // namespace
