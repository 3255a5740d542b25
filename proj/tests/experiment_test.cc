/*
 * Copyright 2026 The labelfish Authors
 *
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

#include "labelfish/experiment.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "labelfish/config.h"
#include "labelfish/error.h"
#include "labelfish/io.h"
#include "test_util.h"

namespace labelfish {
namespace {

using ::labelfish::testing::ErrorCodeOf;

// Small synthetic FCN-3 setup that runs in milliseconds.
ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.dataset.shape = {12};
  c.dataset.pool = 400;
  c.dataset.classes = 4;
  c.model.hidden1 = 16;
  c.model.hidden2 = 12;
  c.clients = 10;
  c.per_round = 3;
  c.batch_size = 8;
  c.trials = 3;
  return c;
}

TEST(ConfigTest, DefaultsMirrorProtocol) {
  const ExperimentConfig c = ParseConfig("");
  EXPECT_EQ(c.clients, 100u);
  EXPECT_EQ(c.per_round, 5u);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.learning_rate, 0.1);
  EXPECT_EQ(c.trials, 20u);
  EXPECT_EQ(c.secure_agg.mode, SaMode::kIdeal);
  EXPECT_EQ(c.defense.kind, DefenseKind::kNone);
  EXPECT_TRUE(c.attack.enabled);
}

TEST(ConfigTest, ParsesEverySection) {
  const ExperimentConfig c = ParseConfig(R"(
dataset: {kind: synthetic, classes: 3, shape: [1, 6, 6], pool: 50}
model: {kind: cnn_bn, channels: 4, kernel: 3, hidden: 9}
federation: {clients: 12, per_round: 4, batch_size: 16, label_skew: 0.5}
secure_agg: {mode: masked, scale_bits: 20}
attack: {policy: constant, repair: true, cossim: false}
defense: {kind: gaussian, sigma: 0.001, seed: 3}
trials: 2
seed: 99
output: out/x.csv
)");
  EXPECT_EQ(c.dataset.shape, (Shape{1, 6, 6}));
  EXPECT_EQ(c.model.kind, ModelKind::kCnnBn);
  EXPECT_EQ(c.model.hidden, 9u);
  EXPECT_EQ(c.per_round, 4u);
  EXPECT_EQ(c.label_skew, 0.5);
  EXPECT_EQ(c.secure_agg.mode, SaMode::kMasked);
  EXPECT_EQ(c.secure_agg.scale_bits, 20);
  EXPECT_EQ(c.attack.policy, FishingPolicy::kConstant);
  EXPECT_TRUE(c.attack.repair);
  EXPECT_FALSE(c.attack.cossim);
  EXPECT_EQ(c.defense.kind, DefenseKind::kGaussian);
  EXPECT_EQ(c.defense.sigma, 0.001);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.output, "out/x.csv");
  EXPECT_EQ(c.EmbeddingDim(), 9u);
}

TEST(ConfigTest, YamlRoundTrip) {
  ExperimentConfig c = SmallConfig();
  c.defense = {DefenseKind::kCompression, 0.0, 0.3, 5};
  c.learning_rate = 0.1 + 1e-17;
  const ExperimentConfig back = ParseConfig(ConfigToYaml(c));
  EXPECT_EQ(ConfigToYaml(back), ConfigToYaml(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.defense.theta, 0.3);
}

TEST(ConfigTest, RejectsTyposAndBadValues) {
  EXPECT_EQ(ErrorCodeOf([] { ParseConfig("federation: {batchsize: 3}"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(ErrorCodeOf([] { ParseConfig("model: {kind: resnet}"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(ErrorCodeOf([] { ParseConfig("trials: many"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(ErrorCodeOf([] { ParseConfig("a: [1"); }), ErrorCode::kConfig);
}

TEST(ConfigTest, ValidateEnforcesInvariants) {
  ExperimentConfig c = SmallConfig();
  EXPECT_NO_THROW(c.Validate());
  c.per_round = 11;  // > N
  EXPECT_EQ(ErrorCodeOf([&] { c.Validate(); }), ErrorCode::kConfig);
  c = SmallConfig();
  c.clients = 50;
  c.per_round = 14;  // > m + 1 = 13
  EXPECT_EQ(ErrorCodeOf([&] { c.Validate(); }), ErrorCode::kConfig);
  c.attack.enabled = false;
  EXPECT_NO_THROW(c.Validate());
  c = SmallConfig();
  c.dataset.kind = DatasetKind::kMnist;
  c.dataset.mnist_dir = "/nonexistent/labelfish";
  EXPECT_EQ(ErrorCodeOf([&] { c.Validate(); }), ErrorCode::kConfig);
}

TEST(ExperimentTest, SmallRunRecoversAllLabels) {
  const Report report = RunExperiment(SmallConfig());
  ASSERT_EQ(report.rows.size(), 3u);
  for (const TrialRow& row : report.rows) {
    EXPECT_EQ(row.status, "ok") << row.error;
    EXPECT_EQ(row.lnacc_all, 1.0);
    EXPECT_EQ(row.lnacc_target, std::vector<double>(3, 1.0));
    EXPECT_LT(row.bias_err_max, 1e-9);
    EXPECT_LT(row.int_dev_max, 1e-6);
    EXPECT_EQ(row.attack.size(), 3u);
    EXPECT_EQ(row.cossim.size(), 3u);
    // FCN-3 fishing rewrites the first hidden layer: 16 * 12 + 16.
    EXPECT_EQ(row.nomp, 208u);
  }
  EXPECT_NE(report.rows[0].seed, report.rows[1].seed);
}

TEST(ExperimentTest, CnnBnRunRewritesOnlyBatchNorm) {
  ExperimentConfig c = SmallConfig();
  c.dataset.shape = {1, 6, 6};
  c.model.kind = ModelKind::kCnnBn;
  c.model.channels = 5;
  c.model.hidden = 12;
  c.trials = 2;
  const Report report = RunExperiment(c);
  for (const TrialRow& row : report.rows) {
    EXPECT_EQ(row.status, "ok") << row.error;
    EXPECT_EQ(row.lnacc_all, 1.0);
    EXPECT_EQ(row.nomp, 10u);
  }
}

TEST(ExperimentTest, AttackOffReportsBenignRoundOnly) {
  ExperimentConfig c = SmallConfig();
  c.attack.enabled = false;
  const Report report = RunExperiment(c);
  for (const TrialRow& row : report.rows) {
    EXPECT_EQ(row.status, "ok");
    EXPECT_TRUE(row.attack.empty());
    EXPECT_TRUE(std::isnan(row.lnacc_all));
    EXPECT_GT(row.aggregate_norm, 0.0);
    EXPECT_EQ(row.clients.size(), 3u);
  }
}

TEST(ExperimentTest, CsvIsDeterministic) {
  ExperimentConfig c = SmallConfig();
  c.secure_agg.mode = SaMode::kMasked;
  c.defense = {DefenseKind::kGaussian, 1e-3, 0.0, 4};
  const std::string a = ReportToCsv(RunExperiment(c));
  const std::string b = ReportToCsv(RunExperiment(c));
  EXPECT_EQ(a, b);
  c.seed += 1;
  EXPECT_NE(ReportToCsv(RunExperiment(c)), a);
}

TEST(ExperimentTest, CsvShape) {
  const Report report = RunExperiment(SmallConfig());
  const std::string csv = ReportToCsv(report);
  const std::string header = ReportCsvHeader();
  const auto header_cols = std::count(header.begin(), header.end(), ',');
  std::size_t lines = 0;
  std::size_t start = 0;
  while (start < csv.size()) {
    const std::size_t end = csv.find('\n', start);
    const std::string line = csv.substr(start, end - start);
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), header_cols) << line;
    ++lines;
    start = end + 1;
  }
  EXPECT_EQ(lines, report.rows.size() + 1);
}

TEST(ExperimentTest, FailedStageIsRecorded) {
  ExperimentConfig c = SmallConfig();
  c.attack.policy = FishingPolicy::kConstant;
  c.attack.max_retries = 0;
  c.clients = 20;
  c.per_round = 10;
  c.trials = 1;
  const Report report = RunExperiment(c);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].status, "conditioning");
  EXPECT_EQ(report.rows[0].stage, "build");
  EXPECT_FALSE(report.rows[0].error.empty());
}

TEST(SweepTest, AxisColumnAndPerPointErrors) {
  ExperimentConfig c = SmallConfig();
  c.trials = 2;
  const std::vector<std::string> values = {"2", "4", "99"};
  const Report report = RunSweep(c, "clients", values);
  ASSERT_EQ(report.rows.size(), 5u);
  EXPECT_EQ(report.rows[0].axis, "clients");
  EXPECT_EQ(report.rows[0].value, "2");
  EXPECT_EQ(report.rows[0].attack.size(), 2u);
  EXPECT_EQ(report.rows[3].attack.size(), 4u);
  EXPECT_EQ(report.rows[4].status, "config");
  EXPECT_EQ(report.rows[4].stage, "config");
  EXPECT_EQ(ErrorCodeOf([&] { ApplyAxis(c, "depth", "3"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(ErrorCodeOf([&] { ApplyAxis(c, "sigma", "1e-3x"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(ApplyAxis(c, "theta", "0.8").defense.kind,
            DefenseKind::kCompression);
}

TEST(SweepTest, SplitCsvList) {
  EXPECT_EQ(SplitCsvList("0, 1e-4,1e-3"),
            (std::vector<std::string>{"0", "1e-4", "1e-3"}));
  EXPECT_EQ(ErrorCodeOf([] { SplitCsvList("1,,2"); }), ErrorCode::kConfig);
}

TEST(ReportTest, WritesCsvAndSidecar) {
  const auto dir = std::filesystem::temp_directory_path() / "labelfish_report";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = SmallConfig();
  c.trials = 1;
  const Report report = RunExperiment(c);
  WriteReport(report, dir / "r.csv");
  const auto csv = ReadFileBytes(dir / "r.csv");
  EXPECT_EQ(std::string(csv.begin(), csv.end()), ReportToCsv(report));
  const auto json = ReadFileBytes(dir / "r.json");
  const std::string text(json.begin(), json.end());
  EXPECT_NE(text.find("\"timings\""), std::string::npos);
  EXPECT_NE(text.find("\"real_counts\""), std::string::npos);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace labelfish
