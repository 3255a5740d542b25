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

#ifndef LABELFISH_EXPERIMENT_H_
#define LABELFISH_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelfish/attack.h"
#include "labelfish/config.h"
#include "labelfish/data.h"
#include "labelfish/federation.h"
#include "labelfish/nn.h"

namespace labelfish {

// Sample pool for a config, shaped for its model (flat for FCN-3,
// [C, H, W] for CNN-BN).
std::shared_ptr<const Dataset> LoadPool(const ExperimentConfig& config);

// Fresh global model for one trial, sized for `pool`.
Model BuildModel(const ExperimentConfig& config, const Dataset& pool,
                 std::uint64_t trial_seed);

std::uint64_t TrialSeed(std::uint64_t seed, std::size_t trial);

struct Timings {
  double build_s = 0.0;   // fishing models
  double round_s = 0.0;   // federated round
  double attack_s = 0.0;  // disaggregation and label inference
  double total_s = 0.0;
};

struct TrialRow {
  std::string axis;  // empty outside a sweep
  std::string value;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or the error code name
  std::string stage;          // failing stage, empty when ok
  std::string error;

  std::vector<ClientId> clients;
  std::vector<LabelCounts> true_counts;
  std::vector<AttackResult> attack;  // empty when the attack is off
  int retries = 0;

  // NaN when not measured.
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  double lnacc_all = kUnset;
  std::vector<double> lnacc_target;
  std::size_t nomp = 0;
  double ratio = kUnset;
  std::vector<double> cossim;
  double cossim_mean = kUnset;
  double bias_err_max = kUnset;  // recovered vs withheld bias gradients
  double int_dev_max = kUnset;   // real counts vs nearest integers
  int sum_mismatch_max = 0;      // largest |sum(counts) - B|
  double rcond = kUnset;

  // Benign rounds only: norm of the aggregate.
  double aggregate_norm = kUnset;

  Timings timings;
};

struct Report {
  ExperimentConfig config;
  std::vector<TrialRow> rows;
};

using RowCallback = std::function<void(const TrialRow&)>;

// Runs config.trials independent trials. A module error aborts only its
// trial and is recorded with the failing stage.
Report RunExperiment(const ExperimentConfig& config,
                     const RowCallback& on_row = nullptr);

// Axes: batch_size, clients (selected per round), sigma, theta. Setting
// sigma or theta switches the defense to gaussian or compression. Invalid
// points are recorded as failed rows and the sweep continues.
Report RunSweep(const ExperimentConfig& base, std::string_view axis,
                std::span<const std::string> values,
                const RowCallback& on_row = nullptr);

// Returns base with `axis` set to `value`. Throws a config error on an
// unknown axis or malformed value.
ExperimentConfig ApplyAxis(const ExperimentConfig& base, std::string_view axis,
                           std::string_view value);

std::vector<std::string> SplitCsvList(std::string_view list);

// CSV columns never include timings, so equal seeds give equal bytes.
std::string ReportCsvHeader();
std::string ReportToCsv(const Report& report);
// Full detail: config echo, per-client results and timings.
std::string ReportToJson(const Report& report);

// Sidecar path for a CSV report: same stem, ".json".
std::filesystem::path SidecarPath(const std::filesystem::path& csv_path);
void WriteReport(const Report& report, const std::filesystem::path& csv_path);

}  // namespace labelfish

#endif  // LABELFISH_EXPERIMENT_H_
