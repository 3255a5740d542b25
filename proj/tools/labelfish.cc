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

// Command-line entry point: run, sweep and verify.

#include <cmath>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "labelfish/config.h"
#include "labelfish/error.h"
#include "labelfish/experiment.h"
#include "labelfish/verify.h"

namespace {

void PrintRow(const labelfish::TrialRow& row) {
  std::string where = row.axis.empty() ? "" : row.axis + "=" + row.value + " ";
  if (row.status != "ok") {
    std::fprintf(stderr, "%strial %zu: %s at %s: %s\n", where.c_str(),
                 row.trial, row.status.c_str(), row.stage.c_str(),
                 row.error.c_str());
    return;
  }
  if (std::isnan(row.lnacc_all)) {
    std::fprintf(stderr, "%strial %zu: ok (attack off)\n", where.c_str(),
                 row.trial);
    return;
  }
  std::fprintf(stderr, "%strial %zu: lnacc_all %.3f, %.2fs\n", where.c_str(),
               row.trial, row.lnacc_all, row.timings.total_s);
}

void Summarize(const labelfish::Report& report, const std::string& out) {
  std::size_t failed = 0;
  for (const auto& row : report.rows) failed += row.status != "ok";
  std::printf("%zu rows (%zu failed), wrote %s and %s\n", report.rows.size(),
              failed, out.c_str(),
              labelfish::SidecarPath(out).string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedSGD secure-aggregation simulator with label inference"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "YAML config")->required();
  run->add_option("--out", out_path, "CSV report (default: config output)");

  std::string axis;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Sweep one config axis");
  sweep->add_option("--config", config_path, "YAML config")->required();
  sweep->add_option("--axis", axis, "batch_size, clients, sigma or theta")
      ->required();
  sweep->add_option("--values", values, "Comma-separated axis values")
      ->required();
  sweep->add_option("--out", out_path, "CSV report (default: config output)");

  bool quick = false;
  int criterion = 0;
  auto* verify = app.add_subcommand("verify", "Check acceptance criteria 1-9");
  verify->add_flag("--quick", quick, "Fewer seeds and grid points");
  verify->add_option("--criterion", criterion, "Only this criterion")
      ->check(CLI::Range(1, 9));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *sweep) {
      const labelfish::ExperimentConfig config =
          labelfish::LoadConfig(config_path);
      if (out_path.empty()) out_path = config.output;
      const labelfish::Report report =
          *run ? labelfish::RunExperiment(config, PrintRow)
               : labelfish::RunSweep(config, axis,
                                     labelfish::SplitCsvList(values), PrintRow);
      labelfish::WriteReport(report, out_path);
      Summarize(report, out_path);
      return 0;
    }
    std::vector<labelfish::CriterionResult> results;
    if (criterion > 0) {
      results.push_back(labelfish::VerifyCriterion(criterion, quick));
      std::fputs(labelfish::FormatResult(results.back()).c_str(), stdout);
    } else {
      labelfish::VerifyOptions options;
      options.quick = quick;
      options.on_result = [](const labelfish::CriterionResult& r) {
        std::fputs(labelfish::FormatResult(r).c_str(), stdout);
        std::fflush(stdout);
      };
      results = labelfish::RunVerification(options);
    }
    const bool passed = labelfish::VerificationPassed(results);
    std::printf("verify: %s\n", passed ? "PASS" : "FAIL");
    return passed ? 0 : 1;
  } catch (const labelfish::Error& e) {
    std::fprintf(stderr, "labelfish: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "labelfish: %s\n", e.what());
    return 2;
  }
}
