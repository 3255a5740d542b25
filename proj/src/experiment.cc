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
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "json.hpp"
#include "labelfish/defenses.h"
#include "labelfish/error.h"
#include "labelfish/io.h"
#include "labelfish/metrics.h"
#include "labelfish/random.h"

namespace labelfish {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return TrialRow::kUnset;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double Min(const std::vector<double>& v) {
  if (v.empty()) return TrialRow::kUnset;
  return *std::min_element(v.begin(), v.end());
}

double Norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

// Fills the attack metrics of `row` from an attacked round.
void ScoreAttack(const RoundRecord& record, const FishingPlan& plan,
                 const Model& base, TrialRow& row) {
  std::vector<LabelCounts> predicted;
  row.lnacc_target.clear();
  row.bias_err_max = 0.0;
  row.int_dev_max = 0.0;
  row.sum_mismatch_max = 0;
  for (std::size_t u = 0; u < row.attack.size(); ++u) {
    const AttackResult& r = row.attack[u];
    predicted.push_back(r.counts);
    row.lnacc_target.push_back(LnAcc(r.counts, record.true_counts[u]));
    const std::vector<double> truth = record.client_gradients[u].HeadBias();
    for (std::size_t j = 0; j < truth.size(); ++j) {
      row.bias_err_max =
          std::max(row.bias_err_max, std::abs(r.bias_grad[j] - truth[j]));
    }
    for (double c : r.real_counts) {
      row.int_dev_max =
          std::max(row.int_dev_max, std::abs(c - std::nearbyint(c)));
    }
    row.sum_mismatch_max =
        std::max(row.sum_mismatch_max, std::abs(r.sum_mismatch));
  }
  row.lnacc_all = LnAccAll(predicted, record.true_counts);
  const ModifiedParameters mp = NompRatio(base, plan.kits.front().model);
  row.nomp = mp.nomp;
  row.ratio = mp.ratio;
  row.rcond = plan.rcond;
  row.retries = plan.retries;
}

TrialRow RunTrial(const ExperimentConfig& config,
                  const std::shared_ptr<const Dataset>& pool,
                  std::size_t trial) {
  TrialRow row;
  row.trial = trial;
  row.seed = TrialSeed(config.seed, trial);
  const auto start = Clock::now();
  std::string stage = "setup";
  try {
    const Model base = BuildModel(config, *pool, row.seed);
    FederationState state{
        base,
        PartitionClients(pool, config.clients, config.label_skew, row.seed),
        row.seed, 0};
    const RoundConfig round{config.per_round, config.batch_size,
                            config.learning_rate, config.secure_agg};
    DefenseHook defense;
    if (config.defense.kind != DefenseKind::kNone) {
      defense = [&config](const GradientSet& g, std::uint64_t r, ClientId id) {
        return ApplyDefense(g, config.defense, r, id);
      };
    }

    if (!config.attack.enabled) {
      stage = "round";
      const auto t0 = Clock::now();
      const RoundRecord record = RunRound(state, round, nullptr, defense);
      row.timings.round_s = Seconds(t0);
      row.clients = record.clients;
      row.true_counts = record.true_counts;
      row.aggregate_norm = Norm(record.aggregate.Flatten());
      row.timings.total_s = Seconds(start);
      return row;
    }

    const FederationState benign_state = state;
    FishingPlan plan;
    const FishingOptions options{config.attack.policy, row.seed,
                                 config.attack.min_rcond,
                                 config.attack.max_retries};
    auto hook = [&](const Model& m, std::span<const ClientId> ids) {
      stage = "build";
      const auto t0 = Clock::now();
      plan = BuildFishingModels(m, ids, options);
      row.timings.build_s = Seconds(t0);
      stage = "round";
      return plan.models();
    };
    stage = "round";
    auto t0 = Clock::now();
    const RoundRecord record = RunRound(state, round, hook, defense);
    row.timings.round_s = Seconds(t0) - row.timings.build_s;
    row.clients = record.clients;
    row.true_counts = record.true_counts;

    stage = "attack";
    t0 = Clock::now();
    row.attack = RunAttack(record, plan, config.attack.repair);
    row.timings.attack_s = Seconds(t0);

    stage = "metrics";
    ScoreAttack(record, plan, base, row);

    if (config.attack.cossim) {
      stage = "benign";
      FederationState replay = benign_state;
      const RoundRecord benign = RunRound(replay, round, nullptr, defense);
      stage = "metrics";
      for (std::size_t u = 0; u < record.clients.size(); ++u) {
        row.cossim.push_back(
            CosSim(record.client_gradients[u], benign.client_gradients[u]));
      }
      row.cossim_mean = Mean(row.cossim);
    }
  } catch (const Error& e) {
    row.status = std::string(ErrorCodeName(e.code()));
    row.stage = stage;
    row.error = e.what();
  }
  row.timings.total_s = Seconds(start);
  return row;
}

std::string Num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json NumJson(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

std::uint64_t TrialSeed(std::uint64_t seed, std::size_t trial) {
  return DeriveSeed(seed, {Tag(Stream::kTrial), trial});
}

std::shared_ptr<const Dataset> LoadPool(const ExperimentConfig& config) {
  const DatasetConfig& d = config.dataset;
  Dataset pool;
  if (d.kind == DatasetKind::kSynthetic) {
    pool = GenerateSynthetic({.num_classes = d.classes,
                              .sample_shape = d.shape,
                              .count = d.pool,
                              .blob_std = d.blob_std,
                              .seed = d.seed});
  } else {
    const auto dir = ResolveMnistDir(d);
    pool = LoadMnistIdx(MnistImagesPath(dir), MnistLabelsPath(dir));
    if (d.mnist_limit > 0 && d.mnist_limit < pool.size()) {
      pool = pool.Head(d.mnist_limit);
    }
  }
  const Shape shape = pool.sample_shape();
  if (config.model.kind == ModelKind::kFcn3) {
    if (shape.size() != 1) pool = pool.WithSampleShape({ShapeSize(shape)});
  } else if (shape.size() != 3) {
    throw Error(ErrorCode::kConfig,
                "cnn_bn needs [channels, height, width] samples");
  }
  return std::make_shared<const Dataset>(std::move(pool));
}

Model BuildModel(const ExperimentConfig& config, const Dataset& pool,
                 std::uint64_t trial_seed) {
  const std::uint64_t seed = DeriveSeed(trial_seed, {Tag(Stream::kModelInit)});
  const ModelConfig& m = config.model;
  if (m.kind == ModelKind::kFcn3) {
    return MakeFcn3(pool.sample_size(), m.hidden1, m.hidden2, pool.num_classes,
                    seed);
  }
  return MakeCnnBn(pool.sample_shape(), m.channels, m.kernel, m.hidden,
                   pool.num_classes, seed);
}

Report RunExperiment(const ExperimentConfig& config,
                     const RowCallback& on_row) {
  config.Validate();
  const auto pool = LoadPool(config);
  Report report{config, {}};
  for (std::size_t t = 0; t < config.trials; ++t) {
    report.rows.push_back(RunTrial(config, pool, t));
    if (on_row) on_row(report.rows.back());
  }
  return report;
}

ExperimentConfig ApplyAxis(const ExperimentConfig& base, std::string_view axis,
                           std::string_view value) {
  const auto bad = [&] {
    return Error(ErrorCode::kConfig, "bad value '" + std::string(value) +
                                         "' for axis " + std::string(axis));
  };
  const auto as_size = [&] {
    std::size_t v = 0;
    const auto [end, ec] =
        std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || end != value.data() + value.size()) throw bad();
    return v;
  };
  const auto as_double = [&] {
    double v = 0.0;
    const auto [end, ec] =
        std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || end != value.data() + value.size()) throw bad();
    return v;
  };
  ExperimentConfig c = base;
  if (axis == "batch_size") {
    c.batch_size = as_size();
  } else if (axis == "clients") {
    c.per_round = as_size();
  } else if (axis == "sigma") {
    c.defense.kind = DefenseKind::kGaussian;
    c.defense.sigma = as_double();
  } else if (axis == "theta") {
    c.defense.kind = DefenseKind::kCompression;
    c.defense.theta = as_double();
  } else {
    throw Error(ErrorCode::kConfig,
                "unknown sweep axis '" + std::string(axis) +
                    "' (batch_size, clients, sigma, theta)");
  }
  return c;
}

Report RunSweep(const ExperimentConfig& base, std::string_view axis,
                std::span<const std::string> values,
                const RowCallback& on_row) {
  Report merged{base, {}};
  for (const std::string& value : values) {
    const auto tag = [&](TrialRow& row) {
      row.axis = std::string(axis);
      row.value = value;
      merged.rows.push_back(row);
      if (on_row) on_row(merged.rows.back());
    };
    Report point;
    try {
      point = RunExperiment(ApplyAxis(base, axis, value));
    } catch (const Error& e) {
      TrialRow row;
      row.status = std::string(ErrorCodeName(e.code()));
      row.stage = "config";
      row.error = e.what();
      tag(row);
      continue;
    }
    for (TrialRow& row : point.rows) tag(row);
  }
  return merged;
}

std::vector<std::string> SplitCsvList(std::string_view list) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = list.find(',', pos);
    std::string_view item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) {
      throw Error(ErrorCode::kConfig,
                  "empty entry in list '" + std::string(list) + "'");
    }
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string ReportCsvHeader() {
  return "axis,value,trial,seed,status,stage,lnacc_all,lnacc_target_mean,"
         "lnacc_target_min,nomp,ratio,cossim_mean,bias_err_max,int_dev_max,"
         "sum_mismatch_max,rcond,retries,aggregate_norm\n";
}

std::string ReportToCsv(const Report& report) {
  std::string out = ReportCsvHeader();
  for (const TrialRow& r : report.rows) {
    const bool attacked = !r.attack.empty();
    const std::string fields[] = {
        r.axis,
        r.value,
        std::to_string(r.trial),
        std::to_string(r.seed),
        r.status,
        r.stage,
        Num(r.lnacc_all),
        Num(Mean(r.lnacc_target)),
        Num(Min(r.lnacc_target)),
        std::isnan(r.ratio) ? "" : std::to_string(r.nomp),
        Num(r.ratio),
        Num(r.cossim_mean),
        Num(r.bias_err_max),
        Num(r.int_dev_max),
        attacked ? std::to_string(r.sum_mismatch_max) : "",
        Num(r.rcond),
        attacked ? std::to_string(r.retries) : "",
        Num(r.aggregate_norm),
    };
    for (std::size_t i = 0; i < std::size(fields); ++i) {
      if (i > 0) out += ',';
      out += fields[i];
    }
    out += '\n';
  }
  return out;
}

std::string ReportToJson(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const TrialRow& r : report.rows) {
    nlohmann::json counts = nlohmann::json::array();
    for (const LabelCounts& c : r.true_counts) counts.push_back(c.counts);
    nlohmann::json cossim = nlohmann::json::array();
    for (double c : r.cossim) cossim.push_back(NumJson(c));
    rows.push_back({
        {"axis", r.axis},
        {"value", r.value},
        {"trial", r.trial},
        {"seed", r.seed},
        {"status", r.status},
        {"stage", r.stage},
        {"error", r.error},
        {"clients", r.clients},
        {"true_counts", counts},
        {"attack", nlohmann::json::parse(AttackResultsToJson(r.attack))},
        {"lnacc_all", NumJson(r.lnacc_all)},
        {"lnacc_target", r.lnacc_target},
        {"nomp", r.nomp},
        {"ratio", NumJson(r.ratio)},
        {"cossim", cossim},
        {"cossim_mean", NumJson(r.cossim_mean)},
        {"bias_err_max", NumJson(r.bias_err_max)},
        {"int_dev_max", NumJson(r.int_dev_max)},
        {"sum_mismatch_max", r.sum_mismatch_max},
        {"rcond", NumJson(r.rcond)},
        {"retries", r.retries},
        {"aggregate_norm", NumJson(r.aggregate_norm)},
        {"timings",
         {{"build_s", r.timings.build_s},
          {"round_s", r.timings.round_s},
          {"attack_s", r.timings.attack_s},
          {"total_s", r.timings.total_s}}},
    });
  }
  const nlohmann::json out = {{"config", ConfigToYaml(report.config)},
                              {"rows", rows}};
  return out.dump(2) + "\n";
}

std::filesystem::path SidecarPath(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  return p.replace_extension(".json");
}

void WriteReport(const Report& report, const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) {
    std::filesystem::create_directories(csv_path.parent_path());
  }
  WriteFile(csv_path, std::string_view(ReportToCsv(report)));
  WriteFile(SidecarPath(csv_path), std::string_view(ReportToJson(report)));
}

}  // namespace labelfish
