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

#include "labelfish/metrics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "labelfish/error.h"

namespace labelfish {

double LnAcc(const LabelCounts& pred, const LabelCounts& truth) {
  if (pred.counts.size() != truth.counts.size() || truth.counts.empty()) {
    throw Error(
        ErrorCode::kShape,
        "label counts differ in length: " + std::to_string(pred.counts.size()) +
            " vs " + std::to_string(truth.counts.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.counts.size(); ++i) {
    hits += pred.counts[i] == truth.counts[i];
  }
  return static_cast<double>(hits) / static_cast<double>(truth.counts.size());
}

double LnAccAll(std::span<const LabelCounts> pred,
                std::span<const LabelCounts> truth) {
  if (pred.size() != truth.size() || truth.empty()) {
    throw Error(ErrorCode::kShape, "need one prediction per client");
  }
  const std::size_t n = truth.front().counts.size();
  LabelCounts pred_sum{std::vector<int>(n, 0)};
  LabelCounts truth_sum{std::vector<int>(n, 0)};
  for (std::size_t u = 0; u < truth.size(); ++u) {
    if (pred[u].counts.size() != n || truth[u].counts.size() != n) {
      throw Error(ErrorCode::kShape, "label counts differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
      pred_sum.counts[i] += pred[u].counts[i];
      truth_sum.counts[i] += truth[u].counts[i];
    }
  }
  return LnAcc(pred_sum, truth_sum);
}

double CosSim(const GradientSet& a, const GradientSet& b) {
  a.CheckSameLayout(b);
  const std::vector<double> x = a.Flatten();
  const std::vector<double> y = b.Flatten();
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 && yy == 0.0) {
    throw Error(ErrorCode::kUndefined,
                "cosine similarity of two zero gradients");
  }
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(xx) * std::sqrt(yy)), -1.0, 1.0);
}

ModifiedParameters NompRatio(const Model& a, const Model& b) {
  a.CheckSameArchitecture(b);
  std::size_t nomp = 0;
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    const auto& pa = a.layer(l).params;
    const auto& pb = b.layer(l).params;
    for (std::size_t p = 0; p < pa.size(); ++p) {
      const auto x = pa[p].data();
      const auto y = pb[p].data();
      for (std::size_t i = 0; i < x.size(); ++i) {
        nomp += x[i] != y[i];
      }
    }
  }
  return {nomp,
          static_cast<double>(nomp) / static_cast<double>(a.parameter_count())};
}

}  // namespace labelfish
