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

#ifndef LABELFISH_METRICS_H_
#define LABELFISH_METRICS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "labelfish/federation.h"
#include "labelfish/nn.h"

namespace labelfish {

// Fraction of classes whose predicted count equals the true count.
double LnAcc(const LabelCounts& pred, const LabelCounts& truth);

// LnAcc of the class-wise sums over all clients.
double LnAccAll(std::span<const LabelCounts> pred,
                std::span<const LabelCounts> truth);

// Cosine similarity of the flattened sets. Throws an undefined error when
// both are all-zero; a single zero vector gives 0.
double CosSim(const GradientSet& a, const GradientSet& b);

struct ModifiedParameters {
  std::size_t nomp = 0;
  double ratio = 0.0;
};

// Scalar parameters that differ (exact comparison) between two models of
// the same architecture.
ModifiedParameters NompRatio(const Model& a, const Model& b);

struct MetricReport {
  double lnacc_all = 0.0;
  std::vector<double> lnacc_target;  // per client
  std::size_t nomp = 0;
  double ratio = 0.0;
  std::vector<double> cossim;  // per client, attack vs benign round
  double cossim_mean = 0.0;
};

}  // namespace labelfish

#endif  // LABELFISH_METRICS_H_
