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

#ifndef LABELFISH_SRC_EIGEN_UTIL_H_
#define LABELFISH_SRC_EIGEN_UTIL_H_

#include <Eigen/Dense>
#include <cstddef>
#include <span>

namespace labelfish::internal {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

inline ConstRowMap MapRows(std::span<const double> data, std::size_t rows,
                           std::size_t cols) {
  return ConstRowMap(data.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

inline RowMap MapRows(std::span<double> data, std::size_t rows,
                      std::size_t cols) {
  return RowMap(data.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

}  // namespace labelfish::internal

#endif  // LABELFISH_SRC_EIGEN_UTIL_H_
