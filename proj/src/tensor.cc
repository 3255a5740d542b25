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

#include "labelfish/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

#include "eigen_util.h"
#include "labelfish/error.h"

namespace labelfish {

using internal::MapRows;
using internal::RowMatrix;

std::size_t ShapeSize(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void CheckExtents(const Shape& shape) {
  if (shape.empty()) {
    throw Error(ErrorCode::kShape, "tensor shape must have rank >= 1");
  }
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw Error(ErrorCode::kShape, "tensor extents must be positive, got " +
                                         ShapeToString(shape));
    }
  }
}

void CheckFinite(std::span<const double> data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kDomain,
                  std::string(what) + " produced a non-finite value");
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  CheckExtents(shape_);
  data_.assign(ShapeSize(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  CheckExtents(shape_);
  if (ShapeSize(shape_) != data_.size()) {
    throw Error(ErrorCode::kShape,
                "shape " + ShapeToString(shape_) + " needs " +
                    std::to_string(ShapeSize(shape_)) + " elements, got " +
                    std::to_string(data_.size()));
  }
  CheckFinite(data_, "tensor construction");
}

Tensor Tensor::Full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::Reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).Reshaped(std::move(shape));
}

Tensor Tensor::Reshaped(Shape shape) && {
  CheckExtents(shape);
  if (ShapeSize(shape) != data_.size()) {
    throw Error(ErrorCode::kShape, "cannot reshape " + ShapeToString(shape_) +
                                       " to " + ShapeToString(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), tensor_(Shape{rows, cols}) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), tensor_(Shape{rows, cols}, std::move(data)) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) {
      throw Error(ErrorCode::kShape, "ragged matrix literal");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  tensor_ = Tensor(Shape{rows_, cols_}, std::move(data));
}

Matrix::Matrix(Tensor tensor) : tensor_(std::move(tensor)) {
  if (tensor_.rank() != 2) {
    throw Error(ErrorCode::kShape, "matrix needs a rank-2 tensor, got " +
                                       ShapeToString(tensor_.shape()));
  }
  rows_ = tensor_.dim(0);
  cols_ = tensor_.dim(1);
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::Transposed() const {
  Matrix out(cols_, rows_);
  MapRows(out.data(), cols_, rows_) = MapRows(data(), rows_, cols_).transpose();
  return out;
}

namespace {

void CheckInner(std::size_t lhs, std::size_t rhs, const char* op) {
  if (lhs != rhs) {
    throw Error(ErrorCode::kShape,
                std::string(op) + ": inner dimensions disagree (" +
                    std::to_string(lhs) + " vs " + std::to_string(rhs) + ")");
  }
}

}  // namespace

Matrix MatMul(const Matrix& a, const Matrix& b) {
  CheckInner(a.cols(), b.rows(), "matmul");
  Matrix out(a.rows(), b.cols());
  MapRows(out.data(), a.rows(), b.cols()).noalias() =
      MapRows(a.data(), a.rows(), a.cols()) *
      MapRows(b.data(), b.rows(), b.cols());
  CheckFinite(out.data(), "matmul");
  return out;
}

Matrix MatMulTransA(const Matrix& a, const Matrix& b) {
  CheckInner(a.rows(), b.rows(), "matmul_trans_a");
  Matrix out(a.cols(), b.cols());
  MapRows(out.data(), a.cols(), b.cols()).noalias() =
      MapRows(a.data(), a.rows(), a.cols()).transpose() *
      MapRows(b.data(), b.rows(), b.cols());
  CheckFinite(out.data(), "matmul_trans_a");
  return out;
}

Matrix MatMulTransB(const Matrix& a, const Matrix& b) {
  CheckInner(a.cols(), b.cols(), "matmul_trans_b");
  Matrix out(a.rows(), b.rows());
  MapRows(out.data(), a.rows(), b.rows()).noalias() =
      MapRows(a.data(), a.rows(), a.cols()) *
      MapRows(b.data(), b.rows(), b.cols()).transpose();
  CheckFinite(out.data(), "matmul_trans_b");
  return out;
}

LstsqResult Lstsq(const Matrix& a, const Matrix& rhs, double rank_tol) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw Error(ErrorCode::kShape, "lstsq: coefficient matrix is empty");
  }
  CheckInner(a.rows(), rhs.rows(), "lstsq");

  RowMatrix coeff = MapRows(a.data(), a.rows(), a.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      coeff, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  const double sigma_min = sigma.size() > 0 ? sigma(sigma.size() - 1) : 0.0;
  // A wide system (rows < cols) always has a nontrivial null space.
  const bool wide = a.rows() < a.cols();

  LstsqResult result;
  result.rcond = sigma_max > 0.0 && !wide ? sigma_min / sigma_max : 0.0;
  const double cutoff = rank_tol * sigma_max;

  Eigen::VectorXd inv_sigma(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff && sigma(i) > 0.0) {
      inv_sigma(i) = 1.0 / sigma(i);
      ++result.rank;
    } else {
      inv_sigma(i) = 0.0;
    }
  }
  result.ill_conditioned = result.rank < a.cols();

  Eigen::MatrixXd b = MapRows(rhs.data(), rhs.rows(), rhs.cols());
  Eigen::MatrixXd x =
      svd.matrixV() * inv_sigma.asDiagonal() * (svd.matrixU().transpose() * b);
  result.solution = Matrix(a.cols(), rhs.cols());
  MapRows(result.solution.data(), a.cols(), rhs.cols()) = x;
  CheckFinite(result.solution.data(), "lstsq");
  return result;
}

}  // namespace labelfish
