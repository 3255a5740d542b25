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

#ifndef LABELFISH_TENSOR_H_
#define LABELFISH_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace labelfish {

using Shape = std::vector<std::size_t>;

std::size_t ShapeSize(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Dense row-major tensor of 64-bit reals. A default-constructed Tensor is an
// empty placeholder (rank 0, no elements); every other tensor has positive
// extents and exactly product(shape) elements.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Full(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Same elements under a new shape with equal element count.
  Tensor Reshaped(Shape shape) const&;
  Tensor Reshaped(Shape shape) &&;

  bool AllFinite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Rank-2 view: a Tensor whose shape is {rows, cols}.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  explicit Matrix(Tensor tensor);

  static Matrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const {
    return tensor_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return tensor_[r * cols_ + c];
  }

  std::span<const double> data() const { return tensor_.data(); }
  std::span<double> data() { return tensor_.data(); }
  std::span<const double> row(std::size_t r) const {
    return data().subspan(r * cols_, cols_);
  }

  const Tensor& tensor() const& { return tensor_; }
  Tensor tensor() && { return std::move(tensor_); }

  Matrix Transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Tensor tensor_;
};

// a (r x k) * b (k x c).
Matrix MatMul(const Matrix& a, const Matrix& b);
// transpose(a) * b.
Matrix MatMulTransA(const Matrix& a, const Matrix& b);
// a * transpose(b).
Matrix MatMulTransB(const Matrix& a, const Matrix& b);

struct LstsqResult {
  Matrix solution;
  // Smallest / largest singular value of the coefficient matrix.
  double rcond = 0.0;
  std::size_t rank = 0;
  bool ill_conditioned = false;
};

inline constexpr double kDefaultRankTol = 1e-10;

// Minimum-norm least-squares solution of a * X = rhs for every column of rhs
// at once, from a single factorization of a. Singular values below
// rank_tol * sigma_max are treated as zero; the result is then flagged.
LstsqResult Lstsq(const Matrix& a, const Matrix& rhs,
                  double rank_tol = kDefaultRankTol);

}  // namespace labelfish

#endif  // LABELFISH_TENSOR_H_
