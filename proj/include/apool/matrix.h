// include/apool/matrix.h

// Copyright 2026  APool Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef APOOL_MATRIX_H_
#define APOOL_MATRIX_H_

#include <span>
#include <vector>

#include "apool/common.h"

namespace apool {

// Dense row-major matrix of 64-bit reals.  All training and evaluation
// numerics in this project use double precision.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
    APOOL_ASSERT(rows >= 0 && cols >= 0);
    data_.assign(static_cast<size_t>(rows) * cols, 0.0);
  }

  int NumRows() const { return rows_; }
  int NumCols() const { return cols_; }
  int Size() const { return rows_ * cols_; }

  double &operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double *RowData(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double *RowData(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
  std::span<double> Row(int r) { return {RowData(r), static_cast<size_t>(cols_)}; }
  std::span<const double> Row(int r) const { return {RowData(r), static_cast<size_t>(cols_)}; }

  double *Data() { return data_.data(); }
  const double *Data() const { return data_.data(); }

  void SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }
  bool SameDim(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool AllFinite() const;

  // Largest absolute elementwise difference; matrices must agree in shape.
  static double MaxAbsDiff(const Matrix &a, const Matrix &b);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Wraps a single row vector as a 1 x n matrix.
Matrix RowVector(std::span<const double> values);

double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> a);
// y += alpha * x
void Axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace apool

#endif  // APOOL_MATRIX_H_
