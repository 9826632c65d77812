// src/matrix.cc

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

#include "apool/matrix.h"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace apool {

void Warn(const std::string &msg) {
  std::cerr << "WARNING: " << msg << "\n";
}

bool Matrix::AllFinite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Matrix::MaxAbsDiff(const Matrix &a, const Matrix &b) {
  APOOL_ASSERT(a.SameDim(b));
  double max_diff = 0.0;
  for (int i = 0; i < a.Size(); i++)
    max_diff = std::max(max_diff, std::abs(a.data_[i] - b.data_[i]));
  return max_diff;
}

Matrix RowVector(std::span<const double> values) {
  Matrix m(1, static_cast<int>(values.size()));
  std::copy(values.begin(), values.end(), m.Data());
  return m;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  APOOL_ASSERT(a.size() == b.size());
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); i++) sum += a[i] * b[i];
  return sum;
}

double Norm2(std::span<const double> a) { return std::sqrt(Dot(a, a)); }

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  APOOL_ASSERT(x.size() == y.size());
  for (size_t i = 0; i < x.size(); i++) y[i] += alpha * x[i];
}

}  // namespace apool
