// src/kernels.cc

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

#include "apool/kernels.h"

#include <cmath>

namespace apool {

namespace {

// Work below this many output elements is not worth a parallel region.
constexpr int kParallelThreshold = 2048;

inline void CheckNT(const Matrix &a, const Matrix &b, const Matrix &c) {
  if (a.NumCols() != b.NumCols() || c.NumRows() != a.NumRows() ||
      c.NumCols() != b.NumRows())
    APOOL_ERR("AddMatMatNT: incompatible shapes " << a.NumRows() << "x"
              << a.NumCols() << " * (" << b.NumRows() << "x" << b.NumCols()
              << ")^T -> " << c.NumRows() << "x" << c.NumCols());
}

inline void CheckNN(const Matrix &a, const Matrix &b, const Matrix &c) {
  if (a.NumCols() != b.NumRows() || c.NumRows() != a.NumRows() ||
      c.NumCols() != b.NumCols())
    APOOL_ERR("AddMatMatNN: incompatible shapes");
}

inline void CheckTN(const Matrix &a, const Matrix &b, const Matrix &c) {
  if (a.NumRows() != b.NumRows() || c.NumRows() != a.NumCols() ||
      c.NumCols() != b.NumCols())
    APOOL_ERR("AddMatMatTN: incompatible shapes");
}

inline void RowNT(double alpha, const Matrix &a, const Matrix &b, double beta,
                  Matrix *c, int i) {
  const int k = a.NumCols(), n = b.NumRows();
  const double *arow = a.RowData(i);
  double *crow = c->RowData(i);
  for (int j = 0; j < n; j++) {
    const double *brow = b.RowData(j);
    double sum = 0.0;
    for (int p = 0; p < k; p++) sum += arow[p] * brow[p];
    crow[j] = beta * crow[j] + alpha * sum;
  }
}

inline void RowNN(double alpha, const Matrix &a, const Matrix &b, double beta,
                  Matrix *c, int i) {
  const int k = a.NumCols(), n = b.NumCols();
  const double *arow = a.RowData(i);
  double *crow = c->RowData(i);
  for (int j = 0; j < n; j++) crow[j] *= beta;
  for (int p = 0; p < k; p++) {
    const double av = alpha * arow[p];
    const double *brow = b.RowData(p);
    for (int j = 0; j < n; j++) crow[j] += av * brow[j];
  }
}

inline void RowTN(double alpha, const Matrix &a, const Matrix &b, double beta,
                  Matrix *c, int i) {
  // c(i, :) accumulates a(:, i)^T * b, serial over the shared dimension.
  const int k = a.NumRows(), n = b.NumCols();
  double *crow = c->RowData(i);
  for (int j = 0; j < n; j++) crow[j] *= beta;
  for (int p = 0; p < k; p++) {
    const double av = alpha * a(p, i);
    const double *brow = b.RowData(p);
    for (int j = 0; j < n; j++) crow[j] += av * brow[j];
  }
}

}  // namespace

void AddMatMatNT(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c) {
  CheckNT(a, b, *c);
  const int m = c->NumRows();
  const bool parallel = c->Size() * a.NumCols() > kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; i++) RowNT(alpha, a, b, beta, c, i);
}

void AddMatMatNTSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c) {
  CheckNT(a, b, *c);
  for (int i = 0; i < c->NumRows(); i++) RowNT(alpha, a, b, beta, c, i);
}

void AddMatMatNN(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c) {
  CheckNN(a, b, *c);
  const int m = c->NumRows();
  const bool parallel = c->Size() * a.NumCols() > kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; i++) RowNN(alpha, a, b, beta, c, i);
}

void AddMatMatNNSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c) {
  CheckNN(a, b, *c);
  for (int i = 0; i < c->NumRows(); i++) RowNN(alpha, a, b, beta, c, i);
}

void AddMatMatTN(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c) {
  CheckTN(a, b, *c);
  const int m = c->NumRows();
  const bool parallel = c->Size() * a.NumRows() > kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; i++) RowTN(alpha, a, b, beta, c, i);
}

void AddMatMatTNSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c) {
  CheckTN(a, b, *c);
  for (int i = 0; i < c->NumRows(); i++) RowTN(alpha, a, b, beta, c, i);
}

void TanhInPlace(Matrix *m) {
  const int rows = m->NumRows(), cols = m->NumCols();
#pragma omp parallel for schedule(static) if (m->Size() > kParallelThreshold)
  for (int i = 0; i < rows; i++) {
    double *row = m->RowData(i);
    for (int j = 0; j < cols; j++) row[j] = std::tanh(row[j]);
  }
}

void TanhInPlaceSerial(Matrix *m) {
  for (int i = 0; i < m->NumRows(); i++) {
    double *row = m->RowData(i);
    for (int j = 0; j < m->NumCols(); j++) row[j] = std::tanh(row[j]);
  }
}

void AddRowVector(const Matrix &b, Matrix *m) {
  APOOL_ASSERT(b.NumRows() == 1 && b.NumCols() == m->NumCols());
  const double *bias = b.RowData(0);
  for (int i = 0; i < m->NumRows(); i++) {
    double *row = m->RowData(i);
    for (int j = 0; j < m->NumCols(); j++) row[j] += bias[j];
  }
}

}  // namespace apool
