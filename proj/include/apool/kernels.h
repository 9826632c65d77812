// include/apool/kernels.h

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

#ifndef APOOL_KERNELS_H_
#define APOOL_KERNELS_H_

#include "apool/matrix.h"

namespace apool {

// Dense kernels behind every forward/backward pass.  Each has an
// OpenMP-parallel version (the production path) and a serial reference
// version kept for testing and benchmarking.
//
// Parallelism is always across independent output rows; the inner
// accumulation per output element stays serial, so results are
// bit-identical to the serial reference for any thread count.

// C = beta * C + alpha * A * B^T     A: m x k, B: n x k, C: m x n
void AddMatMatNT(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c);
void AddMatMatNTSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c);

// C = beta * C + alpha * A * B       A: m x k, B: k x n, C: m x n
void AddMatMatNN(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c);
void AddMatMatNNSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c);

// C = beta * C + alpha * A^T * B     A: k x m, B: k x n, C: m x n
void AddMatMatTN(double alpha, const Matrix &a, const Matrix &b, double beta,
                 Matrix *c);
void AddMatMatTNSerial(double alpha, const Matrix &a, const Matrix &b,
                       double beta, Matrix *c);

// Elementwise tanh, row-parallel.
void TanhInPlace(Matrix *m);
void TanhInPlaceSerial(Matrix *m);

// Adds the row vector b (1 x n) to every row of m.
void AddRowVector(const Matrix &b, Matrix *m);

}  // namespace apool

#endif  // APOOL_KERNELS_H_
