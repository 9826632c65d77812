// tools/bench-kernels.cc

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

// Compares the OpenMP kernels against their serial references on the
// shapes the training loop actually hits, and checks they agree exactly.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "apool/eval.h"
#include "apool/kernels.h"
#include "apool/rng.h"

using namespace apool;

namespace {

int g_reps = 20;

double Now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double BestOf(const std::function<void()> &fn) {
  double best = 1e30;
  for (int rep = 0; rep < g_reps; rep++) {
    const double start = Now();
    fn();
    best = std::min(best, Now() - start);
  }
  return best;
}

Matrix RandomMatrix(int rows, int cols, Rng *rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.Size(); i++) m.Data()[i] = rng->Gaussian();
  return m;
}

void BenchGemm(const std::string &name, int m, int k, int n, Rng *rng) {
  const Matrix a = RandomMatrix(m, k, rng);
  const Matrix b = RandomMatrix(n, k, rng);
  Matrix c_par(m, n), c_ser(m, n);

  const double t_par =
      BestOf([&]() { AddMatMatNT(1.0, a, b, 0.0, &c_par); });
  const double t_ser =
      BestOf([&]() { AddMatMatNTSerial(1.0, a, b, 0.0, &c_ser); });
  const double diff = Matrix::MaxAbsDiff(c_par, c_ser);
  std::printf("%-28s %8.3f ms serial  %8.3f ms omp  %5.2fx  max|diff| %g\n",
              name.c_str(), 1e3 * t_ser, 1e3 * t_par, t_ser / t_par, diff);
}

void BenchScoring(int n_trials, int dim, Rng *rng) {
  const Matrix emb = RandomMatrix(256, dim, rng);
  std::vector<std::pair<int, int>> pairs(n_trials);
  for (auto &p : pairs)
    p = {rng->UniformInt(256), rng->UniformInt(256)};
  std::vector<double> scores_par(n_trials), scores_ser(n_trials);

  const double t_ser = BestOf([&]() {
    for (int i = 0; i < n_trials; i++)
      scores_ser[i] = CosineScore(emb.Row(pairs[i].first),
                                  emb.Row(pairs[i].second));
  });
  const double t_par = BestOf([&]() {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n_trials; i++)
      scores_par[i] = CosineScore(emb.Row(pairs[i].first),
                                  emb.Row(pairs[i].second));
  });
  double diff = 0.0;
  for (int i = 0; i < n_trials; i++)
    diff = std::max(diff, std::abs(scores_par[i] - scores_ser[i]));
  std::printf("%-28s %8.3f ms serial  %8.3f ms omp  %5.2fx  max|diff| %g\n",
              ("cosine scoring " + std::to_string(n_trials)).c_str(),
              1e3 * t_ser, 1e3 * t_par, t_ser / t_par, diff);
}

}  // namespace

int main(int argc, char **argv) {
  if (argc > 1) g_reps = std::atoi(argv[1]);
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d, reps %d\n",
              omp_get_max_threads(), g_reps);
#else
  std::printf("built without OpenMP; both columns are serial\n");
#endif

  Rng rng(1);
  // Extractor layer on one 2-second crop.
  BenchGemm("gemm 200x40 * (64x40)^T", 200, 40, 64, &rng);
  // A full episode worth of frames through the wide layer.
  BenchGemm("gemm 6000x64 * (32x64)^T", 6000, 64, 32, &rng);
  // Square case away from the training shapes.
  BenchGemm("gemm 512x512 * (512x512)^T", 512, 512, 512, &rng);
  BenchScoring(4000, 256, &rng);
  return 0;
}
