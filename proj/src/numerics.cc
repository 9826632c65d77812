// src/numerics.cc

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

#include "apool/numerics.h"

#include <algorithm>
#include <cmath>

#include "apool/common.h"

namespace apool {

std::vector<double> Softmax(std::span<const double> scores) {
  if (scores.empty()) APOOL_ERR("Softmax: empty input");
  double max_score = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) APOOL_NUMERIC_ERR("Softmax: non-finite input " << s);
    max_score = std::max(max_score, s);
  }
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (size_t i = 0; i < scores.size(); i++) {
    out[i] = std::exp(scores[i] - max_score);
    sum += out[i];
  }
  for (double &v : out) v /= sum;
  return out;
}

double LogSumExp(std::span<const double> scores) {
  if (scores.empty()) APOOL_ERR("LogSumExp: empty input");
  double max_score = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) APOOL_NUMERIC_ERR("LogSumExp: non-finite input");
    max_score = std::max(max_score, s);
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - max_score);
  return max_score + std::log(sum);
}

double LogSigmoid(double v) {
  if (v >= 0.0) return -std::log1p(std::exp(-v));
  return v - std::log1p(std::exp(v));
}

double Sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace apool
