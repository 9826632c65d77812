// include/apool/numerics.h

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

#ifndef APOOL_NUMERICS_H_
#define APOOL_NUMERICS_H_

#include <span>
#include <vector>

namespace apool {

// Stable softmax via max subtraction.  Errors on empty or non-finite input.
std::vector<double> Softmax(std::span<const double> scores);

// max(x) + log(sum(exp(x - max))); errors on empty input.
double LogSumExp(std::span<const double> scores);

// log(1 / (1 + exp(-v))), stable for large |v|.
double LogSigmoid(double v);

double Sigmoid(double v);

}  // namespace apool

#endif  // APOOL_NUMERICS_H_
