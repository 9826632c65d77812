// include/apool/gradcheck.h

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

#ifndef APOOL_GRADCHECK_H_
#define APOOL_GRADCHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "apool/matrix.h"

namespace apool {

// One parameter tensor under check: the live value storage (perturbed in
// place) and the analytic gradient claimed for it.
struct GradCheckParam {
  std::string name;
  Matrix *value = nullptr;
  const Matrix *analytic_grad = nullptr;
};

struct GradCheckReport {
  struct ParamResult {
    std::string name;
    double max_rel_err = 0.0;
    // Analytic vs central-difference value at the worst entry.
    double analytic_at_max = 0.0;
    double numeric_at_max = 0.0;
    int index_at_max = -1;
    bool pass = true;
  };
  std::vector<ParamResult> params;
  double max_rel_err = 0.0;
  double tol = 0.0;
  double eps = 0.0;
  bool pass = true;
};

// Validates each analytic gradient entry against the central difference
// (f(p+eps) - f(p-eps)) / (2 eps).  Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8); pass means max relative error < tol.
// Requires eps in (0, 1e-3].  Throws NumericError if fn returns a
// non-finite value at any evaluation point.
GradCheckReport GradCheck(const std::function<double()> &fn,
                          const std::vector<GradCheckParam> &params,
                          double eps, double tol);

}  // namespace apool

#endif  // APOOL_GRADCHECK_H_
