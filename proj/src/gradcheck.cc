// src/gradcheck.cc

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

#include "apool/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace apool {

namespace {

constexpr double kRelErrFloor = 1e-8;

double EvalFinite(const std::function<double()> &fn) {
  double v = fn();
  if (!std::isfinite(v))
    APOOL_NUMERIC_ERR("GradCheck: objective returned non-finite value " << v);
  return v;
}

}  // namespace

GradCheckReport GradCheck(const std::function<double()> &fn,
                          const std::vector<GradCheckParam> &params,
                          double eps, double tol) {
  if (!(eps > 0.0 && eps <= 1e-3))
    APOOL_ERR("GradCheck: eps must be in (0, 1e-3], got " << eps);
  APOOL_ASSERT(tol > 0.0);

  GradCheckReport report;
  report.tol = tol;
  report.eps = eps;

  for (const GradCheckParam &param : params) {
    APOOL_ASSERT(param.value != nullptr && param.analytic_grad != nullptr);
    APOOL_ASSERT(param.value->SameDim(*param.analytic_grad));

    GradCheckReport::ParamResult result;
    result.name = param.name;

    double *data = param.value->Data();
    const double *grad = param.analytic_grad->Data();
    for (int i = 0; i < param.value->Size(); i++) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double f_plus = EvalFinite(fn);
      data[i] = saved - eps;
      const double f_minus = EvalFinite(fn);
      data[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double analytic = grad[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), kRelErrFloor});
      const double rel_err = std::abs(analytic - numeric) / denom;
      if (rel_err > result.max_rel_err) {
        result.max_rel_err = rel_err;
        result.analytic_at_max = analytic;
        result.numeric_at_max = numeric;
        result.index_at_max = i;
      }
    }
    result.pass = result.max_rel_err < tol;
    report.max_rel_err = std::max(report.max_rel_err, result.max_rel_err);
    report.pass = report.pass && result.pass;
    report.params.push_back(std::move(result));
  }
  return report;
}

}  // namespace apool
