// include/apool/gradsuite.h

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

#ifndef APOOL_GRADSUITE_H_
#define APOOL_GRADSUITE_H_

#include <string>
#include <vector>

namespace apool {

// Finite-difference validation of every hand-written backward pass, on
// small random instances.  Each op is checked over the given number of
// seeds; max_rel_err reports the worst entry across all of them.
struct GradSuiteEntry {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradSuiteResult {
  std::vector<GradSuiteEntry> entries;
  double eps = 1e-6;
  double tol = 1e-4;
  int seeds = 10;
  bool pass = true;
};

GradSuiteResult RunGradSuite(int seeds = 10, double eps = 1e-6,
                             double tol = 1e-4);

}  // namespace apool

#endif  // APOOL_GRADSUITE_H_
