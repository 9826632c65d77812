// include/apool/checkpoint.h

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

#ifndef APOOL_CHECKPOINT_H_
#define APOOL_CHECKPOINT_H_

#include <string>

#include "apool/network.h"
#include "apool/objectives.h"

namespace apool {

struct Checkpoint {
  Model model;
  Variant variant = Variant::kSap;
  Objective objective = Objective::kPlSoftmax;
  bool normalize = true;
};

// Text checkpoint: versioned header with variant/objective/normalize
// meta lines, then named tensors as "tensor <name> <rows> <cols>"
// followed by row-major values, one row per line, printed with enough
// digits to round-trip exactly.
void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path);
Checkpoint LoadCheckpoint(const std::string &path);

}  // namespace apool

#endif  // APOOL_CHECKPOINT_H_
