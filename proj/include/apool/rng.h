// include/apool/rng.h

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

#ifndef APOOL_RNG_H_
#define APOOL_RNG_H_

#include <cstdint>
#include <vector>

namespace apool {

// Deterministic xoshiro256++ stream (Blackman & Vigna constants), seeded
// through splitmix64.  The same seed produces the same sequence on every
// platform; std::random distributions are avoided for that reason.
// Instances are single-owner: never share one across concurrent tasks.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();
  // Uniform in [0, 1) with 53 random mantissa bits.
  double Uniform();
  // Uniform in [lo, hi).
  double Uniform(double lo, double hi);
  // Uniform integer in [0, n); n must be positive.  Unbiased via rejection.
  int UniformInt(int n);
  // Standard normal via Box-Muller (second draw cached).
  double Gaussian();

  template <typename T>
  void Shuffle(std::vector<T> *v) {
    for (int i = static_cast<int>(v->size()) - 1; i > 0; i--) {
      int j = UniformInt(i + 1);
      std::swap((*v)[i], (*v)[j]);
    }
  }

 private:
  uint64_t state_[4];
  bool have_cached_gaussian_ = false;
  double cached_gaussian_ = 0.0;
};

}  // namespace apool

#endif  // APOOL_RNG_H_
