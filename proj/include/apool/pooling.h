// include/apool/pooling.h

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

#ifndef APOOL_POOLING_H_
#define APOOL_POOLING_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "apool/matrix.h"
#include "apool/network.h"

namespace apool {

// Output of attentive pooling over one utterance.  weights are a proper
// distribution over frames and embedding = sum_t weights[t] * frames[t]
// (the raw frames, not the hidden projections).
struct AttentionOutput {
  Matrix hidden;                 // T x D, tanh(W x_t + b)
  std::vector<double> scores;    // T, h_t . mu
  std::vector<double> weights;   // T, softmax of scores
  Matrix embedding;              // 1 x D
};

// Temporal average pooling: plain mean over frames.  Errors on T = 0
// rather than returning zeros; an empty pool upstream is always a bug.
Matrix Tap(const Matrix &frames);

// Gradient of a loss wrt the frames given its gradient wrt the mean.
Matrix TapBackward(const Matrix &grad_embedding, int num_frames);

// Attentive pooling: hidden h_t = tanh(W x_t + b), weights softmax over
// h_t . mu, embedding the weighted sum of the raw frames.  With mu = 0
// this reduces to Tap.
AttentionOutput Sap(const Matrix &frames, const ProjectionParams &proj,
                    const ContextVector &context);

// Chain rule through the weighted sum, the softmax, the score dot
// products and the tanh projection.  Accumulates into proj and context
// gradients, returns the gradient wrt the frames.
Matrix SapBackward(const Matrix &frames, const AttentionOutput &att,
                   const Matrix &grad_embedding, ProjectionParams *proj,
                   ContextVector *context);

// Diagnostic CSV: frame_index, score, weight, informative_mask.  An empty
// mask is written as all-1 (unknown frames count as informative).
void WriteAttentionCsv(std::ostream &out, const AttentionOutput &att,
                       const std::vector<uint8_t> &mask);

}  // namespace apool

#endif  // APOOL_POOLING_H_
