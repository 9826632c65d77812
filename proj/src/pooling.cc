// src/pooling.cc

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

#include "apool/pooling.h"

#include <cstdio>

#include "apool/kernels.h"
#include "apool/numerics.h"

namespace apool {

Matrix Tap(const Matrix &frames) {
  const int num_frames = frames.NumRows();
  if (num_frames == 0) APOOL_ERR("Tap: empty frame matrix");
  Matrix mean(1, frames.NumCols());
  for (int t = 0; t < num_frames; t++) Axpy(1.0, frames.Row(t), mean.Row(0));
  for (int d = 0; d < mean.NumCols(); d++) mean(0, d) /= num_frames;
  return mean;
}

Matrix TapBackward(const Matrix &grad_embedding, int num_frames) {
  APOOL_ASSERT(grad_embedding.NumRows() == 1 && num_frames >= 1);
  Matrix grad(num_frames, grad_embedding.NumCols());
  for (int t = 0; t < num_frames; t++)
    Axpy(1.0 / num_frames, grad_embedding.Row(0), grad.Row(t));
  return grad;
}

AttentionOutput Sap(const Matrix &frames, const ProjectionParams &proj,
                    const ContextVector &context) {
  const int num_frames = frames.NumRows();
  if (num_frames == 0) APOOL_ERR("Sap: empty frame matrix");
  if (frames.NumCols() != proj.Dim() || context.Dim() != proj.Dim())
    APOOL_ERR("Sap: dims disagree (frames " << frames.NumCols() << ", proj "
              << proj.Dim() << ", mu " << context.Dim() << ")");

  AttentionOutput out;
  out.hidden = ProjectGphi(frames, proj);
  out.scores.resize(num_frames);
  for (int t = 0; t < num_frames; t++)
    out.scores[t] = Dot(out.hidden.Row(t), context.mu.Row(0));
  out.weights = Softmax(out.scores);

  out.embedding = Matrix(1, frames.NumCols());
  for (int t = 0; t < num_frames; t++)
    Axpy(out.weights[t], frames.Row(t), out.embedding.Row(0));
  return out;
}

Matrix SapBackward(const Matrix &frames, const AttentionOutput &att,
                   const Matrix &grad_embedding, ProjectionParams *proj,
                   ContextVector *context) {
  const int num_frames = frames.NumRows();
  APOOL_ASSERT(grad_embedding.NumRows() == 1 &&
               grad_embedding.NumCols() == frames.NumCols());
  APOOL_ASSERT(static_cast<int>(att.weights.size()) == num_frames);

  // e = sum_t w_t x_t with w = softmax(s), s_t = h_t . mu, h = tanh(Wx+b).
  // dL/dw_t = g_e . x_t, then the softmax Jacobian gives
  // dL/ds_t = w_t (dL/dw_t - sum_u w_u dL/dw_u).
  std::vector<double> grad_w(num_frames);
  double weighted_sum = 0.0;
  for (int t = 0; t < num_frames; t++) {
    grad_w[t] = Dot(grad_embedding.Row(0), frames.Row(t));
    weighted_sum += att.weights[t] * grad_w[t];
  }
  Matrix grad_scores(num_frames, 1);
  for (int t = 0; t < num_frames; t++)
    grad_scores(t, 0) = att.weights[t] * (grad_w[t] - weighted_sum);

  // Score path: s_t = h_t . mu.
  for (int t = 0; t < num_frames; t++)
    Axpy(grad_scores(t, 0), att.hidden.Row(t), context->mu_grad.Row(0));
  Matrix grad_hidden(num_frames, frames.NumCols());
  for (int t = 0; t < num_frames; t++)
    Axpy(grad_scores(t, 0), context->mu.Row(0), grad_hidden.Row(t));

  // Through tanh(W x + b); also yields the score-path frame gradient.
  Matrix grad_frames =
      ProjectGphiBackward(frames, att.hidden, grad_hidden, proj);

  // Direct path: e depends on x_t through the weighted sum itself.
  for (int t = 0; t < num_frames; t++)
    Axpy(att.weights[t], grad_embedding.Row(0), grad_frames.Row(t));
  return grad_frames;
}

void WriteAttentionCsv(std::ostream &out, const AttentionOutput &att,
                       const std::vector<uint8_t> &mask) {
  APOOL_ASSERT(mask.empty() || mask.size() == att.weights.size());
  out << "frame_index,score,weight,informative_mask\n";
  char buf[64];
  for (size_t t = 0; t < att.weights.size(); t++) {
    const int informative = mask.empty() ? 1 : (mask[t] ? 1 : 0);
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%d", t, att.scores[t],
                  att.weights[t], informative);
    out << buf << "\n";
  }
}

}  // namespace apool
