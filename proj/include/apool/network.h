// include/apool/network.h

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

#ifndef APOOL_NETWORK_H_
#define APOOL_NETWORK_H_

#include <string>
#include <vector>

#include "apool/matrix.h"
#include "apool/rng.h"

namespace apool {

// Every trainable tensor keeps its gradient alongside the value; the
// training loop zeroes gradients at the start of each step and the
// backward passes accumulate into them.
struct AffineParams {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  Matrix weight_grad;
  Matrix bias_grad;

  int InDim() const { return weight.NumCols(); }
  int OutDim() const { return weight.NumRows(); }
};

// Per-frame MLP with tanh after every layer.  Stands in for a heavy
// convolutional trunk; the pooling and objectives above it do not care.
struct ExtractorParams {
  std::vector<AffineParams> layers;

  int InputDim() const { return layers.front().InDim(); }
  int OutputDim() const { return layers.back().OutDim(); }
};

// The non-linear projection shared between attention scoring on frames
// and the context losses on pooled embeddings: g(x) = tanh(W x + b) with
// square W, so frames and pooled embeddings live in the same space.
struct ProjectionParams {
  Matrix weight;  // D x D
  Matrix bias;    // 1 x D
  Matrix weight_grad;
  Matrix bias_grad;

  int Dim() const { return weight.NumRows(); }
};

// Learnable context vector; zero means uniform attention.
struct ContextVector {
  Matrix mu;  // 1 x D
  Matrix mu_grad;

  int Dim() const { return mu.NumCols(); }
};

// Post-pooling affine map to the final embedding size (no activation).
struct EmbedHeadParams {
  Matrix weight;  // E x D
  Matrix bias;    // 1 x E
  Matrix weight_grad;
  Matrix bias_grad;

  int InDim() const { return weight.NumCols(); }
  int OutDim() const { return weight.NumRows(); }
};

// One weight vector per training class, rows of a C x E matrix.
struct ClassifierParams {
  Matrix weight;  // C x E
  Matrix weight_grad;

  int NumClasses() const { return weight.NumRows(); }
  int EmbedDim() const { return weight.NumCols(); }
};

struct NamedParam {
  std::string name;
  Matrix *value;
  Matrix *grad;
};

struct ModelShape {
  int feature_dim = 40;
  std::vector<int> extractor_hidden = {64};  // between feature_dim and frame_dim
  int frame_dim = 32;
  int embed_dim = 256;
  int num_classes = 20;
};

struct Model {
  ModelShape shape;
  ExtractorParams extractor;
  ProjectionParams proj;
  ContextVector context;
  EmbedHeadParams head;
  ClassifierParams classifier;

  // Stable enumeration order; checkpoint names and SGD state key off it.
  std::vector<NamedParam> Params();
  void ZeroGrad();
  bool GradsFinite() const;
};

// Weights uniform in (-a, a) with a = sqrt(6 / (fan_in + fan_out)); all
// biases and the context vector start at zero, so attentive pooling
// begins exactly as average pooling.
Model InitModel(const ModelShape &shape, Rng *rng);

// Per-layer activations cached by the forward pass; activations[0] is the
// input, activations[l + 1] the output of layer l.
struct ExtractorCache {
  std::vector<Matrix> activations;
};

// Applies the extractor to every frame: T x F in, T x D out.
Matrix ExtractorForward(const Matrix &frames, const ExtractorParams &params,
                        ExtractorCache *cache);
// Accumulates layer gradients and returns the gradient wrt the input.
Matrix ExtractorBackward(const Matrix &grad_output, ExtractorParams *params,
                         const ExtractorCache &cache);

// g(x) = tanh(W x + b) for a batch of row vectors (B x D in, B x D out).
Matrix ProjectGphi(const Matrix &x, const ProjectionParams &params);
// Given grad wrt g(x) (and the forward output), accumulates W/b gradients
// and returns the gradient wrt x.
Matrix ProjectGphiBackward(const Matrix &x, const Matrix &gphi,
                           const Matrix &grad_gphi, ProjectionParams *params);

// Affine head for a batch of row vectors: B x D in, B x E out.
Matrix EmbedHead(const Matrix &pooled, const EmbedHeadParams &params);
Matrix EmbedHeadBackward(const Matrix &pooled, const Matrix &grad_output,
                         EmbedHeadParams *params);

}  // namespace apool

#endif  // APOOL_NETWORK_H_
