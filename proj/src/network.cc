// src/network.cc

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

#include "apool/network.h"

#include <cmath>

#include "apool/kernels.h"

namespace apool {

namespace {

Matrix GlorotUniform(int out_dim, int in_dim, Rng *rng) {
  Matrix w(out_dim, in_dim);
  const double bound = std::sqrt(6.0 / (in_dim + out_dim));
  for (int i = 0; i < out_dim; i++)
    for (int j = 0; j < in_dim; j++) w(i, j) = rng->Uniform(-bound, bound);
  return w;
}

AffineParams MakeAffine(int out_dim, int in_dim, Rng *rng) {
  AffineParams p;
  p.weight = GlorotUniform(out_dim, in_dim, rng);
  p.bias = Matrix(1, out_dim);
  p.weight_grad = Matrix(out_dim, in_dim);
  p.bias_grad = Matrix(1, out_dim);
  return p;
}

// y = tanh(x W^T + b) for row-major batches.
Matrix AffineTanhForward(const Matrix &x, const Matrix &weight,
                         const Matrix &bias) {
  Matrix y(x.NumRows(), weight.NumRows());
  AddMatMatNT(1.0, x, weight, 0.0, &y);
  AddRowVector(bias, &y);
  TanhInPlace(&y);
  return y;
}

}  // namespace

std::vector<NamedParam> Model::Params() {
  std::vector<NamedParam> params;
  for (size_t l = 0; l < extractor.layers.size(); l++) {
    AffineParams &layer = extractor.layers[l];
    const std::string base = "extractor." + std::to_string(l);
    params.push_back({base + ".weight", &layer.weight, &layer.weight_grad});
    params.push_back({base + ".bias", &layer.bias, &layer.bias_grad});
  }
  params.push_back({"proj.weight", &proj.weight, &proj.weight_grad});
  params.push_back({"proj.bias", &proj.bias, &proj.bias_grad});
  params.push_back({"context.mu", &context.mu, &context.mu_grad});
  params.push_back({"head.weight", &head.weight, &head.weight_grad});
  params.push_back({"head.bias", &head.bias, &head.bias_grad});
  params.push_back({"classifier.weight", &classifier.weight,
                    &classifier.weight_grad});
  return params;
}

void Model::ZeroGrad() {
  for (NamedParam &p : Params()) p.grad->SetZero();
}

bool Model::GradsFinite() const {
  Model *self = const_cast<Model *>(this);
  for (NamedParam &p : self->Params())
    if (!p.grad->AllFinite()) return false;
  return true;
}

Model InitModel(const ModelShape &shape, Rng *rng) {
  APOOL_ASSERT(shape.feature_dim >= 1 && shape.frame_dim >= 1 &&
               shape.embed_dim >= 1);
  APOOL_ASSERT(shape.num_classes >= 2);

  Model model;
  model.shape = shape;

  int in_dim = shape.feature_dim;
  for (int hidden : shape.extractor_hidden) {
    model.extractor.layers.push_back(MakeAffine(hidden, in_dim, rng));
    in_dim = hidden;
  }
  model.extractor.layers.push_back(MakeAffine(shape.frame_dim, in_dim, rng));

  const int d = shape.frame_dim;
  model.proj.weight = GlorotUniform(d, d, rng);
  model.proj.bias = Matrix(1, d);
  model.proj.weight_grad = Matrix(d, d);
  model.proj.bias_grad = Matrix(1, d);

  model.context.mu = Matrix(1, d);  // zero: starts as average pooling
  model.context.mu_grad = Matrix(1, d);

  model.head.weight = GlorotUniform(shape.embed_dim, d, rng);
  model.head.bias = Matrix(1, shape.embed_dim);
  model.head.weight_grad = Matrix(shape.embed_dim, d);
  model.head.bias_grad = Matrix(1, shape.embed_dim);

  model.classifier.weight =
      GlorotUniform(shape.num_classes, shape.embed_dim, rng);
  model.classifier.weight_grad = Matrix(shape.num_classes, shape.embed_dim);
  return model;
}

Matrix ExtractorForward(const Matrix &frames, const ExtractorParams &params,
                        ExtractorCache *cache) {
  APOOL_ASSERT(!params.layers.empty());
  if (frames.NumCols() != params.InputDim())
    APOOL_ERR("ExtractorForward: input dim " << frames.NumCols()
              << " does not match first layer " << params.InputDim());
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(frames);
  }
  Matrix current = frames;
  for (const AffineParams &layer : params.layers) {
    current = AffineTanhForward(current, layer.weight, layer.bias);
    if (cache) cache->activations.push_back(current);
  }
  return current;
}

Matrix ExtractorBackward(const Matrix &grad_output, ExtractorParams *params,
                         const ExtractorCache &cache) {
  APOOL_ASSERT(cache.activations.size() == params->layers.size() + 1);
  Matrix grad = grad_output;
  for (int l = static_cast<int>(params->layers.size()) - 1; l >= 0; l--) {
    AffineParams &layer = params->layers[l];
    const Matrix &input = cache.activations[l];
    const Matrix &output = cache.activations[l + 1];
    APOOL_ASSERT(grad.SameDim(output));

    // Through tanh: grad_pre = (1 - y^2) .* grad.
    Matrix grad_pre = grad;
    for (int t = 0; t < grad_pre.NumRows(); t++) {
      double *g = grad_pre.RowData(t);
      const double *y = output.RowData(t);
      for (int j = 0; j < grad_pre.NumCols(); j++) g[j] *= 1.0 - y[j] * y[j];
    }

    AddMatMatTN(1.0, grad_pre, input, 1.0, &layer.weight_grad);
    for (int t = 0; t < grad_pre.NumRows(); t++)
      Axpy(1.0, grad_pre.Row(t), layer.bias_grad.Row(0));

    Matrix grad_in(input.NumRows(), input.NumCols());
    AddMatMatNN(1.0, grad_pre, layer.weight, 0.0, &grad_in);
    grad = std::move(grad_in);
  }
  return grad;
}

Matrix ProjectGphi(const Matrix &x, const ProjectionParams &params) {
  if (x.NumCols() != params.Dim())
    APOOL_ERR("ProjectGphi: input dim " << x.NumCols()
              << " does not match projection dim " << params.Dim());
  return AffineTanhForward(x, params.weight, params.bias);
}

Matrix ProjectGphiBackward(const Matrix &x, const Matrix &gphi,
                           const Matrix &grad_gphi, ProjectionParams *params) {
  APOOL_ASSERT(gphi.SameDim(grad_gphi) && x.SameDim(gphi));
  Matrix grad_pre = grad_gphi;
  for (int i = 0; i < grad_pre.NumRows(); i++) {
    double *g = grad_pre.RowData(i);
    const double *y = gphi.RowData(i);
    for (int j = 0; j < grad_pre.NumCols(); j++) g[j] *= 1.0 - y[j] * y[j];
  }
  AddMatMatTN(1.0, grad_pre, x, 1.0, &params->weight_grad);
  for (int i = 0; i < grad_pre.NumRows(); i++)
    Axpy(1.0, grad_pre.Row(i), params->bias_grad.Row(0));
  Matrix grad_x(x.NumRows(), x.NumCols());
  AddMatMatNN(1.0, grad_pre, params->weight, 0.0, &grad_x);
  return grad_x;
}

Matrix EmbedHead(const Matrix &pooled, const EmbedHeadParams &params) {
  if (pooled.NumCols() != params.InDim())
    APOOL_ERR("EmbedHead: input dim " << pooled.NumCols()
              << " does not match head dim " << params.InDim());
  Matrix out(pooled.NumRows(), params.OutDim());
  AddMatMatNT(1.0, pooled, params.weight, 0.0, &out);
  AddRowVector(params.bias, &out);
  return out;
}

Matrix EmbedHeadBackward(const Matrix &pooled, const Matrix &grad_output,
                         EmbedHeadParams *params) {
  APOOL_ASSERT(grad_output.NumCols() == params->OutDim());
  APOOL_ASSERT(grad_output.NumRows() == pooled.NumRows());
  AddMatMatTN(1.0, grad_output, pooled, 1.0, &params->weight_grad);
  for (int i = 0; i < grad_output.NumRows(); i++)
    Axpy(1.0, grad_output.Row(i), params->bias_grad.Row(0));
  Matrix grad_in(pooled.NumRows(), pooled.NumCols());
  AddMatMatNN(1.0, grad_output, params->weight, 0.0, &grad_in);
  return grad_in;
}

}  // namespace apool
