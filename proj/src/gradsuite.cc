// src/gradsuite.cc

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

#include "apool/gradsuite.h"

#include <algorithm>
#include <functional>

#include "apool/gradcheck.h"
#include "apool/network.h"
#include "apool/objectives.h"
#include "apool/pooling.h"
#include "apool/rng.h"

namespace apool {

namespace {

// Small instance sizes; the backward formulas do not depend on them.
constexpr int kFrames = 6;
constexpr int kFeatDim = 5;
constexpr int kHidden = 6;
constexpr int kFrameDim = 4;
constexpr int kEmbedDim = 7;
constexpr int kClasses = 5;
constexpr int kBatch = 5;

Matrix RandomMatrix(int rows, int cols, double scale, Rng *rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++) m(r, c) = scale * rng->Gaussian();
  return m;
}

double DotAll(const Matrix &a, const Matrix &b) {
  APOOL_ASSERT(a.SameDim(b));
  double sum = 0.0;
  for (int i = 0; i < a.Size(); i++) sum += a.Data()[i] * b.Data()[i];
  return sum;
}

ProjectionParams RandomProjection(Rng *rng) {
  ProjectionParams proj;
  proj.weight = RandomMatrix(kFrameDim, kFrameDim, 0.4, rng);
  proj.bias = RandomMatrix(1, kFrameDim, 0.2, rng);
  proj.weight_grad = Matrix(kFrameDim, kFrameDim);
  proj.bias_grad = Matrix(1, kFrameDim);
  return proj;
}

ContextVector RandomContext(Rng *rng) {
  ContextVector ctx;
  ctx.mu = RandomMatrix(1, kFrameDim, 0.6, rng);
  ctx.mu_grad = Matrix(1, kFrameDim);
  return ctx;
}

using OpCheck = std::function<GradCheckReport(Rng *, double, double)>;

GradCheckReport CheckExtractor(Rng *rng, double eps, double tol) {
  ExtractorParams ext;
  ext.layers.resize(2);
  ext.layers[0].weight = RandomMatrix(kHidden, kFeatDim, 0.5, rng);
  ext.layers[0].bias = RandomMatrix(1, kHidden, 0.2, rng);
  ext.layers[0].weight_grad = Matrix(kHidden, kFeatDim);
  ext.layers[0].bias_grad = Matrix(1, kHidden);
  ext.layers[1].weight = RandomMatrix(kFrameDim, kHidden, 0.5, rng);
  ext.layers[1].bias = RandomMatrix(1, kFrameDim, 0.2, rng);
  ext.layers[1].weight_grad = Matrix(kFrameDim, kHidden);
  ext.layers[1].bias_grad = Matrix(1, kFrameDim);
  Matrix frames = RandomMatrix(kFrames, kFeatDim, 0.8, rng);
  const Matrix probe = RandomMatrix(kFrames, kFrameDim, 1.0, rng);

  ExtractorCache cache;
  ExtractorForward(frames, ext, &cache);
  const Matrix frames_grad = ExtractorBackward(probe, &ext, cache);

  const auto fn = [&]() {
    return DotAll(ExtractorForward(frames, ext, nullptr), probe);
  };
  return GradCheck(fn,
                   {{"layer0.weight", &ext.layers[0].weight,
                     &ext.layers[0].weight_grad},
                    {"layer0.bias", &ext.layers[0].bias,
                     &ext.layers[0].bias_grad},
                    {"layer1.weight", &ext.layers[1].weight,
                     &ext.layers[1].weight_grad},
                    {"layer1.bias", &ext.layers[1].bias,
                     &ext.layers[1].bias_grad},
                    {"frames", &frames, &frames_grad}},
                   eps, tol);
}

GradCheckReport CheckProjectGphi(Rng *rng, double eps, double tol) {
  ProjectionParams proj = RandomProjection(rng);
  Matrix x = RandomMatrix(kBatch, kFrameDim, 0.8, rng);
  const Matrix probe = RandomMatrix(kBatch, kFrameDim, 1.0, rng);

  const Matrix gphi = ProjectGphi(x, proj);
  const Matrix x_grad = ProjectGphiBackward(x, gphi, probe, &proj);

  const auto fn = [&]() { return DotAll(ProjectGphi(x, proj), probe); };
  return GradCheck(fn,
                   {{"weight", &proj.weight, &proj.weight_grad},
                    {"bias", &proj.bias, &proj.bias_grad},
                    {"x", &x, &x_grad}},
                   eps, tol);
}

GradCheckReport CheckEmbedHead(Rng *rng, double eps, double tol) {
  EmbedHeadParams head;
  head.weight = RandomMatrix(kEmbedDim, kFrameDim, 0.5, rng);
  head.bias = RandomMatrix(1, kEmbedDim, 0.2, rng);
  head.weight_grad = Matrix(kEmbedDim, kFrameDim);
  head.bias_grad = Matrix(1, kEmbedDim);
  Matrix x = RandomMatrix(kBatch, kFrameDim, 0.8, rng);
  const Matrix probe = RandomMatrix(kBatch, kEmbedDim, 1.0, rng);

  const Matrix x_grad = EmbedHeadBackward(x, probe, &head);
  const auto fn = [&]() { return DotAll(EmbedHead(x, head), probe); };
  return GradCheck(fn,
                   {{"weight", &head.weight, &head.weight_grad},
                    {"bias", &head.bias, &head.bias_grad},
                    {"x", &x, &x_grad}},
                   eps, tol);
}

GradCheckReport CheckSap(Rng *rng, double eps, double tol) {
  ProjectionParams proj = RandomProjection(rng);
  ContextVector ctx = RandomContext(rng);
  Matrix frames = RandomMatrix(kFrames, kFrameDim, 0.8, rng);
  const Matrix probe = RandomMatrix(1, kFrameDim, 1.0, rng);

  const AttentionOutput att = Sap(frames, proj, ctx);
  const Matrix frames_grad = SapBackward(frames, att, probe, &proj, &ctx);

  const auto fn = [&]() {
    return DotAll(Sap(frames, proj, ctx).embedding, probe);
  };
  return GradCheck(fn,
                   {{"proj.weight", &proj.weight, &proj.weight_grad},
                    {"proj.bias", &proj.bias, &proj.bias_grad},
                    {"mu", &ctx.mu, &ctx.mu_grad},
                    {"frames", &frames, &frames_grad}},
                   eps, tol);
}

std::vector<int> RandomLabels(int n, int classes, Rng *rng) {
  std::vector<int> labels(n);
  for (int &l : labels) l = rng->UniformInt(classes);
  return labels;
}

GradCheckReport CheckSoftmaxLoss(Rng *rng, double eps, double tol) {
  Matrix emb = RandomMatrix(kBatch, kEmbedDim, 0.8, rng);
  ClassifierParams clf;
  clf.weight = RandomMatrix(kClasses, kEmbedDim, 0.7, rng);
  clf.weight_grad = Matrix(kClasses, kEmbedDim);
  const std::vector<int> labels = RandomLabels(kBatch, kClasses, rng);

  Matrix emb_grad(kBatch, kEmbedDim);
  SoftmaxLoss(emb, labels, clf, &emb_grad, &clf);
  const auto fn = [&]() { return SoftmaxLoss(emb, labels, clf).loss; };
  return GradCheck(fn,
                   {{"embeddings", &emb, &emb_grad},
                    {"classifier", &clf.weight, &clf.weight_grad}},
                   eps, tol);
}

GradCheckReport CheckAmSoftmaxLoss(Rng *rng, double eps, double tol) {
  Matrix emb = RandomMatrix(kBatch, kEmbedDim, 0.8, rng);
  ClassifierParams clf;
  clf.weight = RandomMatrix(kClasses, kEmbedDim, 0.7, rng);
  clf.weight_grad = Matrix(kClasses, kEmbedDim);
  const std::vector<int> labels = RandomLabels(kBatch, kClasses, rng);
  // Moderate scale keeps the finite differences well conditioned; the
  // gradient formula is scale-agnostic.
  const AmSoftmaxConfig config{4.0, 0.1};

  Matrix emb_grad(kBatch, kEmbedDim);
  AmSoftmaxLoss(emb, labels, clf, config, &emb_grad, &clf);
  const auto fn = [&]() {
    return AmSoftmaxLoss(emb, labels, clf, config).loss;
  };
  return GradCheck(fn,
                   {{"embeddings", &emb, &emb_grad},
                    {"classifier", &clf.weight, &clf.weight_grad}},
                   eps, tol);
}

GradCheckReport CheckPrototypicalLoss(Rng *rng, double eps, double tol) {
  const int n_classes = 3, k_support = 2, m_query = 2;
  Matrix support = RandomMatrix(n_classes * k_support, kEmbedDim, 0.8, rng);
  Matrix queries = RandomMatrix(n_classes * m_query, kEmbedDim, 0.8, rng);
  std::vector<int> support_labels, query_labels;
  for (int c = 0; c < n_classes; c++)
    for (int k = 0; k < k_support; k++) support_labels.push_back(c);
  for (int c = 0; c < n_classes; c++)
    for (int m = 0; m < m_query; m++) query_labels.push_back(c);

  const Matrix protos = Prototypes(support, support_labels, n_classes);
  Matrix query_grad(queries.NumRows(), kEmbedDim);
  Matrix proto_grad(n_classes, kEmbedDim);
  PrototypicalLoss(queries, query_labels, protos, &query_grad, &proto_grad);
  Matrix support_grad(support.NumRows(), kEmbedDim);
  ScatterPrototypeGrad(proto_grad, support_labels, &support_grad);

  const auto fn = [&]() {
    return PrototypicalLoss(
        queries, query_labels, Prototypes(support, support_labels, n_classes));
  };
  return GradCheck(fn,
                   {{"queries", &queries, &query_grad},
                    {"support", &support, &support_grad}},
                   eps, tol);
}

GradCheckReport CheckContextLoss(Variant variant, Rng *rng, double eps,
                                 double tol) {
  ProjectionParams proj = RandomProjection(rng);
  ContextVector ctx = RandomContext(rng);
  Matrix pooled = RandomMatrix(kBatch, kFrameDim, 0.8, rng);

  Feedback feedback;
  feedback.correct.resize(kBatch);
  for (int i = 0; i < kBatch; i++) {
    // APF sees every sample as correct, ANF as misclassified, ADF mixed.
    const bool correct =
        variant == Variant::kApf ||
        (variant == Variant::kAdf && rng->UniformInt(2) == 1);
    feedback.correct[i] = correct;
    (correct ? feedback.cor_indices : feedback.mis_indices).push_back(i);
  }

  Matrix pooled_grad(kBatch, kFrameDim);
  ContextLossGrad(variant, pooled, feedback, &proj, &ctx, &pooled_grad, {});

  const auto fn = [&]() {
    switch (variant) {
      case Variant::kApf:
        return ApfLoss(pooled, feedback.cor_indices, proj, ctx);
      case Variant::kAnf:
        return AnfLoss(pooled, feedback.mis_indices, proj, ctx);
      default:
        return AdfLoss(pooled, feedback, proj, ctx);
    }
  };
  return GradCheck(fn,
                   {{"mu", &ctx.mu, &ctx.mu_grad},
                    {"proj.weight", &proj.weight, &proj.weight_grad},
                    {"proj.bias", &proj.bias, &proj.bias_grad},
                    {"pooled", &pooled, &pooled_grad}},
                   eps, tol);
}

}  // namespace

GradSuiteResult RunGradSuite(int seeds, double eps, double tol) {
  APOOL_ASSERT(seeds >= 1);
  const std::vector<std::pair<std::string, OpCheck>> ops = {
      {"extractor_forward", CheckExtractor},
      {"project_gphi", CheckProjectGphi},
      {"embed_head", CheckEmbedHead},
      {"sap", CheckSap},
      {"softmax_loss", CheckSoftmaxLoss},
      {"am_softmax_loss", CheckAmSoftmaxLoss},
      {"prototypical_loss", CheckPrototypicalLoss},
      {"apf_loss",
       [](Rng *rng, double e, double t) {
         return CheckContextLoss(Variant::kApf, rng, e, t);
       }},
      {"anf_loss",
       [](Rng *rng, double e, double t) {
         return CheckContextLoss(Variant::kAnf, rng, e, t);
       }},
      {"adf_loss",
       [](Rng *rng, double e, double t) {
         return CheckContextLoss(Variant::kAdf, rng, e, t);
       }},
  };

  GradSuiteResult result;
  result.eps = eps;
  result.tol = tol;
  result.seeds = seeds;
  for (const auto &[name, check] : ops) {
    GradSuiteEntry entry;
    entry.op = name;
    for (int s = 0; s < seeds; s++) {
      Rng rng(1000 + 17 * s);
      const GradCheckReport report = check(&rng, eps, tol);
      entry.max_rel_err = std::max(entry.max_rel_err, report.max_rel_err);
      entry.pass = entry.pass && report.pass;
    }
    result.pass = result.pass && entry.pass;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace apool
