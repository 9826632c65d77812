// include/apool/objectives.h

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

#ifndef APOOL_OBJECTIVES_H_
#define APOOL_OBJECTIVES_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "apool/matrix.h"
#include "apool/network.h"

namespace apool {

// Pooling/attention-supervision variant.  TAP and SAP carry no context
// loss; APF attracts correctly classified samples to the context vector,
// ANF repels misclassified ones, ADF does binary classification with the
// weight pair {+mu, -mu}.
enum class Variant { kTap, kSap, kApf, kAnf, kAdf };
enum class Objective { kSoftmax, kAmSoftmax, kPlSoftmax };

std::string VariantName(Variant v);
Variant ParseVariant(const std::string &name);
std::string ObjectiveName(Objective o);
Objective ParseObjective(const std::string &name);
inline bool VariantHasContextLoss(Variant v) {
  return v == Variant::kApf || v == Variant::kAnf || v == Variant::kAdf;
}

// d(a1, a2) = a1 . a2 / |a2| = |a1| cos(a1, a2).  Scale-invariant in a2
// only; errors if |a2| < 1e-12.
double ScaledCosineDistance(std::span<const double> a1,
                            std::span<const double> a2);

// Per-sample correct/incorrect flags from a classifier's argmax,
// partitioned into the index sets the context losses consume.
struct Feedback {
  std::vector<uint8_t> correct;
  std::vector<int> cor_indices;
  std::vector<int> mis_indices;
};
Feedback FeedbackPartition(const std::vector<int> &predictions,
                           const std::vector<int> &labels);

// Cross-entropy over logits d(x_i, w_j) for the whole training-class set.
// predictions receives the per-sample argmax (ties to the lowest index).
// When embedding_grad / clf_grad are non-null the gradients, times
// grad_scale, are accumulated into them.
struct SoftmaxLossResult {
  double loss = 0.0;
  std::vector<int> predictions;
};
SoftmaxLossResult SoftmaxLoss(const Matrix &embeddings,
                              const std::vector<int> &labels,
                              const ClassifierParams &classifier,
                              Matrix *embedding_grad = nullptr,
                              ClassifierParams *clf_grad = nullptr,
                              double grad_scale = 1.0);

struct AmSoftmaxConfig {
  double scale = 40.0;
  double margin = 0.1;
};

// Margin softmax over cosines of length-normalized embeddings and class
// weights: the target logit is s (cos - m), the rest s cos.
SoftmaxLossResult AmSoftmaxLoss(const Matrix &embeddings,
                                const std::vector<int> &labels,
                                const ClassifierParams &classifier,
                                const AmSoftmaxConfig &config,
                                Matrix *embedding_grad = nullptr,
                                ClassifierParams *clf_grad = nullptr,
                                double grad_scale = 1.0);

// Class means of support embeddings; every class in [0, n_classes) must
// have at least one support sample.
Matrix Prototypes(const Matrix &support, const std::vector<int> &support_labels,
                  int n_classes);

// Episodic cross-entropy over logits d(query, P_j).
double PrototypicalLoss(const Matrix &queries,
                        const std::vector<int> &query_labels,
                        const Matrix &prototypes, Matrix *query_grad = nullptr,
                        Matrix *proto_grad = nullptr, double grad_scale = 1.0);

// Distributes prototype gradients back onto support embeddings
// (d P_c / d x = 1/|S_c| for members of class c).
void ScatterPrototypeGrad(const Matrix &proto_grad,
                          const std::vector<int> &support_labels,
                          Matrix *support_grad);

// Context losses.  pooled holds the pre-head pooled embeddings e (one row
// per sample); each loss feeds them through the shared projection g and
// compares with the context vector.
//
// APF: minus the mean cosine between g(e) and mu over correctly
// classified samples.  ANF: plus the mean cosine over misclassified
// samples.  Both are 0 (skipped) on an empty index set, and 0 with a
// warning when |mu| < 1e-12 where the cosine is undefined.
double ApfLoss(const Matrix &pooled, const std::vector<int> &cor_indices,
               const ProjectionParams &proj, const ContextVector &context);
double AnfLoss(const Matrix &pooled, const std::vector<int> &mis_indices,
               const ProjectionParams &proj, const ContextVector &context);

// ADF: binary cross-entropy of p(z | e) = exp(g(e) . w_z) /
// (exp(g(e) . mu) + exp(-g(e) . mu)) with w_cor = mu, w_in = -mu, averaged
// over the whole batch.  Well defined at mu = 0.
double AdfLoss(const Matrix &pooled, const Feedback &feedback,
               const ProjectionParams &proj, const ContextVector &context);

struct ContextLossOptions {
  // Confine gradients to mu (skip projection and upstream embeddings).
  bool confine_to_mu = false;
  double grad_scale = 1.0;
};

// Value plus gradients for the variant's context loss.  Accumulates into
// context->mu_grad always, and into proj grads and pooled_grad unless
// confined.  variant must be one of kApf/kAnf/kAdf.
double ContextLossGrad(Variant variant, const Matrix &pooled,
                       const Feedback &feedback, ProjectionParams *proj,
                       ContextVector *context, Matrix *pooled_grad,
                       const ContextLossOptions &options);

// Bookkeeping for the combined objective.  In the episodic setting the
// total is L_PL + L_s (+ lambda L_mu); in pure-classification settings it
// is the classification loss (+ lambda L_mu).
struct LossParts {
  std::optional<double> l_s;
  std::optional<double> l_pl;
  std::optional<double> l_am;
  std::optional<double> l_mu;
};

struct LossBundle {
  double total = 0.0;
  double l_s = 0.0;
  double l_pl = 0.0;
  double l_am = 0.0;
  double l_mu = 0.0;
  double lambda_mu = 0.0;
  bool mu_active = false;
};

// Validates the parts against the variant (TAP/SAP must not carry L_mu,
// APF/ANF/ADF must) and composes the weighted total.
LossBundle TotalObjective(const LossParts &parts, Variant variant,
                          double lambda_mu);

}  // namespace apool

#endif  // APOOL_OBJECTIVES_H_
