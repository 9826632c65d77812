// src/objectives.cc

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

#include "apool/objectives.h"

#include <algorithm>
#include <cmath>

#include "apool/numerics.h"

namespace apool {

namespace {

constexpr double kZeroNormTol = 1e-12;

int Argmax(std::span<const double> row) {
  int best = 0;
  for (size_t j = 1; j < row.size(); j++)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

}  // namespace

std::string VariantName(Variant v) {
  switch (v) {
    case Variant::kTap: return "TAP";
    case Variant::kSap: return "SAP";
    case Variant::kApf: return "APF";
    case Variant::kAnf: return "ANF";
    case Variant::kAdf: return "ADF";
  }
  APOOL_ERR("unknown variant");
}

Variant ParseVariant(const std::string &name) {
  if (name == "TAP") return Variant::kTap;
  if (name == "SAP") return Variant::kSap;
  if (name == "APF") return Variant::kApf;
  if (name == "ANF") return Variant::kAnf;
  if (name == "ADF") return Variant::kAdf;
  APOOL_ERR("unknown variant '" << name << "' (expected TAP|SAP|APF|ANF|ADF)");
}

std::string ObjectiveName(Objective o) {
  switch (o) {
    case Objective::kSoftmax: return "softmax";
    case Objective::kAmSoftmax: return "am_softmax";
    case Objective::kPlSoftmax: return "pl_softmax";
  }
  APOOL_ERR("unknown objective");
}

Objective ParseObjective(const std::string &name) {
  if (name == "softmax") return Objective::kSoftmax;
  if (name == "am_softmax") return Objective::kAmSoftmax;
  if (name == "pl_softmax") return Objective::kPlSoftmax;
  APOOL_ERR("unknown objective '" << name
            << "' (expected softmax|am_softmax|pl_softmax)");
}

double ScaledCosineDistance(std::span<const double> a1,
                            std::span<const double> a2) {
  APOOL_ASSERT(a1.size() == a2.size());
  const double norm2 = Norm2(a2);
  if (norm2 < kZeroNormTol)
    APOOL_ERR("ScaledCosineDistance: second argument has near-zero norm");
  return Dot(a1, a2) / norm2;
}

Feedback FeedbackPartition(const std::vector<int> &predictions,
                           const std::vector<int> &labels) {
  APOOL_ASSERT(predictions.size() == labels.size());
  Feedback fb;
  fb.correct.resize(labels.size());
  for (size_t i = 0; i < labels.size(); i++) {
    fb.correct[i] = predictions[i] == labels[i];
    if (fb.correct[i])
      fb.cor_indices.push_back(static_cast<int>(i));
    else
      fb.mis_indices.push_back(static_cast<int>(i));
  }
  return fb;
}

SoftmaxLossResult SoftmaxLoss(const Matrix &embeddings,
                              const std::vector<int> &labels,
                              const ClassifierParams &classifier,
                              Matrix *embedding_grad,
                              ClassifierParams *clf_grad, double grad_scale) {
  const int batch = embeddings.NumRows();
  const int num_classes = classifier.NumClasses();
  APOOL_ASSERT(batch >= 1);
  APOOL_ASSERT(static_cast<int>(labels.size()) == batch);
  APOOL_ASSERT(embeddings.NumCols() == classifier.EmbedDim());
  for (int i = 0; i < batch; i++)
    if (labels[i] < 0 || labels[i] >= num_classes)
      APOOL_ERR("SoftmaxLoss: label " << labels[i] << " out of range");

  std::vector<double> weight_norms(num_classes);
  for (int j = 0; j < num_classes; j++) {
    weight_norms[j] = Norm2(classifier.weight.Row(j));
    if (weight_norms[j] < kZeroNormTol)
      APOOL_ERR("SoftmaxLoss: classifier weight " << j << " has zero norm");
  }

  SoftmaxLossResult result;
  result.predictions.resize(batch);
  Matrix logits(batch, num_classes);
  for (int i = 0; i < batch; i++) {
    for (int j = 0; j < num_classes; j++)
      logits(i, j) =
          Dot(embeddings.Row(i), classifier.weight.Row(j)) / weight_norms[j];
    result.predictions[i] = Argmax(logits.Row(i));
    result.loss += LogSumExp(logits.Row(i)) - logits(i, labels[i]);
  }
  result.loss /= batch;

  if (embedding_grad == nullptr && clf_grad == nullptr) return result;
  if (embedding_grad) APOOL_ASSERT(embedding_grad->SameDim(embeddings));

  for (int i = 0; i < batch; i++) {
    const std::vector<double> probs = Softmax(logits.Row(i));
    for (int j = 0; j < num_classes; j++) {
      const double g = grad_scale *
                       (probs[j] - (j == labels[i] ? 1.0 : 0.0)) / batch;
      if (g == 0.0) continue;
      if (embedding_grad)
        Axpy(g / weight_norms[j], classifier.weight.Row(j),
             embedding_grad->Row(i));
      if (clf_grad) {
        // d logit / d w_j = (x_i - logit * w_j/|w_j|) / |w_j|.
        std::span<double> wg = clf_grad->weight_grad.Row(j);
        Axpy(g / weight_norms[j], embeddings.Row(i), wg);
        Axpy(-g * logits(i, j) / (weight_norms[j] * weight_norms[j]),
             classifier.weight.Row(j), wg);
      }
    }
  }
  return result;
}

SoftmaxLossResult AmSoftmaxLoss(const Matrix &embeddings,
                                const std::vector<int> &labels,
                                const ClassifierParams &classifier,
                                const AmSoftmaxConfig &config,
                                Matrix *embedding_grad,
                                ClassifierParams *clf_grad,
                                double grad_scale) {
  const int batch = embeddings.NumRows();
  const int num_classes = classifier.NumClasses();
  APOOL_ASSERT(batch >= 1 && static_cast<int>(labels.size()) == batch);
  APOOL_ASSERT(embeddings.NumCols() == classifier.EmbedDim());
  APOOL_ASSERT(config.scale > 0.0 && config.margin >= 0.0);

  std::vector<double> emb_norms(batch), weight_norms(num_classes);
  for (int i = 0; i < batch; i++) {
    emb_norms[i] = Norm2(embeddings.Row(i));
    if (emb_norms[i] < kZeroNormTol)
      APOOL_ERR("AmSoftmaxLoss: embedding " << i << " has zero norm");
  }
  for (int j = 0; j < num_classes; j++) {
    weight_norms[j] = Norm2(classifier.weight.Row(j));
    if (weight_norms[j] < kZeroNormTol)
      APOOL_ERR("AmSoftmaxLoss: classifier weight " << j << " has zero norm");
  }

  SoftmaxLossResult result;
  result.predictions.resize(batch);
  Matrix cosines(batch, num_classes);
  std::vector<double> z(num_classes);
  Matrix probs(batch, num_classes);
  for (int i = 0; i < batch; i++) {
    APOOL_ASSERT(labels[i] >= 0 && labels[i] < num_classes);
    for (int j = 0; j < num_classes; j++) {
      cosines(i, j) = Dot(embeddings.Row(i), classifier.weight.Row(j)) /
                      (emb_norms[i] * weight_norms[j]);
      z[j] = config.scale *
             (cosines(i, j) - (j == labels[i] ? config.margin : 0.0));
    }
    result.predictions[i] = Argmax(cosines.Row(i));
    result.loss += LogSumExp(z) - z[labels[i]];
    const std::vector<double> p = Softmax(z);
    std::copy(p.begin(), p.end(), probs.RowData(i));
  }
  result.loss /= batch;

  if (embedding_grad == nullptr && clf_grad == nullptr) return result;
  if (embedding_grad) APOOL_ASSERT(embedding_grad->SameDim(embeddings));

  for (int i = 0; i < batch; i++) {
    for (int j = 0; j < num_classes; j++) {
      // d loss / d cos_ij; the margin shift is constant in cos.
      const double g = grad_scale * config.scale *
                       (probs(i, j) - (j == labels[i] ? 1.0 : 0.0)) / batch;
      if (g == 0.0) continue;
      const double inv_both = 1.0 / (emb_norms[i] * weight_norms[j]);
      if (embedding_grad) {
        std::span<double> eg = embedding_grad->Row(i);
        Axpy(g * inv_both, classifier.weight.Row(j), eg);
        Axpy(-g * cosines(i, j) / (emb_norms[i] * emb_norms[i]),
             embeddings.Row(i), eg);
      }
      if (clf_grad) {
        std::span<double> wg = clf_grad->weight_grad.Row(j);
        Axpy(g * inv_both, embeddings.Row(i), wg);
        Axpy(-g * cosines(i, j) / (weight_norms[j] * weight_norms[j]),
             classifier.weight.Row(j), wg);
      }
    }
  }
  return result;
}

Matrix Prototypes(const Matrix &support, const std::vector<int> &support_labels,
                  int n_classes) {
  APOOL_ASSERT(support.NumRows() == static_cast<int>(support_labels.size()));
  APOOL_ASSERT(n_classes >= 1);
  Matrix protos(n_classes, support.NumCols());
  std::vector<int> counts(n_classes, 0);
  for (int i = 0; i < support.NumRows(); i++) {
    const int c = support_labels[i];
    APOOL_ASSERT(c >= 0 && c < n_classes);
    Axpy(1.0, support.Row(i), protos.Row(c));
    counts[c]++;
  }
  for (int c = 0; c < n_classes; c++) {
    if (counts[c] == 0)
      APOOL_ERR("Prototypes: class " << c << " has no support samples");
    for (int d = 0; d < protos.NumCols(); d++) protos(c, d) /= counts[c];
  }
  return protos;
}

double PrototypicalLoss(const Matrix &queries,
                        const std::vector<int> &query_labels,
                        const Matrix &prototypes, Matrix *query_grad,
                        Matrix *proto_grad, double grad_scale) {
  const int num_queries = queries.NumRows();
  const int n_classes = prototypes.NumRows();
  APOOL_ASSERT(num_queries >= 1);
  APOOL_ASSERT(static_cast<int>(query_labels.size()) == num_queries);
  APOOL_ASSERT(queries.NumCols() == prototypes.NumCols());

  std::vector<double> proto_norms(n_classes);
  for (int c = 0; c < n_classes; c++) {
    proto_norms[c] = Norm2(prototypes.Row(c));
    if (proto_norms[c] < kZeroNormTol)
      APOOL_ERR("PrototypicalLoss: prototype " << c << " has zero norm");
  }

  double loss = 0.0;
  Matrix logits(num_queries, n_classes);
  for (int i = 0; i < num_queries; i++) {
    APOOL_ASSERT(query_labels[i] >= 0 && query_labels[i] < n_classes);
    for (int c = 0; c < n_classes; c++)
      logits(i, c) =
          Dot(queries.Row(i), prototypes.Row(c)) / proto_norms[c];
    loss += LogSumExp(logits.Row(i)) - logits(i, query_labels[i]);
  }
  loss /= num_queries;

  if (query_grad == nullptr && proto_grad == nullptr) return loss;
  if (query_grad) APOOL_ASSERT(query_grad->SameDim(queries));
  if (proto_grad) APOOL_ASSERT(proto_grad->SameDim(prototypes));

  for (int i = 0; i < num_queries; i++) {
    const std::vector<double> probs = Softmax(logits.Row(i));
    for (int c = 0; c < n_classes; c++) {
      const double g = grad_scale *
                       (probs[c] - (c == query_labels[i] ? 1.0 : 0.0)) /
                       num_queries;
      if (g == 0.0) continue;
      if (query_grad)
        Axpy(g / proto_norms[c], prototypes.Row(c), query_grad->Row(i));
      if (proto_grad) {
        std::span<double> pg = proto_grad->Row(c);
        Axpy(g / proto_norms[c], queries.Row(i), pg);
        Axpy(-g * logits(i, c) / (proto_norms[c] * proto_norms[c]),
             prototypes.Row(c), pg);
      }
    }
  }
  return loss;
}

void ScatterPrototypeGrad(const Matrix &proto_grad,
                          const std::vector<int> &support_labels,
                          Matrix *support_grad) {
  APOOL_ASSERT(support_grad->NumRows() ==
               static_cast<int>(support_labels.size()));
  APOOL_ASSERT(support_grad->NumCols() == proto_grad.NumCols());
  std::vector<int> counts(proto_grad.NumRows(), 0);
  for (int label : support_labels) counts[label]++;
  for (int i = 0; i < support_grad->NumRows(); i++) {
    const int c = support_labels[i];
    Axpy(1.0 / counts[c], proto_grad.Row(c), support_grad->Row(i));
  }
}

namespace {

// Mean +/- cosine between g(e) and mu over an index subset; the sign is
// +1 for ANF (push misclassified away) and -1 for APF (pull correct
// samples in).  Gradient flow obeys options.
double CosineContextLoss(const Matrix &pooled, const std::vector<int> &indices,
                         double sign, const ProjectionParams &proj,
                         const ContextVector &context, ProjectionParams *pg,
                         ContextVector *cg, Matrix *pooled_grad,
                         const ContextLossOptions &options, bool want_grad) {
  if (indices.empty()) return 0.0;
  const double mu_norm = Norm2(context.mu.Row(0));
  if (mu_norm < kZeroNormTol) {
    Warn("context loss skipped: |mu| ~ 0, cosine undefined (initial state)");
    return 0.0;
  }

  const int n = static_cast<int>(indices.size());
  Matrix subset(n, pooled.NumCols());
  for (int k = 0; k < n; k++)
    std::copy(pooled.RowData(indices[k]),
              pooled.RowData(indices[k]) + pooled.NumCols(),
              subset.RowData(k));

  const Matrix gphi = ProjectGphi(subset, proj);
  std::vector<double> u_norms(n), cosines(n);
  double loss = 0.0;
  for (int k = 0; k < n; k++) {
    u_norms[k] = Norm2(gphi.Row(k));
    cosines[k] = Dot(gphi.Row(k), context.mu.Row(0)) / (u_norms[k] * mu_norm);
    loss += sign * cosines[k];
  }
  loss /= n;
  if (!want_grad) return loss;

  const double coeff = options.grad_scale * sign / n;
  Matrix grad_gphi(n, pooled.NumCols());
  for (int k = 0; k < n; k++) {
    // d cos / d u = mu/(|u||mu|) - cos u/|u|^2, and symmetrically for mu.
    Axpy(coeff / (u_norms[k] * mu_norm), context.mu.Row(0),
         grad_gphi.Row(k));
    Axpy(-coeff * cosines[k] / (u_norms[k] * u_norms[k]), gphi.Row(k),
         grad_gphi.Row(k));
    Axpy(coeff / (u_norms[k] * mu_norm), gphi.Row(k), cg->mu_grad.Row(0));
    Axpy(-coeff * cosines[k] / (mu_norm * mu_norm), context.mu.Row(0),
         cg->mu_grad.Row(0));
  }

  if (!options.confine_to_mu) {
    Matrix grad_subset = ProjectGphiBackward(subset, gphi, grad_gphi, pg);
    if (pooled_grad)
      for (int k = 0; k < n; k++)
        Axpy(1.0, grad_subset.Row(k), pooled_grad->Row(indices[k]));
  }
  return loss;
}

double BinaryContextLoss(const Matrix &pooled, const Feedback &feedback,
                         const ProjectionParams &proj,
                         const ContextVector &context, ProjectionParams *pg,
                         ContextVector *cg, Matrix *pooled_grad,
                         const ContextLossOptions &options, bool want_grad) {
  const int n = pooled.NumRows();
  if (n == 0) APOOL_ERR("AdfLoss: empty batch");
  APOOL_ASSERT(static_cast<int>(feedback.correct.size()) == n);

  const Matrix gphi = ProjectGphi(pooled, proj);
  double loss = 0.0;
  std::vector<double> dots(n);
  for (int i = 0; i < n; i++) {
    dots[i] = Dot(gphi.Row(i), context.mu.Row(0));
    const double sign = feedback.correct[i] ? 1.0 : -1.0;
    // log p(z|e) = log sigmoid(2 sign (g(e) . mu)).
    loss -= LogSigmoid(2.0 * sign * dots[i]);
  }
  loss /= n;
  if (!want_grad) return loss;

  Matrix grad_gphi(n, pooled.NumCols());
  for (int i = 0; i < n; i++) {
    const double sign = feedback.correct[i] ? 1.0 : -1.0;
    const double p = Sigmoid(2.0 * sign * dots[i]);
    const double dloss_ddot = -options.grad_scale * 2.0 * sign * (1.0 - p) / n;
    Axpy(dloss_ddot, context.mu.Row(0), grad_gphi.Row(i));
    Axpy(dloss_ddot, gphi.Row(i), cg->mu_grad.Row(0));
  }

  if (!options.confine_to_mu) {
    Matrix grad_pooled = ProjectGphiBackward(pooled, gphi, grad_gphi, pg);
    if (pooled_grad)
      for (int i = 0; i < n; i++)
        Axpy(1.0, grad_pooled.Row(i), pooled_grad->Row(i));
  }
  return loss;
}

}  // namespace

double ApfLoss(const Matrix &pooled, const std::vector<int> &cor_indices,
               const ProjectionParams &proj, const ContextVector &context) {
  return CosineContextLoss(pooled, cor_indices, -1.0, proj, context, nullptr,
                           nullptr, nullptr, {}, false);
}

double AnfLoss(const Matrix &pooled, const std::vector<int> &mis_indices,
               const ProjectionParams &proj, const ContextVector &context) {
  return CosineContextLoss(pooled, mis_indices, +1.0, proj, context, nullptr,
                           nullptr, nullptr, {}, false);
}

double AdfLoss(const Matrix &pooled, const Feedback &feedback,
               const ProjectionParams &proj, const ContextVector &context) {
  return BinaryContextLoss(pooled, feedback, proj, context, nullptr, nullptr,
                           nullptr, {}, false);
}

double ContextLossGrad(Variant variant, const Matrix &pooled,
                       const Feedback &feedback, ProjectionParams *proj,
                       ContextVector *context, Matrix *pooled_grad,
                       const ContextLossOptions &options) {
  switch (variant) {
    case Variant::kApf:
      return CosineContextLoss(pooled, feedback.cor_indices, -1.0, *proj,
                               *context, proj, context, pooled_grad, options,
                               true);
    case Variant::kAnf:
      return CosineContextLoss(pooled, feedback.mis_indices, +1.0, *proj,
                               *context, proj, context, pooled_grad, options,
                               true);
    case Variant::kAdf:
      return BinaryContextLoss(pooled, feedback, *proj, *context, proj,
                               context, pooled_grad, options, true);
    default:
      APOOL_ERR("ContextLossGrad: variant " << VariantName(variant)
                << " has no context loss");
  }
}

LossBundle TotalObjective(const LossParts &parts, Variant variant,
                          double lambda_mu) {
  if (parts.l_s && parts.l_am)
    APOOL_ERR("TotalObjective: both softmax and AM-softmax parts present");
  if (parts.l_pl && !parts.l_s)
    APOOL_ERR("TotalObjective: episodic total needs the softmax part");
  if (!parts.l_s && !parts.l_am)
    APOOL_ERR("TotalObjective: no classification part present");
  if (VariantHasContextLoss(variant) && !parts.l_mu)
    APOOL_ERR("TotalObjective: " << VariantName(variant)
              << " requires a context loss part");
  if (!VariantHasContextLoss(variant) && parts.l_mu)
    APOOL_ERR("TotalObjective: " << VariantName(variant)
              << " must not carry a context loss part");

  LossBundle bundle;
  bundle.lambda_mu = lambda_mu;
  if (parts.l_s) bundle.l_s = *parts.l_s;
  if (parts.l_pl) bundle.l_pl = *parts.l_pl;
  if (parts.l_am) bundle.l_am = *parts.l_am;
  if (parts.l_mu) {
    bundle.l_mu = *parts.l_mu;
    bundle.mu_active = true;
  }
  bundle.total = bundle.l_s + bundle.l_pl + bundle.l_am +
                 (parts.l_mu ? lambda_mu * bundle.l_mu : 0.0);
  return bundle;
}

}  // namespace apool
