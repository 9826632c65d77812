// tests/test-objectives.cc

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

#include <cmath>
#include <vector>

#include "apool/gradcheck.h"
#include "apool/numerics.h"
#include "apool/objectives.h"
#include "apool/rng.h"
#include "doctest.h"

using namespace apool;

namespace {

Matrix RandomMatrix(int rows, int cols, Rng *rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.Size(); i++) m.Data()[i] = scale * rng->Gaussian();
  return m;
}

Matrix FromRows(const std::vector<std::vector<double>> &rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); r++)
    for (size_t c = 0; c < rows[r].size(); c++) m(r, c) = rows[r][c];
  return m;
}

ClassifierParams MakeClassifier(const std::vector<std::vector<double>> &rows) {
  ClassifierParams clf;
  clf.weight = FromRows(rows);
  clf.weight_grad = Matrix(clf.weight.NumRows(), clf.weight.NumCols());
  return clf;
}

ProjectionParams RandomProjection(int dim, Rng *rng) {
  ProjectionParams proj;
  proj.weight = RandomMatrix(dim, dim, rng, 0.5);
  proj.bias = RandomMatrix(1, dim, rng, 0.2);
  proj.weight_grad = Matrix(dim, dim);
  proj.bias_grad = Matrix(1, dim);
  return proj;
}

ContextVector MakeContext(const std::vector<double> &mu) {
  ContextVector ctx;
  ctx.mu = RowVector(mu);
  ctx.mu_grad = Matrix(1, static_cast<int>(mu.size()));
  return ctx;
}

}  // namespace

TEST_CASE("scaled cosine distance fixtures") {
  const std::vector<double> a = {3.0, 4.0};
  CHECK(ScaledCosineDistance(a, a) == doctest::Approx(5.0).epsilon(1e-12));

  const std::vector<double> e1 = {1.0, 0.0}, e2 = {0.0, 1.0};
  CHECK(ScaledCosineDistance(e1, e2) == 0.0);

  const std::vector<double> b = {0.3, -1.2};
  std::vector<double> b7 = b;
  for (double &v : b7) v *= 7.0;
  CHECK(std::abs(ScaledCosineDistance(a, b) - ScaledCosineDistance(a, b7)) <
        1e-12);

  const std::vector<double> zero = {0.0, 0.0};
  CHECK_THROWS_AS(ScaledCosineDistance(a, zero), ValidationError);
}

TEST_CASE("softmax loss fixtures") {
  // Embedding orthogonal to every class weight: logits all 0, loss ln C.
  {
    const Matrix emb = FromRows({{0.0, 0.0, 1.0}});
    const ClassifierParams clf = MakeClassifier(
        {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {-1.0, 0.0, 0.0},
         {0.0, -2.0, 0.0}});
    const SoftmaxLossResult res = SoftmaxLoss(emb, {2}, clf);
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  // C=2 with logits (1, 0) for the true class: loss = ln(1 + e^-1).
  {
    const Matrix emb = FromRows({{1.0, 0.0}});
    const ClassifierParams clf = MakeClassifier({{1.0, 0.0}, {0.0, 1.0}});
    const SoftmaxLossResult res = SoftmaxLoss(emb, {0}, clf);
    CHECK(res.loss ==
          doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
    CHECK(res.predictions[0] == 0);
  }
  // Zero-norm class weight is rejected.
  {
    const Matrix emb = FromRows({{1.0, 0.0}});
    const ClassifierParams clf = MakeClassifier({{1.0, 0.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(SoftmaxLoss(emb, {0}, clf), ValidationError);
  }
}

TEST_CASE("softmax loss gradient") {
  Rng rng(21);
  Matrix emb = RandomMatrix(4, 5, &rng, 0.8);
  ClassifierParams clf;
  clf.weight = RandomMatrix(3, 5, &rng, 0.7);
  clf.weight_grad = Matrix(3, 5);
  const std::vector<int> labels = {0, 2, 1, 2};

  Matrix emb_grad(4, 5);
  SoftmaxLoss(emb, labels, clf, &emb_grad, &clf);
  const auto fn = [&]() { return SoftmaxLoss(emb, labels, clf).loss; };
  CHECK(GradCheck(fn,
                  {{"emb", &emb, &emb_grad},
                   {"clf", &clf.weight, &clf.weight_grad}},
                  1e-6, 1e-4)
            .pass);
}

TEST_CASE("am-softmax collapses to softmax over cosines at m=0, s=1") {
  Rng rng(22);
  const Matrix emb = RandomMatrix(5, 4, &rng);
  ClassifierParams clf;
  clf.weight = RandomMatrix(3, 4, &rng);
  clf.weight_grad = Matrix(3, 4);
  const std::vector<int> labels = {0, 1, 2, 1, 0};

  const SoftmaxLossResult am =
      AmSoftmaxLoss(emb, labels, clf, AmSoftmaxConfig{1.0, 0.0});

  // Direct evaluation over raw cosines.
  double expected = 0.0;
  for (int i = 0; i < 5; i++) {
    std::vector<double> cosines(3);
    for (int j = 0; j < 3; j++)
      cosines[j] = Dot(emb.Row(i), clf.weight.Row(j)) /
                   (Norm2(emb.Row(i)) * Norm2(clf.weight.Row(j)));
    expected += LogSumExp(cosines) - cosines[labels[i]];
  }
  expected /= 5;
  CHECK(std::abs(am.loss - expected) < 1e-12);
}

TEST_CASE("am-softmax fixture with cosines (1, -1)") {
  const Matrix emb = FromRows({{2.0, 0.0}});
  const ClassifierParams clf = MakeClassifier({{3.0, 0.0}, {-1.0, 0.0}});
  const SoftmaxLossResult res =
      AmSoftmaxLoss(emb, {0}, clf, AmSoftmaxConfig{1.0, 0.0});
  CHECK(res.loss == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
}

TEST_CASE("am-softmax defaults and margin monotonicity") {
  const AmSoftmaxConfig defaults;
  CHECK(defaults.scale == 40.0);
  CHECK(defaults.margin == 0.1);

  Rng rng(23);
  const Matrix emb = RandomMatrix(6, 4, &rng);
  ClassifierParams clf;
  clf.weight = RandomMatrix(4, 4, &rng);
  clf.weight_grad = Matrix(4, 4);
  const std::vector<int> labels = {0, 1, 2, 3, 0, 2};

  double last = -1.0;
  for (double margin : {0.0, 0.05, 0.1, 0.2}) {
    const double loss =
        AmSoftmaxLoss(emb, labels, clf, AmSoftmaxConfig{4.0, margin}).loss;
    CHECK(loss >= last);
    last = loss;
  }

  Matrix zero_emb = emb;
  for (int c = 0; c < 4; c++) zero_emb(0, c) = 0.0;
  CHECK_THROWS_AS(
      AmSoftmaxLoss(zero_emb, labels, clf, AmSoftmaxConfig{}),
      ValidationError);
}

TEST_CASE("am-softmax gradient") {
  Rng rng(24);
  Matrix emb = RandomMatrix(4, 5, &rng, 0.8);
  ClassifierParams clf;
  clf.weight = RandomMatrix(3, 5, &rng, 0.7);
  clf.weight_grad = Matrix(3, 5);
  const std::vector<int> labels = {1, 0, 2, 2};
  const AmSoftmaxConfig config{4.0, 0.1};

  Matrix emb_grad(4, 5);
  AmSoftmaxLoss(emb, labels, clf, config, &emb_grad, &clf);
  const auto fn = [&]() {
    return AmSoftmaxLoss(emb, labels, clf, config).loss;
  };
  CHECK(GradCheck(fn,
                  {{"emb", &emb, &emb_grad},
                   {"clf", &clf.weight, &clf.weight_grad}},
                  1e-6, 1e-4)
            .pass);
}

TEST_CASE("prototype fixtures") {
  const Matrix lone = FromRows({{0.4, -0.7}});
  CHECK(Matrix::MaxAbsDiff(Prototypes(lone, {0}, 1), lone) == 0.0);

  const Matrix two = FromRows({{0.0, 0.0}, {2.0, 2.0}});
  const Matrix proto = Prototypes(two, {0, 0}, 1);
  CHECK(proto(0, 0) == 1.0);
  CHECK(proto(0, 1) == 1.0);

  const Matrix swapped = FromRows({{2.0, 2.0}, {0.0, 0.0}});
  CHECK(Matrix::MaxAbsDiff(Prototypes(swapped, {0, 0}, 1), proto) == 0.0);

  CHECK_THROWS_AS(Prototypes(two, {0, 0}, 2), ValidationError);
}

TEST_CASE("prototypical loss fixtures and gradient") {
  const Matrix protos = FromRows({{1.0, 0.0}, {0.0, 1.0}});
  const Matrix query = FromRows({{1.0, 0.0}});
  CHECK(PrototypicalLoss(query, {0}, protos) ==
        doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));

  // Query orthogonal to every prototype: loss = ln N.
  const Matrix protos3 =
      FromRows({{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {-1.0, 0.0, 0.0}});
  const Matrix oquery = FromRows({{0.0, 0.0, 2.0}});
  CHECK(PrototypicalLoss(oquery, {1}, protos3) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  CHECK_THROWS_AS(
      PrototypicalLoss(query, {0}, FromRows({{1.0, 0.0}, {0.0, 0.0}})),
      ValidationError);

  Rng rng(25);
  Matrix support = RandomMatrix(6, 4, &rng, 0.8);
  Matrix queries = RandomMatrix(4, 4, &rng, 0.8);
  const std::vector<int> support_labels = {0, 0, 1, 1, 2, 2};
  const std::vector<int> query_labels = {0, 1, 2, 0};

  Matrix query_grad(4, 4), proto_grad(3, 4), support_grad(6, 4);
  const Matrix protos_r = Prototypes(support, support_labels, 3);
  PrototypicalLoss(queries, query_labels, protos_r, &query_grad, &proto_grad);
  ScatterPrototypeGrad(proto_grad, support_labels, &support_grad);

  const auto fn = [&]() {
    return PrototypicalLoss(queries, query_labels,
                            Prototypes(support, support_labels, 3));
  };
  CHECK(GradCheck(fn,
                  {{"queries", &queries, &query_grad},
                   {"support", &support, &support_grad}},
                  1e-6, 1e-4)
            .pass);
}

TEST_CASE("feedback partition") {
  const Feedback all_good = FeedbackPartition({1, 2, 0}, {1, 2, 0});
  CHECK(all_good.mis_indices.empty());
  CHECK(all_good.cor_indices.size() == 3);

  const Feedback all_bad = FeedbackPartition({1, 2, 0}, {0, 1, 2});
  CHECK(all_bad.cor_indices.empty());

  const Feedback mixed = FeedbackPartition({1, 2}, {1, 0});
  CHECK(mixed.cor_indices == std::vector<int>{0});
  CHECK(mixed.mis_indices == std::vector<int>{1});
}

TEST_CASE("apf and anf fixtures") {
  Rng rng(26);
  ProjectionParams proj = RandomProjection(3, &rng);
  const Matrix pooled = RandomMatrix(2, 3, &rng);

  // Choose mu parallel to g(e_0): cosine 1, APF loss -1, ANF loss +1.
  const Matrix gphi = ProjectGphi(pooled, proj);
  ContextVector parallel = MakeContext(
      {gphi(0, 0) * 2.0, gphi(0, 1) * 2.0, gphi(0, 2) * 2.0});
  CHECK(ApfLoss(pooled, {0}, proj, parallel) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(AnfLoss(pooled, {0}, proj, parallel) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Orthogonal mu: cosine 0.
  std::vector<double> orth = {-gphi(0, 1), gphi(0, 0), 0.0};
  const ContextVector orthogonal = MakeContext(orth);
  CHECK(std::abs(ApfLoss(pooled, {0}, proj, orthogonal)) < 1e-12);

  // Empty sample sets and a zero context vector contribute nothing.
  CHECK(ApfLoss(pooled, {}, proj, parallel) == 0.0);
  CHECK(AnfLoss(pooled, {}, proj, parallel) == 0.0);
  const ContextVector zero = MakeContext({0.0, 0.0, 0.0});
  CHECK(ApfLoss(pooled, {0, 1}, proj, zero) == 0.0);
  CHECK(AnfLoss(pooled, {0, 1}, proj, zero) == 0.0);
}

TEST_CASE("apf and anf stay within [-1, 1]") {
  Rng rng(27);
  for (int trial = 0; trial < 20; trial++) {
    ProjectionParams proj = RandomProjection(4, &rng);
    const Matrix pooled = RandomMatrix(5, 4, &rng);
    ContextVector ctx = MakeContext({rng.Gaussian(), rng.Gaussian(),
                                     rng.Gaussian(), rng.Gaussian()});
    std::vector<int> all = {0, 1, 2, 3, 4};
    const double apf = ApfLoss(pooled, all, proj, ctx);
    const double anf = AnfLoss(pooled, all, proj, ctx);
    CHECK(apf >= -1.0);
    CHECK(apf <= 1.0);
    CHECK(anf >= -1.0);
    CHECK(anf <= 1.0);
  }
}

TEST_CASE("one gradient step on mu reduces the anf cosine") {
  Rng rng(28);
  ProjectionParams proj = RandomProjection(4, &rng);
  const Matrix pooled = RandomMatrix(3, 4, &rng);
  ContextVector ctx = MakeContext({0.5, -0.3, 0.8, 0.1});
  Feedback feedback;
  feedback.correct = {0, 0, 0};
  feedback.mis_indices = {0, 1, 2};

  const double before = AnfLoss(pooled, feedback.mis_indices, proj, ctx);
  ContextLossOptions options;
  options.confine_to_mu = true;  // keep e and the projection fixed
  ContextLossGrad(Variant::kAnf, pooled, feedback, &proj, &ctx, nullptr,
                  options);
  for (int d = 0; d < 4; d++) ctx.mu(0, d) -= 0.01 * ctx.mu_grad(0, d);
  const double after = AnfLoss(pooled, feedback.mis_indices, proj, ctx);
  CHECK(after < before);
}

TEST_CASE("adf fixtures and identities") {
  Rng rng(29);
  ProjectionParams proj = RandomProjection(3, &rng);
  const Matrix pooled = RandomMatrix(4, 3, &rng);
  Feedback feedback;
  feedback.correct = {1, 0, 1, 0};
  feedback.cor_indices = {0, 2};
  feedback.mis_indices = {1, 3};

  // Zero mu: both logits vanish, p = 1/2, per-sample loss ln 2.
  const ContextVector zero = MakeContext({0.0, 0.0, 0.0});
  CHECK(AdfLoss(pooled, feedback, proj, zero) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const ContextVector ctx = MakeContext({0.7, -0.4, 0.2});
  const Matrix gphi = ProjectGphi(pooled, proj);
  for (int i = 0; i < 4; i++) {
    const double t = Dot(gphi.Row(i), ctx.mu.Row(0));
    const double p_cor = std::exp(t) / (std::exp(t) + std::exp(-t));
    // p(cor | e) = logistic(2 g(e) . mu).
    CHECK(std::abs(p_cor - Sigmoid(2.0 * t)) < 1e-12);
    const double p_in = std::exp(-t) / (std::exp(t) + std::exp(-t));
    CHECK(std::abs(p_cor + p_in - 1.0) < 1e-12);
  }

  CHECK(AdfLoss(pooled, feedback, proj, ctx) >= 0.0);

  // Negating mu while swapping labels leaves the loss unchanged.
  ContextVector negated = MakeContext({-0.7, 0.4, -0.2});
  Feedback swapped;
  swapped.correct = {0, 1, 0, 1};
  swapped.cor_indices = {1, 3};
  swapped.mis_indices = {0, 2};
  CHECK(std::abs(AdfLoss(pooled, feedback, proj, ctx) -
                 AdfLoss(pooled, swapped, proj, negated)) < 1e-12);
}

TEST_CASE("context loss gradients, including the stop-gradient switch") {
  Rng rng(30);
  for (Variant variant : {Variant::kApf, Variant::kAnf, Variant::kAdf}) {
    ProjectionParams proj = RandomProjection(3, &rng);
    Matrix pooled = RandomMatrix(4, 3, &rng, 0.8);
    ContextVector ctx =
        MakeContext({rng.Gaussian(), rng.Gaussian(), rng.Gaussian()});
    Feedback feedback;
    feedback.correct = {1, 0, 1, 0};
    feedback.cor_indices = {0, 2};
    feedback.mis_indices = {1, 3};
    if (variant == Variant::kApf) {
      feedback.correct = {1, 1, 1, 1};
      feedback.cor_indices = {0, 1, 2, 3};
      feedback.mis_indices = {};
    } else if (variant == Variant::kAnf) {
      feedback.correct = {0, 0, 0, 0};
      feedback.cor_indices = {};
      feedback.mis_indices = {0, 1, 2, 3};
    }

    Matrix pooled_grad(4, 3);
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
    CHECK(GradCheck(fn,
                    {{"mu", &ctx.mu, &ctx.mu_grad},
                     {"proj.weight", &proj.weight, &proj.weight_grad},
                     {"proj.bias", &proj.bias, &proj.bias_grad},
                     {"pooled", &pooled, &pooled_grad}},
                    1e-6, 1e-4)
              .pass);

    // Confined to mu: projection and embeddings stay untouched.
    proj.weight_grad.SetZero();
    proj.bias_grad.SetZero();
    ctx.mu_grad.SetZero();
    pooled_grad.SetZero();
    ContextLossOptions confined;
    confined.confine_to_mu = true;
    ContextLossGrad(variant, pooled, feedback, &proj, &ctx, &pooled_grad,
                    confined);
    CHECK(Matrix::MaxAbsDiff(proj.weight_grad, Matrix(3, 3)) == 0.0);
    CHECK(Matrix::MaxAbsDiff(pooled_grad, Matrix(4, 3)) == 0.0);
    bool mu_touched = false;
    for (int d = 0; d < 3; d++) mu_touched |= ctx.mu_grad(0, d) != 0.0;
    CHECK(mu_touched);
  }
}

TEST_CASE("total objective composition and validation") {
  LossParts episodic;
  episodic.l_s = 0.7;
  episodic.l_pl = 1.1;
  const LossBundle sap = TotalObjective(episodic, Variant::kSap, 1.0);
  CHECK(sap.total == 0.7 + 1.1);
  CHECK_FALSE(sap.mu_active);

  LossParts with_mu = episodic;
  with_mu.l_mu = -0.4;
  const LossBundle adf_off = TotalObjective(with_mu, Variant::kAdf, 0.0);
  CHECK(adf_off.total == sap.total);

  const LossBundle anf = TotalObjective(with_mu, Variant::kAnf, 1.0);
  CHECK(std::abs(anf.total - (0.7 + 1.1 - 0.4)) < 1e-12);

  CHECK_THROWS_AS(TotalObjective(with_mu, Variant::kTap, 1.0),
                  ValidationError);
  CHECK_THROWS_AS(TotalObjective(episodic, Variant::kAdf, 1.0),
                  ValidationError);

  LossParts classification;
  classification.l_am = 0.9;
  classification.l_mu = 0.2;
  const LossBundle am_adf = TotalObjective(classification, Variant::kAdf, 0.5);
  CHECK(std::abs(am_adf.total - (0.9 + 0.5 * 0.2)) < 1e-12);

  LossParts both;
  both.l_s = 0.1;
  both.l_am = 0.2;
  CHECK_THROWS_AS(TotalObjective(both, Variant::kSap, 1.0), ValidationError);
}
