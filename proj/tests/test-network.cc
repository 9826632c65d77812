// tests/test-network.cc

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

#include "apool/gradcheck.h"
#include "apool/network.h"
#include "apool/rng.h"
#include "doctest.h"

using namespace apool;

namespace {

AffineParams IdentityAffine(int dim) {
  AffineParams p;
  p.weight = Matrix(dim, dim);
  for (int i = 0; i < dim; i++) p.weight(i, i) = 1.0;
  p.bias = Matrix(1, dim);
  p.weight_grad = Matrix(dim, dim);
  p.bias_grad = Matrix(1, dim);
  return p;
}

Matrix RandomMatrix(int rows, int cols, Rng *rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.Size(); i++) m.Data()[i] = scale * rng->Gaussian();
  return m;
}

}  // namespace

TEST_CASE("extractor with identity layer applies tanh per frame") {
  ExtractorParams ext;
  ext.layers.push_back(IdentityAffine(3));
  Rng rng(1);
  const Matrix frames = RandomMatrix(5, 3, &rng);
  const Matrix out = ExtractorForward(frames, ext, nullptr);
  CHECK(out.NumRows() == 5);
  for (int t = 0; t < 5; t++)
    for (int d = 0; d < 3; d++)
      CHECK(out(t, d) == doctest::Approx(std::tanh(frames(t, d))).epsilon(1e-15));
}

TEST_CASE("extractor keeps T and rejects dim mismatch") {
  ExtractorParams ext;
  ext.layers.push_back(IdentityAffine(3));
  Rng rng(2);
  const Matrix one_frame = RandomMatrix(1, 3, &rng);
  CHECK(ExtractorForward(one_frame, ext, nullptr).NumRows() == 1);
  const Matrix wrong = RandomMatrix(4, 2, &rng);
  CHECK_THROWS_AS(ExtractorForward(wrong, ext, nullptr), ValidationError);
}

TEST_CASE("extractor backward matches finite differences") {
  Rng rng(3);
  ModelShape shape;
  shape.feature_dim = 4;
  shape.extractor_hidden = {5};
  shape.frame_dim = 3;
  shape.embed_dim = 4;
  shape.num_classes = 2;
  Model model = InitModel(shape, &rng);

  Matrix frames = RandomMatrix(6, 4, &rng, 0.7);
  const Matrix probe = RandomMatrix(6, 3, &rng);

  ExtractorCache cache;
  ExtractorForward(frames, model.extractor, &cache);
  model.ZeroGrad();
  const Matrix frames_grad =
      ExtractorBackward(probe, &model.extractor, cache);

  const auto fn = [&]() {
    const Matrix out = ExtractorForward(frames, model.extractor, nullptr);
    double sum = 0.0;
    for (int i = 0; i < out.Size(); i++) sum += out.Data()[i] * probe.Data()[i];
    return sum;
  };
  std::vector<GradCheckParam> params = {{"frames", &frames, &frames_grad}};
  for (size_t l = 0; l < model.extractor.layers.size(); l++) {
    params.push_back({"w", &model.extractor.layers[l].weight,
                      &model.extractor.layers[l].weight_grad});
    params.push_back({"b", &model.extractor.layers[l].bias,
                      &model.extractor.layers[l].bias_grad});
  }
  const GradCheckReport report = GradCheck(fn, params, 1e-6, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("projection fixtures") {
  ProjectionParams proj;
  proj.weight = Matrix(3, 3);
  for (int i = 0; i < 3; i++) proj.weight(i, i) = 1.0;
  proj.bias = Matrix(1, 3);

  const Matrix zero(1, 3);
  const Matrix out = ProjectGphi(zero, proj);
  for (int d = 0; d < 3; d++) CHECK(out(0, d) == 0.0);

  Rng rng(4);
  const Matrix any = RandomMatrix(10, 3, &rng, 2.0);
  const Matrix mapped = ProjectGphi(any, proj);
  for (int i = 0; i < mapped.Size(); i++) {
    CHECK(mapped.Data()[i] > -1.0);
    CHECK(mapped.Data()[i] < 1.0);
  }

  Matrix large(1, 3);
  for (int d = 0; d < 3; d++) large(0, d) = 50.0;
  const Matrix saturated = ProjectGphi(large, proj);
  for (int d = 0; d < 3; d++)
    CHECK(saturated(0, d) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("projection output norm stays under sqrt(D)") {
  Rng rng(14);
  ProjectionParams proj;
  proj.weight = RandomMatrix(4, 4, &rng);
  proj.bias = RandomMatrix(1, 4, &rng);
  const Matrix x = RandomMatrix(50, 4, &rng, 3.0);
  const Matrix out = ProjectGphi(x, proj);
  for (int i = 0; i < out.NumRows(); i++)
    CHECK(Norm2(out.Row(i)) < std::sqrt(4.0));
}

TEST_CASE("embed head fixtures and gradient") {
  EmbedHeadParams head;
  head.weight = Matrix(3, 3);
  for (int i = 0; i < 3; i++) head.weight(i, i) = 1.0;
  head.bias = Matrix(1, 3);
  head.weight_grad = Matrix(3, 3);
  head.bias_grad = Matrix(1, 3);

  Rng rng(5);
  Matrix x = RandomMatrix(4, 3, &rng);
  const Matrix pass = EmbedHead(x, head);
  CHECK(Matrix::MaxAbsDiff(pass, x) == 0.0);

  head.weight.SetZero();
  for (int d = 0; d < 3; d++) head.bias(0, d) = d + 0.5;
  const Matrix biased = EmbedHead(x, head);
  for (int i = 0; i < 4; i++)
    for (int d = 0; d < 3; d++) CHECK(biased(i, d) == d + 0.5);

  head.weight = RandomMatrix(3, 3, &rng, 0.6);
  head.bias = RandomMatrix(1, 3, &rng, 0.2);
  const Matrix probe = RandomMatrix(4, 3, &rng);
  head.weight_grad.SetZero();
  head.bias_grad.SetZero();
  const Matrix x_grad = EmbedHeadBackward(x, probe, &head);
  const auto fn = [&]() {
    const Matrix out = EmbedHead(x, head);
    double sum = 0.0;
    for (int i = 0; i < out.Size(); i++) sum += out.Data()[i] * probe.Data()[i];
    return sum;
  };
  const GradCheckReport report =
      GradCheck(fn,
                {{"weight", &head.weight, &head.weight_grad},
                 {"bias", &head.bias, &head.bias_grad},
                 {"x", &x, &x_grad}},
                1e-6, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("init: zero context vector, deterministic, bounded") {
  ModelShape shape;
  shape.feature_dim = 10;
  shape.extractor_hidden = {16};
  shape.frame_dim = 8;
  shape.embed_dim = 12;
  shape.num_classes = 5;

  Rng rng1(6), rng2(6);
  Model a = InitModel(shape, &rng1);
  Model b = InitModel(shape, &rng2);

  for (int d = 0; d < 8; d++) CHECK(a.context.mu(0, d) == 0.0);
  for (int d = 0; d < 12; d++) CHECK(a.head.bias(0, d) == 0.0);

  const auto pa = a.Params();
  auto pb = b.Params();
  for (size_t i = 0; i < pa.size(); i++)
    CHECK(Matrix::MaxAbsDiff(*pa[i].value, *pb[i].value) == 0.0);

  // Glorot bound on the first layer: sqrt(6 / (10 + 16)).
  const double bound = std::sqrt(6.0 / 26.0);
  const Matrix &w = a.extractor.layers[0].weight;
  for (int i = 0; i < w.Size(); i++) {
    CHECK(w.Data()[i] < bound);
    CHECK(w.Data()[i] > -bound);
  }
}
