// src/checkpoint.cc

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

#include "apool/checkpoint.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace apool {

namespace {

constexpr const char *kMagic = "APOOL_CKPT";
constexpr int kVersion = 1;

}  // namespace

void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("SaveCheckpoint: cannot open '" << path << "'");
  Model &model = const_cast<Model &>(ckpt.model);

  out << kMagic << " " << kVersion << "\n";
  out << "variant " << VariantName(ckpt.variant) << "\n";
  out << "objective " << ObjectiveName(ckpt.objective) << "\n";
  out << "normalize " << (ckpt.normalize ? 1 : 0) << "\n";

  const std::vector<NamedParam> params = model.Params();
  out << "tensors " << params.size() << "\n";
  char buf[32];
  for (const NamedParam &p : params) {
    if (!p.value->AllFinite())
      APOOL_NUMERIC_ERR("SaveCheckpoint: tensor '" << p.name
                        << "' has non-finite entries");
    out << "tensor " << p.name << " " << p.value->NumRows() << " "
        << p.value->NumCols() << "\n";
    for (int r = 0; r < p.value->NumRows(); r++) {
      for (int c = 0; c < p.value->NumCols(); c++) {
        std::snprintf(buf, sizeof(buf), "%.17g", (*p.value)(r, c));
        out << (c ? " " : "") << buf;
      }
      out << "\n";
    }
  }
  if (!out) APOOL_ERR("SaveCheckpoint: write to '" << path << "' failed");
}

Checkpoint LoadCheckpoint(const std::string &path) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("LoadCheckpoint: cannot open '" << path << "'");

  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic)
    APOOL_ERR("LoadCheckpoint: '" << path << "' is not a checkpoint file");
  if (version != kVersion)
    APOOL_ERR("LoadCheckpoint: unsupported version " << version);

  Checkpoint ckpt;
  std::string key, value;
  in >> key >> value;
  if (key != "variant") APOOL_ERR("LoadCheckpoint: expected 'variant' line");
  ckpt.variant = ParseVariant(value);
  in >> key >> value;
  if (key != "objective") APOOL_ERR("LoadCheckpoint: expected 'objective'");
  ckpt.objective = ParseObjective(value);
  int norm_flag = 1;
  in >> key >> norm_flag;
  if (key != "normalize") APOOL_ERR("LoadCheckpoint: expected 'normalize'");
  ckpt.normalize = norm_flag != 0;

  size_t num_tensors = 0;
  in >> key >> num_tensors;
  if (key != "tensors") APOOL_ERR("LoadCheckpoint: expected 'tensors'");

  std::map<std::string, Matrix> tensors;
  for (size_t k = 0; k < num_tensors; k++) {
    std::string name;
    int rows = 0, cols = 0;
    in >> key >> name >> rows >> cols;
    if (!in || key != "tensor" || rows < 1 || cols < 1)
      APOOL_ERR("LoadCheckpoint: malformed tensor header #" << k);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; r++)
      for (int c = 0; c < cols; c++) {
        if (!(in >> m(r, c)))
          APOOL_ERR("LoadCheckpoint: truncated tensor '" << name << "'");
        if (!std::isfinite(m(r, c)))
          APOOL_NUMERIC_ERR("LoadCheckpoint: non-finite value in '" << name
                            << "'");
      }
    tensors[name] = std::move(m);
  }

  auto take = [&](const std::string &name) -> Matrix {
    auto it = tensors.find(name);
    if (it == tensors.end())
      APOOL_ERR("LoadCheckpoint: missing tensor '" << name << "'");
    Matrix m = std::move(it->second);
    tensors.erase(it);
    return m;
  };

  // Rebuild the model from tensor shapes alone.
  Model &model = ckpt.model;
  for (int l = 0;; l++) {
    const std::string base = "extractor." + std::to_string(l);
    if (tensors.find(base + ".weight") == tensors.end()) break;
    AffineParams layer;
    layer.weight = take(base + ".weight");
    layer.bias = take(base + ".bias");
    if (layer.bias.NumRows() != 1 || layer.bias.NumCols() != layer.OutDim())
      APOOL_ERR("LoadCheckpoint: bias shape mismatch in layer " << l);
    layer.weight_grad = Matrix(layer.OutDim(), layer.InDim());
    layer.bias_grad = Matrix(1, layer.OutDim());
    model.extractor.layers.push_back(std::move(layer));
  }
  if (model.extractor.layers.empty())
    APOOL_ERR("LoadCheckpoint: no extractor layers found");

  model.proj.weight = take("proj.weight");
  model.proj.bias = take("proj.bias");
  if (model.proj.weight.NumRows() != model.proj.weight.NumCols())
    APOOL_ERR("LoadCheckpoint: projection weight is not square");
  model.proj.weight_grad = Matrix(model.proj.Dim(), model.proj.Dim());
  model.proj.bias_grad = Matrix(1, model.proj.Dim());

  model.context.mu = take("context.mu");
  model.context.mu_grad = Matrix(1, model.context.Dim());

  model.head.weight = take("head.weight");
  model.head.bias = take("head.bias");
  model.head.weight_grad = Matrix(model.head.OutDim(), model.head.InDim());
  model.head.bias_grad = Matrix(1, model.head.OutDim());

  model.classifier.weight = take("classifier.weight");
  model.classifier.weight_grad =
      Matrix(model.classifier.NumClasses(), model.classifier.EmbedDim());

  if (!tensors.empty())
    APOOL_ERR("LoadCheckpoint: unexpected tensor '" << tensors.begin()->first
              << "'");

  ModelShape &shape = model.shape;
  shape.feature_dim = model.extractor.InputDim();
  shape.extractor_hidden.clear();
  for (size_t l = 0; l + 1 < model.extractor.layers.size(); l++)
    shape.extractor_hidden.push_back(model.extractor.layers[l].OutDim());
  shape.frame_dim = model.extractor.OutputDim();
  shape.embed_dim = model.head.OutDim();
  shape.num_classes = model.classifier.NumClasses();

  if (model.proj.Dim() != shape.frame_dim)
    APOOL_ERR("LoadCheckpoint: projection dim " << model.proj.Dim()
              << " != frame dim " << shape.frame_dim);
  if (model.head.InDim() != shape.frame_dim)
    APOOL_ERR("LoadCheckpoint: head input dim mismatch");
  if (model.classifier.EmbedDim() != shape.embed_dim)
    APOOL_ERR("LoadCheckpoint: classifier dim mismatch");
  return ckpt;
}

}  // namespace apool
