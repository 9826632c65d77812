// src/data.cc

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

#include "apool/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace apool {

namespace {

constexpr double kVarianceFloor = 1e-8;

}  // namespace

void Dataset::Validate() const {
  if (num_speakers <= 0) APOOL_ERR("Dataset: num_speakers must be positive");
  std::vector<int> counts(num_speakers, 0);
  for (const FrameSequence &utt : utterances) {
    if (utt.speaker < 0 || utt.speaker >= num_speakers)
      APOOL_ERR("Dataset: utterance '" << utt.utterance_id << "' has speaker "
                << utt.speaker << " outside [0, " << num_speakers << ")");
    if (utt.NumFrames() < 1)
      APOOL_ERR("Dataset: utterance '" << utt.utterance_id << "' is empty");
    counts[utt.speaker]++;
  }
  for (int s = 0; s < num_speakers; s++)
    if (counts[s] == 0)
      APOOL_ERR("Dataset: speaker " << s << " has no utterances");
}

std::vector<std::vector<int>> Dataset::BySpeaker() const {
  std::vector<std::vector<int>> by_speaker(num_speakers);
  for (size_t i = 0; i < utterances.size(); i++)
    by_speaker[utterances[i].speaker].push_back(static_cast<int>(i));
  return by_speaker;
}

FrameSequence NormalizeTimeAxis(const FrameSequence &frames) {
  const int num_frames = frames.NumFrames(), dim = frames.FeatureDim();
  APOOL_ASSERT(num_frames >= 1);
  FrameSequence out = frames;
  for (int d = 0; d < dim; d++) {
    double mean = 0.0;
    for (int t = 0; t < num_frames; t++) mean += frames.features(t, d);
    mean /= num_frames;
    double var = 0.0;
    for (int t = 0; t < num_frames; t++) {
      const double centered = frames.features(t, d) - mean;
      var += centered * centered;
    }
    var /= num_frames;
    const double inv_std = 1.0 / std::sqrt(std::max(var, kVarianceFloor));
    for (int t = 0; t < num_frames; t++)
      out.features(t, d) = (frames.features(t, d) - mean) * inv_std;
  }
  return out;
}

FrameSequence Crop(const FrameSequence &frames, double target_seconds,
                   Rng *rng) {
  APOOL_ASSERT(target_seconds > 0.0);
  const int num_frames = frames.NumFrames();
  const int target =
      static_cast<int>(std::lround(target_seconds * frames.frame_rate));
  if (target >= num_frames) return frames;  // full available segment

  const int start = rng->UniformInt(num_frames - target + 1);
  FrameSequence out;
  out.utterance_id = frames.utterance_id;
  out.speaker = frames.speaker;
  out.frame_rate = frames.frame_rate;
  out.features = Matrix(target, frames.FeatureDim());
  for (int t = 0; t < target; t++)
    std::copy(frames.features.RowData(start + t),
              frames.features.RowData(start + t) + frames.FeatureDim(),
              out.features.RowData(t));
  if (!frames.informative_mask.empty())
    out.informative_mask.assign(frames.informative_mask.begin() + start,
                                frames.informative_mask.begin() + start +
                                    target);
  return out;
}

Dataset SynthDataset(const SynthConfig &config) {
  APOOL_ASSERT(config.num_speakers >= 1);
  APOOL_ASSERT(config.utterances_per_speaker >= 1);
  APOOL_ASSERT(config.feature_dim >= 1);
  APOOL_ASSERT(config.frames_per_utterance >= 1);
  APOOL_ASSERT(config.distractor_fraction >= 0.0 &&
               config.distractor_fraction < 1.0);

  Rng rng(config.seed);
  const int dim = config.feature_dim;

  // Speaker means, then one shared distractor mean for the whole dataset.
  std::vector<std::vector<double>> speaker_means(config.num_speakers);
  for (auto &mean : speaker_means) {
    mean.resize(dim);
    for (double &v : mean) v = config.speaker_spread * rng.Gaussian();
  }
  std::vector<double> distractor_mean(dim);
  for (double &v : distractor_mean) v = config.speaker_spread * rng.Gaussian();

  const int frames = config.frames_per_utterance;
  const int num_distractors =
      static_cast<int>(std::lround(config.distractor_fraction * frames));

  Dataset dataset;
  dataset.num_speakers = config.num_speakers;
  for (int s = 0; s < config.num_speakers; s++) {
    for (int u = 0; u < config.utterances_per_speaker; u++) {
      FrameSequence utt;
      utt.speaker = s;
      utt.frame_rate = config.frame_rate;
      char id[64];
      std::snprintf(id, sizeof(id), "s%03d_u%03d", s, u);
      utt.utterance_id = id;
      utt.features = Matrix(frames, dim);
      utt.informative_mask.assign(frames, 1);

      // Choose distractor positions without replacement.
      std::vector<int> positions(frames);
      for (int t = 0; t < frames; t++) positions[t] = t;
      rng.Shuffle(&positions);
      for (int k = 0; k < num_distractors; k++)
        utt.informative_mask[positions[k]] = 0;

      for (int t = 0; t < frames; t++) {
        const std::vector<double> &mean =
            utt.informative_mask[t] ? speaker_means[s] : distractor_mean;
        double *row = utt.features.RowData(t);
        for (int d = 0; d < dim; d++)
          row[d] = mean[d] + config.noise_scale * rng.Gaussian();
      }
      dataset.utterances.push_back(std::move(utt));
    }
  }
  return dataset;
}

FrameSequence LoadFeatures(const std::string &path) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("LoadFeatures: cannot open '" << path << "'");

  std::string header;
  if (!std::getline(in, header))
    APOOL_ERR("LoadFeatures: '" << path << "' line 1: empty file");

  FrameSequence out;
  int num_frames = 0, dim = 0;
  {
    std::istringstream hs(header);
    if (!(hs >> num_frames >> dim >> out.frame_rate >> out.speaker >>
          out.utterance_id))
      APOOL_ERR("LoadFeatures: '" << path << "' line 1: malformed header '"
                << header << "'");
    if (num_frames < 1 || dim < 1)
      APOOL_ERR("LoadFeatures: '" << path << "' line 1: non-positive shape "
                << num_frames << " x " << dim);
  }

  out.features = Matrix(num_frames, dim);
  std::string line;
  for (int t = 0; t < num_frames; t++) {
    if (!std::getline(in, line))
      APOOL_ERR("LoadFeatures: '" << path << "' line " << (t + 2)
                << ": expected " << num_frames << " feature rows, found " << t);
    std::istringstream ls(line);
    for (int d = 0; d < dim; d++) {
      double v;
      if (!(ls >> v))
        APOOL_ERR("LoadFeatures: '" << path << "' line " << (t + 2)
                  << ": expected " << dim << " values, failed at column "
                  << (d + 1));
      if (!std::isfinite(v))
        APOOL_ERR("LoadFeatures: '" << path << "' line " << (t + 2)
                  << ": non-finite value");
      out.features(t, d) = v;
    }
    double extra;
    if (ls >> extra)
      APOOL_ERR("LoadFeatures: '" << path << "' line " << (t + 2)
                << ": more than " << dim << " values");
  }
  return out;
}

void SaveFeatures(const FrameSequence &frames, const std::string &path) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("SaveFeatures: cannot open '" << path << "' for write");
  char buf[32];
  out << frames.NumFrames() << " " << frames.FeatureDim() << " ";
  std::snprintf(buf, sizeof(buf), "%.17g", frames.frame_rate);
  out << buf << " " << frames.speaker << " " << frames.utterance_id << "\n";
  for (int t = 0; t < frames.NumFrames(); t++) {
    for (int d = 0; d < frames.FeatureDim(); d++) {
      std::snprintf(buf, sizeof(buf), "%.17g", frames.features(t, d));
      out << (d ? " " : "") << buf;
    }
    out << "\n";
  }
  if (!out) APOOL_ERR("SaveFeatures: write to '" << path << "' failed");
}

Dataset LoadDatasetDir(const std::string &dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    APOOL_ERR("LoadDatasetDir: '" << dir << "' is not a directory");
  std::vector<std::string> paths;
  for (const auto &entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) paths.push_back(entry.path().string());
  // Directory iteration order is unspecified; sort for determinism.
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) APOOL_ERR("LoadDatasetDir: no files in '" << dir << "'");

  Dataset dataset;
  int max_speaker = -1;
  for (const std::string &path : paths) {
    dataset.utterances.push_back(LoadFeatures(path));
    max_speaker = std::max(max_speaker, dataset.utterances.back().speaker);
  }
  dataset.num_speakers = max_speaker + 1;
  dataset.Validate();
  return dataset;
}

void SaveDatasetDir(const Dataset &dataset, const std::string &dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const FrameSequence &utt : dataset.utterances)
    SaveFeatures(utt, (fs::path(dir) / (utt.utterance_id + ".feat")).string());
}

std::pair<Dataset, Dataset> SplitPerSpeaker(const Dataset &dataset,
                                            int train_per_speaker) {
  APOOL_ASSERT(train_per_speaker >= 1);
  Dataset train, heldout;
  train.num_speakers = heldout.num_speakers = dataset.num_speakers;
  std::vector<int> seen(dataset.num_speakers, 0);
  for (const FrameSequence &utt : dataset.utterances) {
    if (seen[utt.speaker]++ < train_per_speaker)
      train.utterances.push_back(utt);
    else
      heldout.utterances.push_back(utt);
  }
  train.Validate();
  return {std::move(train), std::move(heldout)};
}

}  // namespace apool
