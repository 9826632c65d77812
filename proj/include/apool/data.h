// include/apool/data.h

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

#ifndef APOOL_DATA_H_
#define APOOL_DATA_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "apool/matrix.h"
#include "apool/rng.h"

namespace apool {

// One utterance: T x F frame-level features plus identity metadata.
// informative_mask marks frames carrying speaker information; it is only
// populated by the synthetic generator (empty means "unknown / all
// informative") and never round-trips through feature files.
struct FrameSequence {
  Matrix features;  // T x F
  std::string utterance_id;
  int speaker = 0;
  double frame_rate = 100.0;  // frames per second
  std::vector<uint8_t> informative_mask;

  int NumFrames() const { return features.NumRows(); }
  int FeatureDim() const { return features.NumCols(); }
};

struct Dataset {
  std::vector<FrameSequence> utterances;
  int num_speakers = 0;

  // Checks speaker indices are in range and every speaker occurs.
  void Validate() const;
  // Utterance indices grouped by speaker, speakers in index order.
  std::vector<std::vector<int>> BySpeaker() const;
};

// Per feature dimension: subtract the mean over time and divide by the
// standard deviation (variance floored at 1e-8, so constant dimensions
// map to zeros instead of NaN).
FrameSequence NormalizeTimeAxis(const FrameSequence &frames);

// Contiguous slice of round(target_seconds * frame_rate) frames at a
// uniformly random start.  Shorter utterances are returned whole; the
// mask is cropped identically.
FrameSequence Crop(const FrameSequence &frames, double target_seconds,
                   Rng *rng);

struct SynthConfig {
  int num_speakers = 20;
  int utterances_per_speaker = 10;
  int feature_dim = 40;
  int frames_per_utterance = 300;
  double speaker_spread = 1.0;
  double noise_scale = 0.3;
  double distractor_fraction = 0.3;  // in [0, 1)
  uint64_t seed = 1;
  double frame_rate = 100.0;
};

// Synthetic speaker dataset.  Each speaker gets a Gaussian mean vector;
// informative frames are noisy copies of it, while a distractor_fraction
// of frames per utterance come from one shared speaker-independent
// distribution and are flagged informative_mask = false.  Deterministic
// in the seed.
Dataset SynthDataset(const SynthConfig &config);

// Text feature file: line 1 "T F frame_rate speaker_id utterance_id",
// then T lines of F space-separated reals.  A directory of such files is
// a dataset.
FrameSequence LoadFeatures(const std::string &path);
void SaveFeatures(const FrameSequence &frames, const std::string &path);
Dataset LoadDatasetDir(const std::string &dir);
void SaveDatasetDir(const Dataset &dataset, const std::string &dir);

// Splits each speaker's utterance list (in dataset order) into the first
// train_per_speaker utterances and the rest.  Used for held-out trials.
std::pair<Dataset, Dataset> SplitPerSpeaker(const Dataset &dataset,
                                            int train_per_speaker);

}  // namespace apool

#endif  // APOOL_DATA_H_
