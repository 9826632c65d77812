// include/apool/eval.h

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

#ifndef APOOL_EVAL_H_
#define APOOL_EVAL_H_

#include <functional>
#include <string>
#include <vector>

#include "apool/data.h"
#include "apool/rng.h"

namespace apool {

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};

struct ScoredTrialSet {
  std::vector<Trial> trials;
  std::vector<double> scores;  // parallel to trials
};

// Plain cosine similarity in [-1, 1]; errors on zero-norm input.
double CosineScore(std::span<const double> e1, std::span<const double> e2);

// Per speaker: pairs_per_speaker same-speaker pairs (enroll != test) and
// as many different-speaker pairs, without replacement while the pool
// lasts, deterministic in the rng.  Errors on any speaker with fewer than
// two utterances.
std::vector<Trial> BuildTrials(const Dataset &dataset, int pairs_per_speaker,
                               Rng *rng);

struct DetPoint {
  double threshold = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
};

// One operating point per distinct score (accept iff score >= threshold)
// plus the reject-all point.  p_miss is nondecreasing and p_fa
// nonincreasing along the returned list.
std::vector<DetPoint> DetCurve(const ScoredTrialSet &scores);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Equal error rate: the crossing of p_miss and p_fa along the DET curve,
// linearly interpolated between adjacent operating points.
EerResult ComputeEer(const ScoredTrialSet &scores);

struct DcfConfig {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
  bool normalize = true;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

// Minimum of c_miss * p_miss * p_target + c_fa * p_fa * (1 - p_target)
// over all operating points; normalized by the best trivial system's
// cost when configured.
DcfResult ComputeMinDcf(const ScoredTrialSet &scores, const DcfConfig &config);

using EmbedFn = std::function<std::vector<double>(const FrameSequence &)>;

// Scores the given trials with full-utterance enrollment embeddings and
// test embeddings from random crops of test_seconds (<= 0 means full
// test utterances too).  Utterances shorter than the crop are used whole.
ScoredTrialSet DurationProtocol(const Dataset &dataset, const EmbedFn &embed,
                                const std::vector<Trial> &trials,
                                double test_seconds, Rng *rng);

// Trial file: "<0|1> <enroll_id> <test_id>" per line.
// Score file: "<score> <enroll_id> <test_id>" per line.
std::vector<Trial> ReadTrialFile(const std::string &path);
void WriteTrialFile(const std::vector<Trial> &trials, const std::string &path);
ScoredTrialSet ReadScoreFile(const std::string &path,
                             const std::vector<Trial> &trials);
void WriteScoreFile(const ScoredTrialSet &scores, const std::string &path);

// DET export: CSV "threshold,p_miss,p_fa".
void WriteDetCsv(const std::vector<DetPoint> &points, const std::string &path);

// Embedding file: one utterance per line, "<utt_id> v1 v2 ... vE".
struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;

  const std::vector<double> &Lookup(const std::string &id) const;
};
EmbeddingTable ReadEmbeddingFile(const std::string &path);
void WriteEmbeddingFile(const EmbeddingTable &table, const std::string &path);

// Cosine-scores a trial list against an embedding table.
ScoredTrialSet ScoreTrials(const EmbeddingTable &table,
                           const std::vector<Trial> &trials);

}  // namespace apool

#endif  // APOOL_EVAL_H_
