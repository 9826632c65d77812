// src/eval.cc

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

#include "apool/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "apool/matrix.h"

namespace apool {

namespace {

constexpr double kZeroNormTol = 1e-12;

// Sorted target / nontarget score arrays, the shared precursor of every
// metric here.  A trial is accepted iff score >= threshold, so
//   p_miss(t) = #(targets < t) / #targets
//   p_fa(t)   = #(nontargets >= t) / #nontargets.
struct SplitScores {
  std::vector<double> targets;
  std::vector<double> nontargets;
};

SplitScores Split(const ScoredTrialSet &scores) {
  APOOL_ASSERT(scores.trials.size() == scores.scores.size());
  SplitScores split;
  for (size_t i = 0; i < scores.trials.size(); i++) {
    if (!std::isfinite(scores.scores[i]))
      APOOL_NUMERIC_ERR("non-finite trial score at index " << i);
    (scores.trials[i].target ? split.targets : split.nontargets)
        .push_back(scores.scores[i]);
  }
  if (split.targets.empty()) APOOL_ERR("no target trials");
  if (split.nontargets.empty()) APOOL_ERR("no nontarget trials");
  std::sort(split.targets.begin(), split.targets.end());
  std::sort(split.nontargets.begin(), split.nontargets.end());
  return split;
}

double PMiss(const SplitScores &s, double threshold) {
  const auto below =
      std::lower_bound(s.targets.begin(), s.targets.end(), threshold);
  return static_cast<double>(below - s.targets.begin()) / s.targets.size();
}

double PFa(const SplitScores &s, double threshold) {
  const auto below =
      std::lower_bound(s.nontargets.begin(), s.nontargets.end(), threshold);
  return static_cast<double>(s.nontargets.end() - below) / s.nontargets.size();
}

std::vector<DetPoint> DetCurveFromSplit(const SplitScores &split) {
  std::vector<double> thresholds;
  thresholds.reserve(split.targets.size() + split.nontargets.size() + 1);
  thresholds.insert(thresholds.end(), split.targets.begin(),
                    split.targets.end());
  thresholds.insert(thresholds.end(), split.nontargets.begin(),
                    split.nontargets.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  // Reject-all endpoint; any threshold above the max score works.
  thresholds.push_back(thresholds.back() + 1.0);

  std::vector<DetPoint> points;
  points.reserve(thresholds.size());
  for (double t : thresholds)
    points.push_back({t, PMiss(split, t), PFa(split, t)});
  return points;
}

}  // namespace

double CosineScore(std::span<const double> e1, std::span<const double> e2) {
  const double n1 = Norm2(e1), n2 = Norm2(e2);
  if (n1 < kZeroNormTol || n2 < kZeroNormTol)
    APOOL_ERR("CosineScore: zero-norm embedding");
  return Dot(e1, e2) / (n1 * n2);
}

std::vector<Trial> BuildTrials(const Dataset &dataset, int pairs_per_speaker,
                               Rng *rng) {
  APOOL_ASSERT(pairs_per_speaker >= 1);
  dataset.Validate();
  const auto by_speaker = dataset.BySpeaker();
  for (int s = 0; s < dataset.num_speakers; s++)
    if (by_speaker[s].size() < 2)
      APOOL_ERR("BuildTrials: speaker " << s << " has only "
                << by_speaker[s].size() << " utterance(s); need >= 2");

  std::vector<int> others_all;
  std::vector<Trial> trials;
  for (int s = 0; s < dataset.num_speakers; s++) {
    const std::vector<int> &own = by_speaker[s];
    const int n = static_cast<int>(own.size());

    // Target pairs: enumerate, shuffle, then draw with replacement only
    // once the pool is exhausted.
    std::vector<std::pair<int, int>> pool;
    for (int i = 0; i < n; i++)
      for (int j = i + 1; j < n; j++) pool.push_back({own[i], own[j]});
    rng->Shuffle(&pool);
    for (int k = 0; k < pairs_per_speaker; k++) {
      std::pair<int, int> pair;
      if (k < static_cast<int>(pool.size())) {
        pair = pool[k];
      } else {
        int a = rng->UniformInt(n);
        int b = rng->UniformInt(n - 1);
        if (b >= a) b++;
        pair = {own[a], own[b]};
      }
      trials.push_back({dataset.utterances[pair.first].utterance_id,
                        dataset.utterances[pair.second].utterance_id, true});
    }

    // Nontarget pairs: enroll from this speaker, test from any other.
    others_all.clear();
    for (int o = 0; o < dataset.num_speakers; o++)
      if (o != s)
        others_all.insert(others_all.end(), by_speaker[o].begin(),
                          by_speaker[o].end());
    std::set<std::pair<int, int>> used;
    int attempts = 0;
    const int max_attempts = 100 * pairs_per_speaker;
    while (static_cast<int>(used.size()) < pairs_per_speaker &&
           attempts < max_attempts) {
      attempts++;
      const int e = own[rng->UniformInt(n)];
      const int t = others_all[rng->UniformInt(
          static_cast<int>(others_all.size()))];
      used.insert({e, t});
    }
    // Pathologically small pools: fall back to repeats.
    std::vector<std::pair<int, int>> nontarget(used.begin(), used.end());
    while (static_cast<int>(nontarget.size()) < pairs_per_speaker) {
      const int e = own[rng->UniformInt(n)];
      const int t = others_all[rng->UniformInt(
          static_cast<int>(others_all.size()))];
      nontarget.push_back({e, t});
    }
    for (int k = 0; k < pairs_per_speaker; k++)
      trials.push_back({dataset.utterances[nontarget[k].first].utterance_id,
                        dataset.utterances[nontarget[k].second].utterance_id,
                        false});
  }
  return trials;
}

std::vector<DetPoint> DetCurve(const ScoredTrialSet &scores) {
  return DetCurveFromSplit(Split(scores));
}

EerResult ComputeEer(const ScoredTrialSet &scores) {
  const std::vector<DetPoint> points = DetCurveFromSplit(Split(scores));
  // p_miss - p_fa runs monotonically from -1 to +1; interpolate the
  // crossing between the adjacent operating points that bracket zero.
  size_t i = 0;
  while (points[i].p_miss - points[i].p_fa < 0.0) i++;
  const double d_at = points[i].p_miss - points[i].p_fa;
  if (i == 0 || d_at == 0.0) return {points[i].p_miss, points[i].threshold};
  const DetPoint &lo = points[i - 1], &hi = points[i];
  const double d_lo = lo.p_miss - lo.p_fa;
  const double frac = -d_lo / (d_at - d_lo);
  return {lo.p_miss + frac * (hi.p_miss - lo.p_miss),
          lo.threshold + frac * (hi.threshold - lo.threshold)};
}

DcfResult ComputeMinDcf(const ScoredTrialSet &scores, const DcfConfig &config) {
  APOOL_ASSERT(config.p_target > 0.0 && config.p_target < 1.0);
  APOOL_ASSERT(config.c_miss > 0.0 && config.c_fa > 0.0);
  const std::vector<DetPoint> points = DetCurveFromSplit(Split(scores));

  DcfResult result;
  result.min_dcf = std::numeric_limits<double>::infinity();
  for (const DetPoint &p : points) {
    const double cost = config.c_miss * p.p_miss * config.p_target +
                        config.c_fa * p.p_fa * (1.0 - config.p_target);
    if (cost < result.min_dcf) {
      result.min_dcf = cost;
      result.threshold = p.threshold;
    }
  }
  if (config.normalize)
    result.min_dcf /= std::min(config.c_miss * config.p_target,
                               config.c_fa * (1.0 - config.p_target));
  return result;
}

ScoredTrialSet DurationProtocol(const Dataset &dataset, const EmbedFn &embed,
                                const std::vector<Trial> &trials,
                                double test_seconds, Rng *rng) {
  std::unordered_map<std::string, int> index;
  for (size_t i = 0; i < dataset.utterances.size(); i++)
    index[dataset.utterances[i].utterance_id] = static_cast<int>(i);

  std::vector<int> enroll_utts, test_utts;
  std::vector<int> enroll_slot(dataset.utterances.size(), -1);
  std::vector<int> test_slot(dataset.utterances.size(), -1);
  for (const Trial &trial : trials) {
    const auto e = index.find(trial.enroll_id);
    const auto t = index.find(trial.test_id);
    if (e == index.end())
      APOOL_ERR("DurationProtocol: unknown enroll id '" << trial.enroll_id
                << "'");
    if (t == index.end())
      APOOL_ERR("DurationProtocol: unknown test id '" << trial.test_id << "'");
    if (enroll_slot[e->second] < 0) {
      enroll_slot[e->second] = static_cast<int>(enroll_utts.size());
      enroll_utts.push_back(e->second);
    }
    if (test_slot[t->second] < 0) {
      test_slot[t->second] = static_cast<int>(test_utts.size());
      test_utts.push_back(t->second);
    }
  }

  // Crops are drawn serially so the rng stream is independent of the
  // parallel schedule below.
  std::vector<FrameSequence> test_inputs(test_utts.size());
  for (size_t k = 0; k < test_utts.size(); k++) {
    const FrameSequence &utt = dataset.utterances[test_utts[k]];
    test_inputs[k] = test_seconds > 0.0 ? Crop(utt, test_seconds, rng) : utt;
  }

  std::vector<std::vector<double>> enroll_emb(enroll_utts.size());
  std::vector<std::vector<double>> test_emb(test_utts.size());
  const int n_enroll = static_cast<int>(enroll_utts.size());
  const int n_test = static_cast<int>(test_utts.size());
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n_enroll; k++)
    enroll_emb[k] = embed(dataset.utterances[enroll_utts[k]]);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n_test; k++) test_emb[k] = embed(test_inputs[k]);

  ScoredTrialSet out;
  out.trials = trials;
  out.scores.resize(trials.size());
  const int n_trials = static_cast<int>(trials.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_trials; i++) {
    const int e = enroll_slot[index[out.trials[i].enroll_id]];
    const int t = test_slot[index[out.trials[i].test_id]];
    out.scores[i] = CosineScore(enroll_emb[e], test_emb[t]);
  }
  return out;
}

std::vector<Trial> ReadTrialFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("ReadTrialFile: cannot open '" << path << "'");
  std::vector<Trial> trials;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int label;
    Trial trial;
    if (!(ls >> label >> trial.enroll_id >> trial.test_id) ||
        (label != 0 && label != 1))
      APOOL_ERR("ReadTrialFile: '" << path << "' line " << line_no
                << ": expected '<0|1> <enroll_id> <test_id>', got '" << line
                << "'");
    trial.target = label == 1;
    trials.push_back(std::move(trial));
  }
  if (trials.empty()) APOOL_ERR("ReadTrialFile: '" << path << "' is empty");
  return trials;
}

void WriteTrialFile(const std::vector<Trial> &trials,
                    const std::string &path) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("WriteTrialFile: cannot open '" << path << "'");
  for (const Trial &t : trials)
    out << (t.target ? 1 : 0) << " " << t.enroll_id << " " << t.test_id
        << "\n";
}

ScoredTrialSet ReadScoreFile(const std::string &path,
                             const std::vector<Trial> &trials) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("ReadScoreFile: cannot open '" << path << "'");
  ScoredTrialSet set;
  set.trials = trials;
  std::string line;
  int line_no = 0;
  size_t i = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    if (i >= trials.size())
      APOOL_ERR("ReadScoreFile: '" << path << "' line " << line_no
                << ": more scores than trials");
    std::istringstream ls(line);
    double score;
    std::string enroll, test;
    if (!(ls >> score >> enroll >> test))
      APOOL_ERR("ReadScoreFile: '" << path << "' line " << line_no
                << ": expected '<score> <enroll_id> <test_id>'");
    if (enroll != trials[i].enroll_id || test != trials[i].test_id)
      APOOL_ERR("ReadScoreFile: '" << path << "' line " << line_no
                << ": ids do not match trial " << i);
    set.scores.push_back(score);
    i++;
  }
  if (i != trials.size())
    APOOL_ERR("ReadScoreFile: '" << path << "' has " << i << " scores for "
              << trials.size() << " trials");
  return set;
}

void WriteScoreFile(const ScoredTrialSet &scores, const std::string &path) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("WriteScoreFile: cannot open '" << path << "'");
  char buf[32];
  for (size_t i = 0; i < scores.trials.size(); i++) {
    std::snprintf(buf, sizeof(buf), "%.17g", scores.scores[i]);
    out << buf << " " << scores.trials[i].enroll_id << " "
        << scores.trials[i].test_id << "\n";
  }
}

void WriteDetCsv(const std::vector<DetPoint> &points,
                 const std::string &path) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("WriteDetCsv: cannot open '" << path << "'");
  out << "threshold,p_miss,p_fa\n";
  char buf[96];
  for (const DetPoint &p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", p.threshold, p.p_miss,
                  p.p_fa);
    out << buf << "\n";
  }
}

const std::vector<double> &EmbeddingTable::Lookup(const std::string &id) const {
  for (size_t i = 0; i < ids.size(); i++)
    if (ids[i] == id) return vectors[i];
  APOOL_ERR("EmbeddingTable: no embedding for utterance '" << id << "'");
}

EmbeddingTable ReadEmbeddingFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("ReadEmbeddingFile: cannot open '" << path << "'");
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  size_t dim = 0;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id))
      APOOL_ERR("ReadEmbeddingFile: '" << path << "' line " << line_no
                << ": missing utterance id");
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    if (vec.empty())
      APOOL_ERR("ReadEmbeddingFile: '" << path << "' line " << line_no
                << ": no values for '" << id << "'");
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim)
      APOOL_ERR("ReadEmbeddingFile: '" << path << "' line " << line_no
                << ": dimension " << vec.size() << " != " << dim);
    table.ids.push_back(std::move(id));
    table.vectors.push_back(std::move(vec));
  }
  if (table.ids.empty())
    APOOL_ERR("ReadEmbeddingFile: '" << path << "' is empty");
  return table;
}

void WriteEmbeddingFile(const EmbeddingTable &table, const std::string &path) {
  APOOL_ASSERT(table.ids.size() == table.vectors.size());
  std::ofstream out(path);
  if (!out) APOOL_ERR("WriteEmbeddingFile: cannot open '" << path << "'");
  char buf[32];
  for (size_t i = 0; i < table.ids.size(); i++) {
    out << table.ids[i];
    for (double v : table.vectors[i]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << " " << buf;
    }
    out << "\n";
  }
}

ScoredTrialSet ScoreTrials(const EmbeddingTable &table,
                           const std::vector<Trial> &trials) {
  ScoredTrialSet set;
  set.trials = trials;
  set.scores.resize(trials.size());
  const int n = static_cast<int>(trials.size());
  // Lookups first (they can throw); scoring is embarrassingly parallel.
  std::vector<const std::vector<double> *> enroll(n), test(n);
  for (int i = 0; i < n; i++) {
    enroll[i] = &table.Lookup(trials[i].enroll_id);
    test[i] = &table.Lookup(trials[i].test_id);
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; i++)
    set.scores[i] = CosineScore(*enroll[i], *test[i]);
  return set;
}

}  // namespace apool
