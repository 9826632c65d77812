// include/apool/harness.h

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

#ifndef APOOL_HARNESS_H_
#define APOOL_HARNESS_H_

#include <optional>
#include <string>
#include <vector>

#include "apool/data.h"
#include "apool/eval.h"
#include "apool/network.h"
#include "apool/objectives.h"
#include "apool/pooling.h"

namespace apool {

struct EpisodeSpec {
  int n_classes = 10;
  int n_support = 1;
  int n_query = 2;
  double support_seconds = 2.0;
  double query_seconds_min = 1.0;
  double query_seconds_max = 2.0;
};

struct OptimizerConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lr_decay_factor = 10.0;
  int decay_patience = 50;
};

enum class DataSource { kSynth, kDirectory };

struct ExperimentConfig {
  Variant variant = Variant::kSap;
  Objective objective = Objective::kPlSoftmax;
  double lambda_mu = 1.0;
  bool mu_stop_gradient = false;  // confine context-loss grads to mu
  int steps = 500;
  uint64_t seed = 1;

  EpisodeSpec episode;            // pl_softmax mode
  int batch_size = 64;            // classification modes
  double crop_seconds = 2.0;

  OptimizerConfig optimizer;

  std::vector<int> extractor_hidden = {64};
  int frame_dim = 32;
  int embed_dim = 256;
  bool normalize = true;

  DataSource data_source = DataSource::kSynth;
  std::string data_dir;
  SynthConfig synth;
  // When > 0, each speaker's trailing utterances are held out of
  // training and used for the final trial evaluation.
  int holdout_per_speaker = 0;

  bool eval_enable = true;
  int eval_pairs_per_speaker = 6;
  // Seconds per evaluation row; <= 0 means full utterances.
  std::vector<double> eval_durations = {1.0, 2.0, 5.0, -1.0};

  void Validate() const;
};

// Flat key=value config text; '#' starts a comment.  Unknown keys are
// validation errors.
ExperimentConfig ParseConfigText(const std::string &text,
                                 const std::string &context);
ExperimentConfig ParseConfigFile(const std::string &path);
// Canonical echo of every key, sorted, as written by reports.
std::string SerializeConfig(const ExperimentConfig &config);

// An episode of raw crops, pre-embedding.  Episode labels are local
// (0..N-1); speakers are global class indices for the softmax branch.
struct RawEpisode {
  std::vector<FrameSequence> support;
  std::vector<FrameSequence> query;
  std::vector<int> support_labels;
  std::vector<int> query_labels;
  std::vector<int> support_speakers;
  std::vector<int> query_speakers;
};

// N distinct speakers, K support crops and M query crops each; support
// and query come from distinct utterances whenever the speaker has
// enough of them.  Errors if the dataset has fewer than N speakers.
RawEpisode SampleEpisode(const Dataset &dataset, const EpisodeSpec &spec,
                         Rng *rng);

// Nesterov momentum with L2 weight decay folded into the gradient:
//   g' = g + wd * p;  v = beta * v + g';  p -= lr * (g' + beta * v).
struct SgdState {
  std::vector<Matrix> velocity;
};
void SgdStep(const std::vector<NamedParam> &params, SgdState *state,
             const OptimizerConfig &opt, double lr);

// Drops the learning rate by lr_decay_factor when the training loss has
// not improved by more than 1e-4 for decay_patience steps; after three
// decays the next plateau raises the stop flag.
class LrSchedule {
 public:
  explicit LrSchedule(const OptimizerConfig &opt);
  // Feed the latest training loss; returns the learning rate to use.
  double Update(double loss);
  double lr() const { return lr_; }
  bool stop() const { return stop_; }
  int decays() const { return decays_; }

 private:
  OptimizerConfig opt_;
  double lr_;
  double best_loss_;
  int steps_since_improvement_ = 0;
  int decays_ = 0;
  bool stop_ = false;
};

struct StepRecord {
  int step = 0;
  double total = 0.0;
  double l_s = 0.0;
  double l_pl = 0.0;
  double l_am = 0.0;
  double l_mu = 0.0;
  bool mu_active = false;
  double accuracy = 0.0;
  double lr = 0.0;
};

struct MetricsRow {
  std::string label;   // "1", "2", "5", "full"
  double seconds = 0;  // <= 0 means full
  double eer = 0.0;
  double eer_threshold = 0.0;
  double min_dcf = 0.0;
  double dcf_threshold = 0.0;
};

struct AttentionStats {
  double mean_weight_informative = 0.0;
  double mean_weight_distractor = 0.0;
  int utterances = 0;
  // Utterances where the informative mean strictly beats the distractor
  // mean; the selectivity sign test runs off this count.
  int informative_higher = 0;
};

struct RunReport {
  std::string config_echo;
  std::vector<StepRecord> steps;
  int steps_run = 0;
  bool stopped_early = false;
  double final_train_accuracy = 0.0;
  std::vector<MetricsRow> metrics;
  std::optional<AttentionStats> attention;
  double wall_time_sec = 0.0;

  // Deterministic text form: key/value sections plus tables.  Only the
  // wall_time_sec line varies between identical runs.
  std::string Serialize() const;
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig &config);

  // One optimization step: sample, forward, losses, backward, update.
  // On a non-finite loss or gradient the parameters are rolled back to
  // the pre-step state before NumericError propagates.
  void Step();
  bool Done() const;
  int StepsRun() const { return static_cast<int>(records_.size()); }

  Model &model() { return model_; }
  const Model &model() const { return model_; }
  const ExperimentConfig &config() const { return config_; }
  const Dataset &train_data() const { return train_data_; }
  const Dataset &holdout_data() const { return holdout_data_; }
  const std::vector<StepRecord> &records() const { return records_; }

  // Metrics over the holdout split when present, else the training set;
  // attention stats when the variant attends and masks exist.
  RunReport FinishReport();

 private:
  void EpisodicStep();
  void ClassificationStep();
  void FinishStep(const LossBundle &bundle, double accuracy);

  ExperimentConfig config_;
  Dataset train_data_;
  Dataset holdout_data_;
  Model model_;
  Rng rng_;
  SgdState sgd_;
  LrSchedule schedule_;
  std::vector<StepRecord> records_;
  double wall_start_ = 0.0;
};

// Convenience: full training loop plus final report.
RunReport Train(const ExperimentConfig &config);

// Embeds one utterance with a frozen model: extractor, pooling by
// variant, head.  Input features must already be normalized if the model
// was trained on normalized features.
std::vector<double> EmbedUtterance(const Model &model, Variant variant,
                                   const FrameSequence &frames);

// Builds trials on the dataset and reports EER / minDCF per duration
// (full-utterance enrollment, cropped tests).
std::vector<MetricsRow> EvaluateModel(const Model &model, Variant variant,
                                      const Dataset &dataset,
                                      const std::vector<double> &durations,
                                      int pairs_per_speaker, uint64_t seed);

// Mean attention weight on informative vs distractor frames over up to
// max_utterances masked utterances.  Utterances whose mask has a single
// class are skipped.
AttentionStats ComputeAttentionStats(const Model &model,
                                     const Dataset &dataset,
                                     int max_utterances);

std::string FormatMetricsTable(const std::vector<MetricsRow> &rows);
std::string DurationLabel(double seconds);

}  // namespace apool

#endif  // APOOL_HARNESS_H_
