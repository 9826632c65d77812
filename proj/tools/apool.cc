// tools/apool.cc

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apool/checkpoint.h"
#include "apool/gradsuite.h"
#include "apool/harness.h"

namespace fs = std::filesystem;
using namespace apool;

namespace {

void WriteTextFile(const std::string &path, const std::string &content) {
  std::ofstream out(path);
  if (!out) APOOL_ERR("cannot open '" << path << "' for write");
  out << content;
  if (!out) APOOL_ERR("write to '" << path << "' failed");
}

std::vector<double> ParseDurationArg(const std::string &arg) {
  std::vector<double> durations;
  std::stringstream ss(arg);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    if (token == "full")
      durations.push_back(-1.0);
    else
      durations.push_back(std::stod(token));
  }
  if (durations.empty()) APOOL_ERR("empty duration list '" << arg << "'");
  return durations;
}

int RunSynth(const SynthConfig &config, const std::string &out_dir) {
  const Dataset dataset = SynthDataset(config);
  SaveDatasetDir(dataset, out_dir);
  std::printf("wrote %zu utterances (%d speakers, %d x %d features) to %s\n",
              dataset.utterances.size(), dataset.num_speakers,
              config.frames_per_utterance, config.feature_dim,
              out_dir.c_str());
  return kExitOk;
}

int RunTrain(const std::string &config_path, const std::string &out_dir) {
  const ExperimentConfig config = ParseConfigFile(config_path);
  fs::create_directories(out_dir);
  const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.txt").string();
  const std::string report_path = (fs::path(out_dir) / "report.txt").string();

  Trainer trainer(config);
  try {
    while (!trainer.Done()) trainer.Step();
  } catch (const NumericError &e) {
    // Training aborted; the trainer has rolled back to the last good
    // parameters, so checkpoint those with a partial report.
    Checkpoint ckpt{trainer.model(), config.variant, config.objective,
                    config.normalize};
    SaveCheckpoint(ckpt, ckpt_path);
    WriteTextFile(report_path, trainer.FinishReport().Serialize());
    std::cerr << "training aborted: " << e.what() << "\n"
              << "last-good checkpoint written to " << ckpt_path << "\n";
    return kExitNumeric;
  }

  const RunReport report = trainer.FinishReport();
  Checkpoint ckpt{trainer.model(), config.variant, config.objective,
                  config.normalize};
  SaveCheckpoint(ckpt, ckpt_path);
  WriteTextFile(report_path, report.Serialize());

  std::printf("trained %s/%s for %d steps (final train accuracy %.4f)\n",
              VariantName(config.variant).c_str(),
              ObjectiveName(config.objective).c_str(), report.steps_run,
              report.final_train_accuracy);
  if (!report.metrics.empty())
    std::printf("%s", FormatMetricsTable(report.metrics).c_str());
  std::printf("checkpoint: %s\nreport: %s\n", ckpt_path.c_str(),
              report_path.c_str());
  return kExitOk;
}

int RunEvaluate(const std::string &ckpt_path, const std::string &data_dir,
                const std::string &durations_arg, int pairs_per_speaker,
                uint64_t seed, const std::string &det_prefix,
                const std::string &scores_prefix,
                const std::string &trials_out,
                const std::string &attention_dir) {
  const Checkpoint ckpt = LoadCheckpoint(ckpt_path);
  Dataset dataset = LoadDatasetDir(data_dir);
  if (ckpt.normalize)
    for (FrameSequence &utt : dataset.utterances) utt = NormalizeTimeAxis(utt);

  const std::vector<double> durations = ParseDurationArg(durations_arg);
  Rng rng(seed);
  const std::vector<Trial> trials =
      BuildTrials(dataset, pairs_per_speaker, &rng);
  if (!trials_out.empty()) WriteTrialFile(trials, trials_out);

  const EmbedFn embed = [&ckpt](const FrameSequence &frames) {
    return EmbedUtterance(ckpt.model, ckpt.variant, frames);
  };

  std::vector<MetricsRow> rows;
  for (double seconds : durations) {
    const ScoredTrialSet scored =
        DurationProtocol(dataset, embed, trials, seconds, &rng);
    const EerResult eer = ComputeEer(scored);
    const DcfResult dcf = ComputeMinDcf(scored, DcfConfig{});
    MetricsRow row;
    row.label = DurationLabel(seconds);
    row.seconds = seconds;
    row.eer = eer.eer;
    row.eer_threshold = eer.threshold;
    row.min_dcf = dcf.min_dcf;
    row.dcf_threshold = dcf.threshold;
    rows.push_back(row);

    if (!det_prefix.empty())
      WriteDetCsv(DetCurve(scored), det_prefix + row.label + ".csv");
    if (!scores_prefix.empty())
      WriteScoreFile(scored, scores_prefix + row.label + ".txt");
  }
  std::printf("%s", FormatMetricsTable(rows).c_str());

  if (!attention_dir.empty()) {
    if (ckpt.variant == Variant::kTap)
      APOOL_ERR("attention dump requires an attention-bearing checkpoint");
    fs::create_directories(attention_dir);
    for (const FrameSequence &utt : dataset.utterances) {
      const Matrix frames_out =
          ExtractorForward(utt.features, ckpt.model.extractor, nullptr);
      const AttentionOutput att =
          Sap(frames_out, ckpt.model.proj, ckpt.model.context);
      std::ofstream out(
          (fs::path(attention_dir) / (utt.utterance_id + ".csv")).string());
      WriteAttentionCsv(out, att, utt.informative_mask);
    }
    std::printf("attention CSVs written to %s\n", attention_dir.c_str());
  }
  return kExitOk;
}

int RunScore(const std::string &embeddings_path, const std::string &trials_path,
             const std::string &scores_out) {
  const EmbeddingTable table = ReadEmbeddingFile(embeddings_path);
  const std::vector<Trial> trials = ReadTrialFile(trials_path);
  const ScoredTrialSet scored = ScoreTrials(table, trials);
  if (!scores_out.empty()) WriteScoreFile(scored, scores_out);

  const EerResult eer = ComputeEer(scored);
  const DcfResult dcf = ComputeMinDcf(scored, DcfConfig{});
  std::printf("trials %zu\neer %.17g\neer_threshold %.17g\n"
              "min_dcf %.17g\ndcf_threshold %.17g\n",
              scored.trials.size(), eer.eer, eer.threshold, dcf.min_dcf,
              dcf.threshold);
  return kExitOk;
}

int RunGradcheck(int seeds, double eps, double tol) {
  const GradSuiteResult result = RunGradSuite(seeds, eps, tol);
  for (const GradSuiteEntry &entry : result.entries)
    std::printf("%-20s max_rel_err %.3g  %s\n", entry.op.c_str(),
                entry.max_rel_err, entry.pass ? "ok" : "FAIL");
  if (!result.pass) {
    std::fprintf(stderr, "gradient suite FAILED (tol %g, eps %g)\n",
                 result.tol, result.eps);
    return kExitNumeric;
  }
  std::printf("gradient suite passed: %zu ops x %d seeds (tol %g, eps %g)\n",
              result.entries.size(), result.seeds, result.tol, result.eps);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"attentive-pooling laboratory for utterance embeddings"};
  app.require_subcommand(1);

  // synth
  auto *synth = app.add_subcommand("synth", "emit a synthetic dataset");
  SynthConfig synth_config;
  std::string synth_out;
  synth->add_option("--out-dir", synth_out, "output directory")->required();
  synth->add_option("--speakers", synth_config.num_speakers);
  synth->add_option("--utterances", synth_config.utterances_per_speaker);
  synth->add_option("--feature-dim", synth_config.feature_dim);
  synth->add_option("--frames", synth_config.frames_per_utterance);
  synth->add_option("--spread", synth_config.speaker_spread);
  synth->add_option("--noise", synth_config.noise_scale);
  synth->add_option("--distractor", synth_config.distractor_fraction);
  synth->add_option("--seed", synth_config.seed);
  synth->add_option("--frame-rate", synth_config.frame_rate);

  // train
  auto *train = app.add_subcommand("train", "train from a config file");
  std::string train_config, train_out;
  train->add_option("--config", train_config, "key=value config file")
      ->required();
  train->add_option("--out-dir", train_out, "output directory")->required();

  // evaluate
  auto *evaluate =
      app.add_subcommand("evaluate", "checkpoint + dataset -> metrics");
  std::string eval_ckpt, eval_data, eval_durations = "1,2,5,full";
  std::string det_prefix, scores_prefix, trials_out, attention_dir;
  int eval_pairs = 6;
  uint64_t eval_seed = 1;
  evaluate->add_option("--checkpoint", eval_ckpt)->required();
  evaluate->add_option("--data", eval_data, "feature file directory")
      ->required();
  evaluate->add_option("--durations", eval_durations,
                       "comma list of seconds or 'full'");
  evaluate->add_option("--pairs-per-speaker", eval_pairs);
  evaluate->add_option("--seed", eval_seed);
  evaluate->add_option("--det-csv-prefix", det_prefix,
                       "write DET curves to <prefix><duration>.csv");
  evaluate->add_option("--scores-prefix", scores_prefix,
                       "write score files to <prefix><duration>.txt");
  evaluate->add_option("--trials-out", trials_out, "write the trial list");
  evaluate->add_option("--attention-dir", attention_dir,
                       "dump per-utterance attention CSVs");

  // score
  auto *score =
      app.add_subcommand("score", "embeddings + trial file -> scores + EER");
  std::string score_emb, score_trials, score_out;
  score->add_option("--embeddings", score_emb)->required();
  score->add_option("--trials", score_trials)->required();
  score->add_option("--scores-out", score_out);

  // gradcheck
  auto *gradcheck =
      app.add_subcommand("gradcheck", "run the full gradient suite");
  int gc_seeds = 10;
  double gc_eps = 1e-6, gc_tol = 1e-4;
  gradcheck->add_option("--seeds", gc_seeds);
  gradcheck->add_option("--eps", gc_eps);
  gradcheck->add_option("--tol", gc_tol);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return RunSynth(synth_config, synth_out);
    if (train->parsed()) return RunTrain(train_config, train_out);
    if (evaluate->parsed())
      return RunEvaluate(eval_ckpt, eval_data, eval_durations, eval_pairs,
                         eval_seed, det_prefix, scores_prefix, trials_out,
                         attention_dir);
    if (score->parsed()) return RunScore(score_emb, score_trials, score_out);
    if (gradcheck->parsed()) return RunGradcheck(gc_seeds, gc_eps, gc_tol);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError &e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
