// tests/acceptance.cc

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

// End-to-end acceptance checks.  Each test case prints one PASS/FAIL
// line per criterion; run via ctest or directly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "apool/gradsuite.h"
#include "apool/harness.h"
#include "apool/numerics.h"
#include "doctest.h"

using namespace apool;

namespace {

double Now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void Report(const std::string &criterion, bool pass,
            const std::string &detail) {
  std::printf("[ACCEPTANCE] %s: %s (%s)\n", criterion.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

// ----- shared trained models for criteria 5, 6 and 7 ------------------

ExperimentConfig ReferenceConfig(Variant variant) {
  ExperimentConfig c;
  c.variant = variant;
  c.objective = Objective::kPlSoftmax;
  c.lambda_mu = 1.0;
  c.steps = 500;
  c.seed = 1;
  c.episode.n_classes = 10;
  c.episode.n_support = 1;
  c.episode.n_query = 2;
  c.extractor_hidden = {64};
  c.frame_dim = 32;
  c.embed_dim = 256;
  // Default synthetic speakers plus six extra utterances per speaker
  // held out for trials and attention statistics.
  c.synth.num_speakers = 20;
  c.synth.utterances_per_speaker = 16;
  c.synth.feature_dim = 40;
  c.synth.frames_per_utterance = 300;
  c.synth.seed = 20260810;
  c.holdout_per_speaker = 6;
  c.eval_pairs_per_speaker = 6;
  c.eval_durations = {1.0, 2.0, 5.0, -1.0};
  return c;
}

struct VariantRun {
  RunReport report;
  Model model;
  double train_seconds = 0.0;
};

struct ReferenceRuns {
  std::map<Variant, VariantRun> runs;
  Dataset holdout;
};

const ReferenceRuns &GetReferenceRuns() {
  static const ReferenceRuns runs = [] {
    ReferenceRuns out;
    for (Variant variant : {Variant::kTap, Variant::kSap, Variant::kApf,
                            Variant::kAnf, Variant::kAdf}) {
      const double start = Now();
      Trainer trainer(ReferenceConfig(variant));
      while (!trainer.Done()) trainer.Step();
      VariantRun run;
      run.report = trainer.FinishReport();
      run.model = trainer.model();
      run.train_seconds = Now() - start;
      if (out.holdout.utterances.empty()) out.holdout = trainer.holdout_data();
      out.runs.emplace(variant, std::move(run));
    }
    return out;
  }();
  return runs;
}

double MetricsEer(const RunReport &report, const std::string &label) {
  for (const MetricsRow &row : report.metrics)
    if (row.label == label) return row.eer;
  APOOL_ERR("no metrics row labeled '" << label << "'");
}

// P(X >= k) for X ~ Binomial(n, 1/2), exact via log factorials.
double BinomialUpperTail(int n, int k) {
  double tail = 0.0;
  for (int j = k; j <= n; j++)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) -
                     std::lgamma(n - j + 1.0) - n * std::log(2.0));
  return tail;
}

// ----- oracle for criterion 3 (independent counting implementation) ---

ScoredTrialSet MakeScores(const std::vector<double> &targets,
                          const std::vector<double> &nontargets) {
  ScoredTrialSet set;
  int id = 0;
  for (double s : targets) {
    set.trials.push_back({"e" + std::to_string(id), "t" + std::to_string(id),
                          true});
    set.scores.push_back(s);
    id++;
  }
  for (double s : nontargets) {
    set.trials.push_back({"e" + std::to_string(id), "t" + std::to_string(id),
                          false});
    set.scores.push_back(s);
    id++;
  }
  return set;
}

struct SweepPoint {
  double p_miss, p_fa;
};

std::vector<SweepPoint> BruteForceSweep(const ScoredTrialSet &set) {
  std::vector<double> distinct = set.scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  std::vector<double> thresholds;
  thresholds.push_back(distinct.front() - 1.0);
  for (size_t i = 0; i + 1 < distinct.size(); i++)
    thresholds.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  thresholds.push_back(distinct.back() + 1.0);

  std::vector<SweepPoint> points;
  for (double threshold : thresholds) {
    int miss = 0, fa = 0, n_tar = 0, n_non = 0;
    for (size_t i = 0; i < set.scores.size(); i++) {
      if (set.trials[i].target) {
        n_tar++;
        if (set.scores[i] < threshold) miss++;
      } else {
        n_non++;
        if (set.scores[i] >= threshold) fa++;
      }
    }
    points.push_back({double(miss) / n_tar, double(fa) / n_non});
  }
  return points;
}

double BruteForceEer(const ScoredTrialSet &set) {
  const std::vector<SweepPoint> points = BruteForceSweep(set);
  for (size_t i = 0; i < points.size(); i++) {
    const double d = points[i].p_miss - points[i].p_fa;
    if (d < 0.0) continue;
    if (i == 0 || d == 0.0) return points[i].p_miss;
    const double d_prev = points[i - 1].p_miss - points[i - 1].p_fa;
    const double frac = -d_prev / (d - d_prev);
    return points[i - 1].p_miss +
           frac * (points[i].p_miss - points[i - 1].p_miss);
  }
  return 1.0;
}

double BruteForceMinDcf(const ScoredTrialSet &set, const DcfConfig &config) {
  double best = std::numeric_limits<double>::infinity();
  for (const SweepPoint &p : BruteForceSweep(set))
    best = std::min(best, config.c_miss * p.p_miss * config.p_target +
                              config.c_fa * p.p_fa * (1.0 - config.p_target));
  if (config.normalize)
    best /= std::min(config.c_miss * config.p_target,
                     config.c_fa * (1.0 - config.p_target));
  return best;
}

Matrix RandomMatrix(int rows, int cols, Rng *rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.Size(); i++) m.Data()[i] = scale * rng->Gaussian();
  return m;
}

std::string StripWallTime(const std::string &report) {
  std::istringstream in(report);
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("wall_time_sec", 0) != 0) out += line + "\n";
  return out;
}

}  // namespace

TEST_CASE("criterion 1: gradient suite") {
  const double start = Now();
  const GradSuiteResult result = RunGradSuite(10, 1e-6, 1e-4);
  const double elapsed = Now() - start;

  double worst = 0.0;
  for (const GradSuiteEntry &entry : result.entries) {
    INFO(entry.op << " max rel err " << entry.max_rel_err);
    CHECK(entry.pass);
    worst = std::max(worst, entry.max_rel_err);
  }
  CHECK(result.entries.size() == 10);
  CHECK(elapsed < 60.0);

  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "10 ops x 10 seeds, worst rel err %.3g, %.1f s", worst,
                elapsed);
  Report("C1 gradient-suite", result.pass && elapsed < 60.0, detail);
}

TEST_CASE("criterion 2: tap/sap equivalence and lambda-zero trajectories") {
  // Zero context vector reproduces average pooling on 100 random inputs.
  Rng rng(2026);
  double worst_pool = 0.0;
  for (int trial = 0; trial < 100; trial++) {
    const int frames_n = 1 + rng.UniformInt(40);
    const int dim = 2 + rng.UniformInt(12);
    const Matrix frames = RandomMatrix(frames_n, dim, &rng);
    ProjectionParams proj;
    proj.weight = RandomMatrix(dim, dim, &rng, 0.5);
    proj.bias = RandomMatrix(1, dim, &rng, 0.2);
    ContextVector ctx;
    ctx.mu = Matrix(1, dim);
    const AttentionOutput att = Sap(frames, proj, ctx);
    worst_pool =
        std::max(worst_pool, Matrix::MaxAbsDiff(att.embedding, Tap(frames)));
  }
  CHECK(worst_pool < 1e-12);

  // APF/ANF/ADF with lambda_mu = 0 follow SAP parameter for parameter.
  ExperimentConfig sap_config;
  sap_config.variant = Variant::kSap;
  sap_config.steps = 100;
  sap_config.seed = 7;
  sap_config.episode.n_classes = 4;
  sap_config.extractor_hidden = {16};
  sap_config.frame_dim = 8;
  sap_config.embed_dim = 16;
  sap_config.synth.num_speakers = 8;
  sap_config.synth.utterances_per_speaker = 6;
  sap_config.synth.feature_dim = 12;
  sap_config.synth.frames_per_utterance = 220;
  sap_config.eval_enable = false;

  Trainer sap(sap_config);
  std::vector<Trainer> shadows;
  for (Variant variant : {Variant::kApf, Variant::kAnf, Variant::kAdf}) {
    ExperimentConfig config = sap_config;
    config.variant = variant;
    config.lambda_mu = 0.0;
    shadows.emplace_back(config);
  }

  double worst_traj = 0.0;
  for (int step = 0; step < 100; step++) {
    sap.Step();
    for (Trainer &shadow : shadows) {
      shadow.Step();
      auto a = sap.model().Params();
      auto b = shadow.model().Params();
      for (size_t k = 0; k < a.size(); k++)
        worst_traj =
            std::max(worst_traj, Matrix::MaxAbsDiff(*a[k].value, *b[k].value));
    }
  }
  CHECK(worst_traj < 1e-12);

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "pooling diff %.3g, 100-step trajectory diff %.3g", worst_pool,
                worst_traj);
  Report("C2 tap-sap-equivalence", worst_pool < 1e-12 && worst_traj < 1e-12,
         detail);
}

TEST_CASE("criterion 3: metric oracle agreement") {
  const DcfConfig defaults;
  CHECK(defaults.p_target == 0.01);

  // Hand-derived fixtures, exact.
  const ScoredTrialSet fixture =
      MakeScores({0.9, 0.8, 0.7, 0.4}, {0.5, 0.3, 0.2, 0.1});
  const bool fixture_ok =
      ComputeEer(fixture).eer == 0.25 &&
      ComputeMinDcf(fixture, defaults).min_dcf == 0.25;
  CHECK(ComputeEer(fixture).eer == 0.25);
  CHECK(ComputeMinDcf(fixture, defaults).min_dcf == 0.25);

  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 20; seed++) {
    Rng rng(seed * 31 + 5);
    std::vector<double> targets(550), nontargets(450);
    for (double &s : targets) s = rng.Gaussian() + 1.2;
    for (double &s : nontargets) s = rng.Gaussian();
    const ScoredTrialSet set = MakeScores(targets, nontargets);
    worst = std::max(worst,
                     std::abs(ComputeEer(set).eer - BruteForceEer(set)));
    worst = std::max(worst, std::abs(ComputeMinDcf(set, defaults).min_dcf -
                                     BruteForceMinDcf(set, defaults)));
  }
  CHECK(worst < 1e-9);

  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "20 x 1000-trial sets, worst |impl - oracle| %.3g", worst);
  Report("C3 metric-oracle", fixture_ok && worst < 1e-9, detail);
}

TEST_CASE("criterion 4: formula fixtures") {
  Rng rng(44);
  bool ok = true;

  // AM-softmax at m=0, s=1 equals softmax over raw cosines.
  {
    const Matrix emb = RandomMatrix(6, 5, &rng);
    ClassifierParams clf;
    clf.weight = RandomMatrix(4, 5, &rng);
    clf.weight_grad = Matrix(4, 5);
    const std::vector<int> labels = {0, 1, 2, 3, 1, 2};
    const double am =
        AmSoftmaxLoss(emb, labels, clf, AmSoftmaxConfig{1.0, 0.0}).loss;
    double direct = 0.0;
    for (int i = 0; i < 6; i++) {
      std::vector<double> cosines(4);
      for (int j = 0; j < 4; j++)
        cosines[j] = Dot(emb.Row(i), clf.weight.Row(j)) /
                     (Norm2(emb.Row(i)) * Norm2(clf.weight.Row(j)));
      direct += LogSumExp(cosines) - cosines[labels[i]];
    }
    direct /= 6;
    CHECK(std::abs(am - direct) < 1e-12);
    ok = ok && std::abs(am - direct) < 1e-12;

    // Monotone in the margin.
    double last = -1.0;
    for (double margin : {0.0, 0.05, 0.1, 0.2}) {
      const double loss =
          AmSoftmaxLoss(emb, labels, clf, AmSoftmaxConfig{4.0, margin}).loss;
      CHECK(loss >= last);
      ok = ok && loss >= last;
      last = loss;
    }
  }

  // ADF probability identity and APF/ANF bounds.
  {
    ProjectionParams proj;
    proj.weight = RandomMatrix(4, 4, &rng, 0.5);
    proj.bias = RandomMatrix(1, 4, &rng, 0.2);
    const Matrix pooled = RandomMatrix(8, 4, &rng);
    ContextVector ctx;
    ctx.mu = RandomMatrix(1, 4, &rng);
    const Matrix gphi = ProjectGphi(pooled, proj);
    for (int i = 0; i < 8; i++) {
      const double t = Dot(gphi.Row(i), ctx.mu.Row(0));
      const double p_cor = std::exp(t) / (std::exp(t) + std::exp(-t));
      const double diff = std::abs(p_cor - Sigmoid(2.0 * t));
      CHECK(diff < 1e-12);
      ok = ok && diff < 1e-12;
    }

    std::vector<int> all = {0, 1, 2, 3, 4, 5, 6, 7};
    const double apf = ApfLoss(pooled, all, proj, ctx);
    const double anf = AnfLoss(pooled, all, proj, ctx);
    CHECK(apf >= -1.0);
    CHECK(apf <= 1.0);
    CHECK(anf >= -1.0);
    CHECK(anf <= 1.0);
    ok = ok && apf >= -1.0 && apf <= 1.0 && anf >= -1.0 && anf <= 1.0;
  }

  Report("C4 formula-fixtures", ok, "am collapse, adf identity, bounds");
}

TEST_CASE("criterion 5: end-to-end synthetic training per variant") {
  const ReferenceRuns &runs = GetReferenceRuns();
  bool all_ok = true;
  for (const auto &[variant, run] : runs.runs) {
    const double accuracy = run.report.final_train_accuracy;
    const double eer = MetricsEer(run.report, "full");
    const bool ok =
        accuracy >= 0.9 && eer <= 0.15 && run.train_seconds < 300.0;
    all_ok = all_ok && ok;
    CHECK(accuracy >= 0.9);
    CHECK(eer <= 0.15);
    CHECK(run.train_seconds < 300.0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "train_acc %.3f, holdout EER(full) %.3f, %.1f s", accuracy,
                  eer, run.train_seconds);
    Report("C5 end-to-end " + VariantName(variant), ok, detail);
  }
  Report("C5 end-to-end", all_ok, "all five variants");
}

TEST_CASE("criterion 6: attention selectivity") {
  const ReferenceRuns &runs = GetReferenceRuns();
  bool all_ok = true;

  for (Variant variant : {Variant::kSap, Variant::kAnf}) {
    const VariantRun &run = runs.runs.at(variant);
    const AttentionStats stats =
        ComputeAttentionStats(run.model, runs.holdout, 1000);
    CHECK(stats.utterances >= 100);
    const double p_value =
        BinomialUpperTail(stats.utterances, stats.informative_higher);
    const bool selective =
        stats.mean_weight_informative > stats.mean_weight_distractor &&
        p_value < 0.01;
    CHECK(selective);
    all_ok = all_ok && selective;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "mean w_inf %.3g vs w_dis %.3g, %d/%d higher, sign-test p "
                  "%.3g",
                  stats.mean_weight_informative, stats.mean_weight_distractor,
                  stats.informative_higher, stats.utterances, p_value);
    Report("C6 selectivity " + VariantName(variant), selective, detail);
  }

  // ANF context loss decreases from its first to its last recorded
  // (active) value.
  const RunReport &anf = runs.runs.at(Variant::kAnf).report;
  double first = 0.0, last = 0.0;
  bool seen = false;
  for (const StepRecord &r : anf.steps) {
    if (!r.mu_active) continue;
    if (!seen) first = r.l_mu;
    last = r.l_mu;
    seen = true;
  }
  CHECK(seen);
  CHECK(last < first);
  all_ok = all_ok && seen && last < first;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "ANF L_mu first %.4f -> last %.4f",
                first, last);
  Report("C6 anf-context-loss-decrease", seen && last < first, detail);
  Report("C6 attention-selectivity", all_ok, "sign tests and loss trend");
}

TEST_CASE("criterion 7: duration protocol trend") {
  const ReferenceRuns &runs = GetReferenceRuns();
  const RunReport &report = runs.runs.at(Variant::kAnf).report;
  CHECK(report.metrics.size() == 4);
  const double eer_1s = MetricsEer(report, "1");
  const double eer_5s = MetricsEer(report, "5");
  CHECK(eer_5s <= eer_1s);

  std::printf("%s", FormatMetricsTable(report.metrics).c_str());
  char detail[128];
  std::snprintf(detail, sizeof(detail), "EER 1s %.3f >= EER 5s %.3f", eer_1s,
                eer_5s);
  Report("C7 duration-protocol", eer_5s <= eer_1s, detail);
}

TEST_CASE("criterion 8: determinism") {
  ExperimentConfig config;
  config.variant = Variant::kAnf;
  config.steps = 60;
  config.seed = 11;
  config.episode.n_classes = 4;
  config.extractor_hidden = {16};
  config.frame_dim = 8;
  config.embed_dim = 16;
  config.synth.num_speakers = 8;
  config.synth.utterances_per_speaker = 8;
  config.synth.feature_dim = 12;
  config.synth.frames_per_utterance = 220;
  config.holdout_per_speaker = 2;
  config.eval_pairs_per_speaker = 1;

  const std::string a = StripWallTime(Train(config).Serialize());
  const std::string b = StripWallTime(Train(config).Serialize());
  CHECK(a == b);
  Report("C8 determinism", a == b,
         "two identical runs, byte-identical reports minus wall time");
}
