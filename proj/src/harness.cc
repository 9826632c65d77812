// src/harness.cc

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

#include "apool/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace apool {

namespace {

// Decouples the evaluation rng stream from the training stream.
constexpr uint64_t kEvalSeedSalt = 0x5eedf00dULL;
constexpr int kMaxLrDecays = 3;
constexpr double kImprovementTol = 1e-4;
// Trailing window for the reported final training accuracy.
constexpr int kAccuracyWindow = 50;

double NowSeconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::Validate() const {
  if (steps < 1) APOOL_ERR("config: steps must be >= 1");
  if (lambda_mu < 0.0) APOOL_ERR("config: lambda_mu must be >= 0");
  if (frame_dim < 1 || embed_dim < 1) APOOL_ERR("config: bad model dims");
  for (int h : extractor_hidden)
    if (h < 1) APOOL_ERR("config: bad extractor hidden size " << h);
  if (optimizer.lr <= 0.0) APOOL_ERR("config: lr must be positive");
  if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0)
    APOOL_ERR("config: momentum must be in [0, 1)");
  if (optimizer.weight_decay < 0.0) APOOL_ERR("config: negative weight decay");
  if (optimizer.lr_decay_factor <= 1.0)
    APOOL_ERR("config: lr_decay_factor must exceed 1");
  if (optimizer.decay_patience < 1) APOOL_ERR("config: bad decay_patience");
  if (objective == Objective::kPlSoftmax) {
    if (episode.n_classes < 2)
      APOOL_ERR("config: episodes need at least 2 classes");
    if (episode.n_support < 1 || episode.n_query < 1)
      APOOL_ERR("config: episodes need support and query samples");
    if (episode.support_seconds <= 0.0 || episode.query_seconds_min <= 0.0)
      APOOL_ERR("config: crop lengths must be positive");
    if (episode.query_seconds_min > episode.query_seconds_max)
      APOOL_ERR("config: query seconds range inverted");
  } else {
    if (batch_size < 1) APOOL_ERR("config: batch_size must be >= 1");
    if (crop_seconds <= 0.0) APOOL_ERR("config: crop_seconds must be > 0");
  }
  if (data_source == DataSource::kDirectory && data_dir.empty())
    APOOL_ERR("config: data=dir requires data_dir");
  if (holdout_per_speaker < 0) APOOL_ERR("config: bad holdout_per_speaker");
  if (eval_enable && eval_pairs_per_speaker < 1)
    APOOL_ERR("config: eval_pairs_per_speaker must be >= 1");
}

namespace {

std::vector<int> ParseIntList(const std::string &s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    out.push_back(std::stoi(token));
  }
  return out;
}

std::vector<double> ParseDurations(const std::string &s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    if (token == "full")
      out.push_back(-1.0);
    else
      out.push_back(std::stod(token));
  }
  if (out.empty()) APOOL_ERR("config: empty duration list");
  return out;
}

bool ParseBool(const std::string &key, const std::string &value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  APOOL_ERR("config: key '" << key << "' expects 0|1, got '" << value << "'");
}

}  // namespace

ExperimentConfig ParseConfigText(const std::string &text,
                                 const std::string &context) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    line_no++;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // Trim.
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      APOOL_ERR(context << " line " << line_no
                << ": expected key=value, got '" << line << "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const size_t kend = key.find_last_not_of(" \t");
    key = key.substr(0, kend == std::string::npos ? 0 : kend + 1);
    const size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    if (key.empty())
      APOOL_ERR(context << " line " << line_no << ": empty key");
    kv[key] = value;
  }

  ExperimentConfig c;
  bool synth_seed_set = false;
  for (const auto &[key, value] : kv) {
    try {
      if (key == "variant") c.variant = ParseVariant(value);
      else if (key == "objective") c.objective = ParseObjective(value);
      else if (key == "lambda_mu") c.lambda_mu = std::stod(value);
      else if (key == "mu_stop_gradient")
        c.mu_stop_gradient = ParseBool(key, value);
      else if (key == "steps") c.steps = std::stoi(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "episode_classes") c.episode.n_classes = std::stoi(value);
      else if (key == "episode_support") c.episode.n_support = std::stoi(value);
      else if (key == "episode_query") c.episode.n_query = std::stoi(value);
      else if (key == "support_seconds")
        c.episode.support_seconds = std::stod(value);
      else if (key == "query_seconds_min")
        c.episode.query_seconds_min = std::stod(value);
      else if (key == "query_seconds_max")
        c.episode.query_seconds_max = std::stod(value);
      else if (key == "batch_size") c.batch_size = std::stoi(value);
      else if (key == "crop_seconds") c.crop_seconds = std::stod(value);
      else if (key == "lr") c.optimizer.lr = std::stod(value);
      else if (key == "momentum") c.optimizer.momentum = std::stod(value);
      else if (key == "weight_decay")
        c.optimizer.weight_decay = std::stod(value);
      else if (key == "lr_decay_factor")
        c.optimizer.lr_decay_factor = std::stod(value);
      else if (key == "decay_patience")
        c.optimizer.decay_patience = std::stoi(value);
      else if (key == "extractor_hidden")
        c.extractor_hidden = ParseIntList(value);
      else if (key == "frame_dim") c.frame_dim = std::stoi(value);
      else if (key == "embed_dim") c.embed_dim = std::stoi(value);
      else if (key == "normalize") c.normalize = ParseBool(key, value);
      else if (key == "data") {
        if (value == "synth") c.data_source = DataSource::kSynth;
        else if (value == "dir") c.data_source = DataSource::kDirectory;
        else APOOL_ERR("config: data must be synth|dir, got '" << value << "'");
      } else if (key == "data_dir") c.data_dir = value;
      else if (key == "synth_speakers") c.synth.num_speakers = std::stoi(value);
      else if (key == "synth_utterances_per_speaker")
        c.synth.utterances_per_speaker = std::stoi(value);
      else if (key == "synth_feature_dim")
        c.synth.feature_dim = std::stoi(value);
      else if (key == "synth_frames")
        c.synth.frames_per_utterance = std::stoi(value);
      else if (key == "synth_spread") c.synth.speaker_spread = std::stod(value);
      else if (key == "synth_noise") c.synth.noise_scale = std::stod(value);
      else if (key == "synth_distractor_fraction")
        c.synth.distractor_fraction = std::stod(value);
      else if (key == "synth_seed") {
        c.synth.seed = std::stoull(value);
        synth_seed_set = true;
      } else if (key == "holdout_per_speaker")
        c.holdout_per_speaker = std::stoi(value);
      else if (key == "eval_enable") c.eval_enable = ParseBool(key, value);
      else if (key == "eval_pairs_per_speaker")
        c.eval_pairs_per_speaker = std::stoi(value);
      else if (key == "eval_durations") c.eval_durations = ParseDurations(value);
      else
        APOOL_ERR(context << ": unknown key '" << key << "'");
    } catch (const std::invalid_argument &) {
      APOOL_ERR(context << ": key '" << key << "' has malformed value '"
                << value << "'");
    } catch (const std::out_of_range &) {
      APOOL_ERR(context << ": key '" << key << "' value out of range");
    }
  }
  if (!synth_seed_set) c.synth.seed = c.seed;
  c.Validate();
  return c;
}

ExperimentConfig ParseConfigFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) APOOL_ERR("cannot open config file '" << path << "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseConfigText(buffer.str(), "config file '" + path + "'");
}

std::string SerializeConfig(const ExperimentConfig &c) {
  std::map<std::string, std::string> kv;
  kv["variant"] = VariantName(c.variant);
  kv["objective"] = ObjectiveName(c.objective);
  kv["lambda_mu"] = Fmt(c.lambda_mu);
  kv["mu_stop_gradient"] = c.mu_stop_gradient ? "1" : "0";
  kv["steps"] = std::to_string(c.steps);
  kv["seed"] = std::to_string(c.seed);
  kv["episode_classes"] = std::to_string(c.episode.n_classes);
  kv["episode_support"] = std::to_string(c.episode.n_support);
  kv["episode_query"] = std::to_string(c.episode.n_query);
  kv["support_seconds"] = Fmt(c.episode.support_seconds);
  kv["query_seconds_min"] = Fmt(c.episode.query_seconds_min);
  kv["query_seconds_max"] = Fmt(c.episode.query_seconds_max);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["crop_seconds"] = Fmt(c.crop_seconds);
  kv["lr"] = Fmt(c.optimizer.lr);
  kv["momentum"] = Fmt(c.optimizer.momentum);
  kv["weight_decay"] = Fmt(c.optimizer.weight_decay);
  kv["lr_decay_factor"] = Fmt(c.optimizer.lr_decay_factor);
  kv["decay_patience"] = std::to_string(c.optimizer.decay_patience);
  std::string hidden;
  for (size_t i = 0; i < c.extractor_hidden.size(); i++)
    hidden += (i ? "," : "") + std::to_string(c.extractor_hidden[i]);
  kv["extractor_hidden"] = hidden;
  kv["frame_dim"] = std::to_string(c.frame_dim);
  kv["embed_dim"] = std::to_string(c.embed_dim);
  kv["normalize"] = c.normalize ? "1" : "0";
  kv["data"] = c.data_source == DataSource::kSynth ? "synth" : "dir";
  kv["data_dir"] = c.data_dir;
  kv["synth_speakers"] = std::to_string(c.synth.num_speakers);
  kv["synth_utterances_per_speaker"] =
      std::to_string(c.synth.utterances_per_speaker);
  kv["synth_feature_dim"] = std::to_string(c.synth.feature_dim);
  kv["synth_frames"] = std::to_string(c.synth.frames_per_utterance);
  kv["synth_spread"] = Fmt(c.synth.speaker_spread);
  kv["synth_noise"] = Fmt(c.synth.noise_scale);
  kv["synth_distractor_fraction"] = Fmt(c.synth.distractor_fraction);
  kv["synth_seed"] = std::to_string(c.synth.seed);
  kv["holdout_per_speaker"] = std::to_string(c.holdout_per_speaker);
  kv["eval_enable"] = c.eval_enable ? "1" : "0";
  kv["eval_pairs_per_speaker"] = std::to_string(c.eval_pairs_per_speaker);
  std::string durations;
  for (size_t i = 0; i < c.eval_durations.size(); i++)
    durations += (i ? "," : "") + DurationLabel(c.eval_durations[i]);
  kv["eval_durations"] = durations;

  std::string out;
  for (const auto &[key, value] : kv) out += key + "=" + value + "\n";
  return out;
}

RawEpisode SampleEpisode(const Dataset &dataset, const EpisodeSpec &spec,
                         Rng *rng) {
  if (spec.n_classes < 2)
    APOOL_ERR("SampleEpisode: need at least 2 classes, got "
              << spec.n_classes);
  if (dataset.num_speakers < spec.n_classes)
    APOOL_ERR("SampleEpisode: dataset has " << dataset.num_speakers
              << " speakers, episode needs " << spec.n_classes);

  std::vector<int> speakers(dataset.num_speakers);
  for (int s = 0; s < dataset.num_speakers; s++) speakers[s] = s;
  rng->Shuffle(&speakers);
  speakers.resize(spec.n_classes);

  const auto by_speaker = dataset.BySpeaker();
  RawEpisode episode;
  for (int cls = 0; cls < spec.n_classes; cls++) {
    const int speaker = speakers[cls];
    std::vector<int> utts = by_speaker[speaker];
    APOOL_ASSERT(!utts.empty());
    rng->Shuffle(&utts);
    const int needed = spec.n_support + spec.n_query;
    // Reuse utterances (distinct crops) when the speaker has too few.
    const int n_utts = static_cast<int>(utts.size());
    for (int k = 0; k < needed; k++) {
      const FrameSequence &utt = dataset.utterances[utts[k % n_utts]];
      if (k < spec.n_support) {
        episode.support.push_back(Crop(utt, spec.support_seconds, rng));
        episode.support_labels.push_back(cls);
        episode.support_speakers.push_back(speaker);
      } else {
        const double seconds =
            rng->Uniform(spec.query_seconds_min, spec.query_seconds_max);
        episode.query.push_back(Crop(utt, seconds, rng));
        episode.query_labels.push_back(cls);
        episode.query_speakers.push_back(speaker);
      }
    }
  }
  return episode;
}

void SgdStep(const std::vector<NamedParam> &params, SgdState *state,
             const OptimizerConfig &opt, double lr) {
  if (state->velocity.empty()) {
    state->velocity.reserve(params.size());
    for (const NamedParam &p : params)
      state->velocity.emplace_back(p.value->NumRows(), p.value->NumCols());
  }
  APOOL_ASSERT(state->velocity.size() == params.size());

  for (size_t k = 0; k < params.size(); k++) {
    const NamedParam &param = params[k];
    if (!param.grad->AllFinite())
      APOOL_NUMERIC_ERR("SgdStep: non-finite gradient for '" << param.name
                        << "'");
    Matrix &velocity = state->velocity[k];
    double *p = param.value->Data();
    const double *g = param.grad->Data();
    double *v = velocity.Data();
    const double beta = opt.momentum, wd = opt.weight_decay;
    for (int i = 0; i < param.value->Size(); i++) {
      const double g_decayed = g[i] + wd * p[i];
      v[i] = beta * v[i] + g_decayed;
      p[i] -= lr * (g_decayed + beta * v[i]);
    }
  }
}

LrSchedule::LrSchedule(const OptimizerConfig &opt)
    : opt_(opt),
      lr_(opt.lr),
      best_loss_(std::numeric_limits<double>::infinity()) {}

double LrSchedule::Update(double loss) {
  if (loss < best_loss_ - kImprovementTol) {
    best_loss_ = loss;
    steps_since_improvement_ = 0;
    return lr_;
  }
  steps_since_improvement_++;
  if (steps_since_improvement_ >= opt_.decay_patience) {
    steps_since_improvement_ = 0;
    if (decays_ >= kMaxLrDecays) {
      stop_ = true;
    } else {
      lr_ /= opt_.lr_decay_factor;
      decays_++;
    }
  }
  return lr_;
}

Trainer::Trainer(const ExperimentConfig &config)
    : config_(config), rng_(config.seed), schedule_(config.optimizer) {
  config_.Validate();

  Dataset raw = config_.data_source == DataSource::kSynth
                    ? SynthDataset(config_.synth)
                    : LoadDatasetDir(config_.data_dir);
  raw.Validate();

  if (config_.normalize)
    for (FrameSequence &utt : raw.utterances) utt = NormalizeTimeAxis(utt);

  if (config_.holdout_per_speaker > 0) {
    const auto by_speaker = raw.BySpeaker();
    int min_count = std::numeric_limits<int>::max();
    for (const auto &utts : by_speaker)
      min_count = std::min(min_count, static_cast<int>(utts.size()));
    if (min_count <= config_.holdout_per_speaker)
      APOOL_ERR("Trainer: holdout_per_speaker=" << config_.holdout_per_speaker
                << " leaves no training data for some speaker");
    std::tie(train_data_, holdout_data_) =
        SplitPerSpeaker(raw, min_count - config_.holdout_per_speaker);
  } else {
    train_data_ = std::move(raw);
  }

  ModelShape shape;
  shape.feature_dim = train_data_.utterances.front().FeatureDim();
  shape.extractor_hidden = config_.extractor_hidden;
  shape.frame_dim = config_.frame_dim;
  shape.embed_dim = config_.embed_dim;
  shape.num_classes = train_data_.num_speakers;
  model_ = InitModel(shape, &rng_);

  wall_start_ = NowSeconds();
}

bool Trainer::Done() const {
  return StepsRun() >= config_.steps || schedule_.stop();
}

namespace {

// Per-utterance forward state kept for the backward pass.
struct UttForward {
  ExtractorCache cache;
  Matrix frames_out;  // T x D extractor output
  AttentionOutput attention;
};

// Runs extractor + pooling for a list of crops; pooled rows land in a
// B x D matrix.
Matrix ForwardPooled(const std::vector<FrameSequence> &crops, Model *model,
                     Variant variant, std::vector<UttForward> *fwd) {
  const int batch = static_cast<int>(crops.size());
  Matrix pooled(batch, model->shape.frame_dim);
  fwd->resize(batch);
  for (int i = 0; i < batch; i++) {
    UttForward &f = (*fwd)[i];
    f.frames_out =
        ExtractorForward(crops[i].features, model->extractor, &f.cache);
    if (variant == Variant::kTap) {
      const Matrix mean = Tap(f.frames_out);
      std::copy(mean.RowData(0), mean.RowData(0) + mean.NumCols(),
                pooled.RowData(i));
    } else {
      f.attention = Sap(f.frames_out, model->proj, model->context);
      std::copy(f.attention.embedding.RowData(0),
                f.attention.embedding.RowData(0) + pooled.NumCols(),
                pooled.RowData(i));
    }
  }
  return pooled;
}

// Routes per-sample pooled gradients back through pooling and extractor.
void BackwardPooled(const std::vector<FrameSequence> &crops,
                    const Matrix &pooled_grad, Model *model, Variant variant,
                    std::vector<UttForward> *fwd) {
  for (int i = 0; i < pooled_grad.NumRows(); i++) {
    UttForward &f = (*fwd)[i];
    Matrix grad_row(1, pooled_grad.NumCols());
    std::copy(pooled_grad.RowData(i),
              pooled_grad.RowData(i) + pooled_grad.NumCols(),
              grad_row.RowData(0));
    Matrix grad_frames =
        variant == Variant::kTap
            ? TapBackward(grad_row, f.frames_out.NumRows())
            : SapBackward(f.frames_out, f.attention, grad_row, &model->proj,
                          &model->context);
    ExtractorBackward(grad_frames, &model->extractor, f.cache);
  }
}

}  // namespace

void Trainer::EpisodicStep() {
  const RawEpisode episode =
      SampleEpisode(train_data_, config_.episode, &rng_);

  std::vector<UttForward> support_fwd, query_fwd;
  Matrix support_pooled =
      ForwardPooled(episode.support, &model_, config_.variant, &support_fwd);
  Matrix query_pooled =
      ForwardPooled(episode.query, &model_, config_.variant, &query_fwd);

  Matrix support_x = EmbedHead(support_pooled, model_.head);
  Matrix query_x = EmbedHead(query_pooled, model_.head);

  Matrix support_x_grad(support_x.NumRows(), support_x.NumCols());
  Matrix query_x_grad(query_x.NumRows(), query_x.NumCols());
  Matrix query_pooled_grad(query_pooled.NumRows(), query_pooled.NumCols());

  // Softmax over the whole training-class set; only queries feed it, and
  // its argmax supplies the feedback for the context losses.
  const SoftmaxLossResult softmax =
      SoftmaxLoss(query_x, episode.query_speakers, model_.classifier,
                  &query_x_grad, &model_.classifier);
  const Feedback feedback =
      FeedbackPartition(softmax.predictions, episode.query_speakers);

  const Matrix protos =
      Prototypes(support_x, episode.support_labels, config_.episode.n_classes);
  Matrix proto_grad(protos.NumRows(), protos.NumCols());
  const double l_pl =
      PrototypicalLoss(query_x, episode.query_labels, protos, &query_x_grad,
                       &proto_grad);
  ScatterPrototypeGrad(proto_grad, episode.support_labels, &support_x_grad);

  LossParts parts;
  parts.l_s = softmax.loss;
  parts.l_pl = l_pl;
  if (VariantHasContextLoss(config_.variant)) {
    if (config_.lambda_mu != 0.0) {
      ContextLossOptions options;
      options.confine_to_mu = config_.mu_stop_gradient;
      options.grad_scale = config_.lambda_mu;
      parts.l_mu =
          ContextLossGrad(config_.variant, query_pooled, feedback,
                          &model_.proj, &model_.context, &query_pooled_grad,
                          options);
    } else {
      // Value only; gradients are skipped entirely so a lambda_mu=0 run
      // matches the SAP trajectory bit for bit.
      switch (config_.variant) {
        case Variant::kApf:
          parts.l_mu = ApfLoss(query_pooled, feedback.cor_indices,
                               model_.proj, model_.context);
          break;
        case Variant::kAnf:
          parts.l_mu = AnfLoss(query_pooled, feedback.mis_indices,
                               model_.proj, model_.context);
          break;
        default:
          parts.l_mu =
              AdfLoss(query_pooled, feedback, model_.proj, model_.context);
      }
    }
  }
  const LossBundle bundle =
      TotalObjective(parts, config_.variant, config_.lambda_mu);

  Matrix support_pooled_grad =
      EmbedHeadBackward(support_pooled, support_x_grad, &model_.head);
  Matrix head_in_grad =
      EmbedHeadBackward(query_pooled, query_x_grad, &model_.head);
  for (int i = 0; i < query_pooled_grad.NumRows(); i++)
    Axpy(1.0, head_in_grad.Row(i), query_pooled_grad.Row(i));

  BackwardPooled(episode.support, support_pooled_grad, &model_,
                 config_.variant, &support_fwd);
  BackwardPooled(episode.query, query_pooled_grad, &model_, config_.variant,
                 &query_fwd);

  double accuracy = 0.0;
  for (uint8_t c : feedback.correct) accuracy += c;
  accuracy /= feedback.correct.size();

  // Context-loss activity, for the recorded-value semantics of reports:
  // APF/ANF are active only when their sample set is nonempty and mu is
  // away from zero; ADF is always defined.
  StepRecord record;
  record.l_s = softmax.loss;
  record.l_pl = l_pl;
  record.l_mu = bundle.l_mu;
  const double mu_norm = Norm2(model_.context.mu.Row(0));
  switch (config_.variant) {
    case Variant::kApf:
      record.mu_active = !feedback.cor_indices.empty() && mu_norm >= 1e-12;
      break;
    case Variant::kAnf:
      record.mu_active = !feedback.mis_indices.empty() && mu_norm >= 1e-12;
      break;
    case Variant::kAdf:
      record.mu_active = true;
      break;
    default:
      record.mu_active = false;
  }
  record.total = bundle.total;
  record.accuracy = accuracy;
  records_.push_back(record);
}

void Trainer::ClassificationStep() {
  const int batch = config_.batch_size;
  std::vector<FrameSequence> crops;
  std::vector<int> labels;
  crops.reserve(batch);
  for (int i = 0; i < batch; i++) {
    const int u =
        rng_.UniformInt(static_cast<int>(train_data_.utterances.size()));
    crops.push_back(
        Crop(train_data_.utterances[u], config_.crop_seconds, &rng_));
    labels.push_back(train_data_.utterances[u].speaker);
  }

  std::vector<UttForward> fwd;
  Matrix pooled = ForwardPooled(crops, &model_, config_.variant, &fwd);
  Matrix x = EmbedHead(pooled, model_.head);

  Matrix x_grad(x.NumRows(), x.NumCols());
  Matrix pooled_grad(pooled.NumRows(), pooled.NumCols());

  SoftmaxLossResult cls;
  LossParts parts;
  if (config_.objective == Objective::kSoftmax) {
    cls = SoftmaxLoss(x, labels, model_.classifier, &x_grad,
                      &model_.classifier);
    parts.l_s = cls.loss;
  } else {
    cls = AmSoftmaxLoss(x, labels, model_.classifier, AmSoftmaxConfig{},
                        &x_grad, &model_.classifier);
    parts.l_am = cls.loss;
  }
  const Feedback feedback = FeedbackPartition(cls.predictions, labels);

  if (VariantHasContextLoss(config_.variant)) {
    if (config_.lambda_mu != 0.0) {
      ContextLossOptions options;
      options.confine_to_mu = config_.mu_stop_gradient;
      options.grad_scale = config_.lambda_mu;
      parts.l_mu = ContextLossGrad(config_.variant, pooled, feedback,
                                   &model_.proj, &model_.context,
                                   &pooled_grad, options);
    } else {
      switch (config_.variant) {
        case Variant::kApf:
          parts.l_mu =
              ApfLoss(pooled, feedback.cor_indices, model_.proj,
                      model_.context);
          break;
        case Variant::kAnf:
          parts.l_mu =
              AnfLoss(pooled, feedback.mis_indices, model_.proj,
                      model_.context);
          break;
        default:
          parts.l_mu = AdfLoss(pooled, feedback, model_.proj, model_.context);
      }
    }
  }
  const LossBundle bundle =
      TotalObjective(parts, config_.variant, config_.lambda_mu);

  Matrix head_in_grad = EmbedHeadBackward(pooled, x_grad, &model_.head);
  for (int i = 0; i < pooled_grad.NumRows(); i++)
    Axpy(1.0, head_in_grad.Row(i), pooled_grad.Row(i));
  BackwardPooled(crops, pooled_grad, &model_, config_.variant, &fwd);

  double accuracy = 0.0;
  for (uint8_t c : feedback.correct) accuracy += c;
  accuracy /= feedback.correct.size();

  StepRecord record;
  if (config_.objective == Objective::kSoftmax)
    record.l_s = cls.loss;
  else
    record.l_am = cls.loss;
  record.l_mu = bundle.l_mu;
  const double mu_norm = Norm2(model_.context.mu.Row(0));
  switch (config_.variant) {
    case Variant::kApf:
      record.mu_active = !feedback.cor_indices.empty() && mu_norm >= 1e-12;
      break;
    case Variant::kAnf:
      record.mu_active = !feedback.mis_indices.empty() && mu_norm >= 1e-12;
      break;
    case Variant::kAdf:
      record.mu_active = true;
      break;
    default:
      record.mu_active = false;
  }
  record.total = bundle.total;
  record.accuracy = accuracy;
  records_.push_back(record);
}

void Trainer::Step() {
  APOOL_ASSERT(!Done());
  model_.ZeroGrad();

  // Snapshot for rollback if the step turns out numerically bad.
  std::vector<Matrix> snapshot;
  for (const NamedParam &p : model_.Params()) snapshot.push_back(*p.value);

  try {
    if (config_.objective == Objective::kPlSoftmax)
      EpisodicStep();
    else
      ClassificationStep();

    StepRecord &record = records_.back();
    record.step = StepsRun();
    if (!std::isfinite(record.total))
      APOOL_NUMERIC_ERR("Trainer: non-finite total loss at step "
                        << record.step);
    record.lr = schedule_.Update(record.total);
    SgdStep(model_.Params(), &sgd_, config_.optimizer, record.lr);
  } catch (const NumericError &) {
    // Roll the parameters back so the caller can checkpoint a usable
    // model ("last good" state).
    std::vector<NamedParam> params = model_.Params();
    for (size_t k = 0; k < params.size(); k++) *params[k].value = snapshot[k];
    if (!records_.empty() &&
        records_.back().step == 0)  // record from the failed step
      records_.pop_back();
    throw;
  }
}

RunReport Train(const ExperimentConfig &config) {
  Trainer trainer(config);
  while (!trainer.Done()) trainer.Step();
  return trainer.FinishReport();
}

RunReport Trainer::FinishReport() {
  RunReport report;
  report.config_echo = SerializeConfig(config_);
  report.steps = records_;
  report.steps_run = StepsRun();
  report.stopped_early = schedule_.stop() && StepsRun() < config_.steps;

  const int window = std::min<int>(kAccuracyWindow, records_.size());
  double acc = 0.0;
  for (int i = 0; i < window; i++)
    acc += records_[records_.size() - 1 - i].accuracy;
  report.final_train_accuracy = window > 0 ? acc / window : 0.0;

  if (config_.eval_enable) {
    const Dataset &eval_data =
        holdout_data_.utterances.empty() ? train_data_ : holdout_data_;
    report.metrics =
        EvaluateModel(model_, config_.variant, eval_data,
                      config_.eval_durations, config_.eval_pairs_per_speaker,
                      config_.seed ^ kEvalSeedSalt);
  }

  if (config_.variant != Variant::kTap) {
    const Dataset &attn_data =
        holdout_data_.utterances.empty() ? train_data_ : holdout_data_;
    bool has_mask = false;
    for (const FrameSequence &utt : attn_data.utterances)
      if (!utt.informative_mask.empty()) {
        has_mask = true;
        break;
      }
    if (has_mask)
      report.attention = ComputeAttentionStats(model_, attn_data, 1000);
  }

  report.wall_time_sec = NowSeconds() - wall_start_;
  return report;
}

std::vector<double> EmbedUtterance(const Model &model, Variant variant,
                                   const FrameSequence &frames) {
  const Matrix out = ExtractorForward(frames.features, model.extractor,
                                      nullptr);
  Matrix pooled = variant == Variant::kTap
                      ? Tap(out)
                      : Sap(out, model.proj, model.context).embedding;
  const Matrix x = EmbedHead(pooled, model.head);
  return std::vector<double>(x.RowData(0), x.RowData(0) + x.NumCols());
}

std::vector<MetricsRow> EvaluateModel(const Model &model, Variant variant,
                                      const Dataset &dataset,
                                      const std::vector<double> &durations,
                                      int pairs_per_speaker, uint64_t seed) {
  Rng rng(seed);
  const std::vector<Trial> trials =
      BuildTrials(dataset, pairs_per_speaker, &rng);
  const EmbedFn embed = [&model, variant](const FrameSequence &frames) {
    return EmbedUtterance(model, variant, frames);
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
  }
  return rows;
}

AttentionStats ComputeAttentionStats(const Model &model,
                                     const Dataset &dataset,
                                     int max_utterances) {
  AttentionStats stats;
  double sum_informative = 0.0, sum_distractor = 0.0;
  for (const FrameSequence &utt : dataset.utterances) {
    if (stats.utterances >= max_utterances) break;
    if (utt.informative_mask.empty()) continue;
    int n_inf = 0, n_dis = 0;
    for (uint8_t m : utt.informative_mask) (m ? n_inf : n_dis)++;
    if (n_inf == 0 || n_dis == 0) continue;

    const Matrix out = ExtractorForward(utt.features, model.extractor,
                                        nullptr);
    const AttentionOutput att = Sap(out, model.proj, model.context);
    double w_inf = 0.0, w_dis = 0.0;
    for (size_t t = 0; t < att.weights.size(); t++)
      (utt.informative_mask[t] ? w_inf : w_dis) += att.weights[t];
    w_inf /= n_inf;
    w_dis /= n_dis;
    sum_informative += w_inf;
    sum_distractor += w_dis;
    if (w_inf > w_dis) stats.informative_higher++;
    stats.utterances++;
  }
  if (stats.utterances > 0) {
    stats.mean_weight_informative = sum_informative / stats.utterances;
    stats.mean_weight_distractor = sum_distractor / stats.utterances;
  }
  return stats;
}

std::string DurationLabel(double seconds) {
  if (seconds <= 0.0) return "full";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", seconds);
  return buf;
}

std::string FormatMetricsTable(const std::vector<MetricsRow> &rows) {
  std::string out =
      "duration eer eer_threshold min_dcf dcf_threshold\n";
  for (const MetricsRow &row : rows) {
    out += row.label + " " + Fmt(row.eer) + " " + Fmt(row.eer_threshold) +
           " " + Fmt(row.min_dcf) + " " + Fmt(row.dcf_threshold) + "\n";
  }
  return out;
}

std::string RunReport::Serialize() const {
  std::string out = "apool_run_report_v1\n";
  out += "[config]\n" + config_echo;
  out += "[summary]\n";
  out += "steps_run " + std::to_string(steps_run) + "\n";
  out += "stopped_early " + std::string(stopped_early ? "1" : "0") + "\n";
  out += "final_train_accuracy " + Fmt(final_train_accuracy) + "\n";
  if (attention) {
    out += "[attention]\n";
    out += "mean_weight_informative " + Fmt(attention->mean_weight_informative) +
           "\n";
    out += "mean_weight_distractor " + Fmt(attention->mean_weight_distractor) +
           "\n";
    out += "utterances " + std::to_string(attention->utterances) + "\n";
    out += "informative_higher " + std::to_string(attention->informative_higher) +
           "\n";
  }
  if (!metrics.empty()) {
    out += "[metrics]\n";
    out += FormatMetricsTable(metrics);
  }
  out += "[steps]\n";
  out += "step total l_s l_pl l_am l_mu mu_active accuracy lr\n";
  for (const StepRecord &r : steps) {
    out += std::to_string(r.step) + " " + Fmt(r.total) + " " + Fmt(r.l_s) +
           " " + Fmt(r.l_pl) + " " + Fmt(r.l_am) + " " + Fmt(r.l_mu) + " " +
           (r.mu_active ? "1" : "0") + " " + Fmt(r.accuracy) + " " +
           Fmt(r.lr) + "\n";
  }
  out += "[timing]\n";
  out += "wall_time_sec " + Fmt(wall_time_sec) + "\n";
  return out;
}

}  // namespace apool
