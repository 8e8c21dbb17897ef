/*
 * Copyright 2026 The tripcon Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tripcon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tripcon/errors.hpp"
#include "tripcon/losses.hpp"
#include "tripcon/plot.hpp"
#include "tripcon/sampler.hpp"

namespace tripcon {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::optional<nlohmann::json> read_json_if_present(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  return nlohmann::json::parse(read_text(path));
}

nlohmann::json lock_json(const RunConfig& config, std::uint64_t seed) {
  return {{"seed", seed}, {"config", config}};
}

// Frames of one split, flattened in episode order.
struct FrameSet {
  Tensor obs;
  std::vector<MultiLabel> labels;
  Tensor targets;
};

Tensor label_targets(std::span<const MultiLabel> labels, std::size_t classes) {
  Tensor t(Shape{labels.size(), classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (std::size_t c = 0; c < classes; ++c) t.at(r, c) = labels[r][c] ? 1.0 : 0.0;
  }
  return t;
}

std::pair<std::size_t, std::size_t> split_range(const EpisodeDataset& ds, bool train) {
  return train ? std::pair{std::size_t{0}, ds.train_episodes} : std::pair{ds.train_episodes, ds.episodes.size()};
}

FrameSet gather_frames(const EpisodeDataset& ds, bool train) {
  const auto [lo, hi] = split_range(ds, train);
  const std::size_t dim = ds.config.obs_dim;
  std::vector<double> obs;
  FrameSet out;
  for (std::size_t e = lo; e < hi; ++e) {
    const auto& ep = ds.episodes[e];
    obs.insert(obs.end(), ep.observations.data().begin(), ep.observations.data().end());
    out.labels.insert(out.labels.end(), ep.labels.begin(), ep.labels.end());
  }
  out.obs = Tensor(Shape{out.labels.size(), dim}, std::move(obs));
  out.targets = label_targets(out.labels, ds.vocab.size());
  return out;
}

Tensor take_rows(const Tensor& src, std::span<const std::size_t> idx) {
  const std::size_t cols = src.cols();
  Tensor out(Shape{idx.size(), cols});
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(src.row(idx[r]).begin(), cols, out.row(r).begin());
  return out;
}

// Shuffled mini-batches; a trailing batch of one row is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch) {
    const std::size_t hi = std::min(n, lo + batch);
    if (hi - lo < 2) break;
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

std::size_t batches_per_epoch(std::size_t n, std::size_t batch) {
  std::size_t count = n / batch;
  if (n % batch >= 2) ++count;
  return count;
}

ToyEncoder load_encoder(const RunConfig& config, const RunDir& dir, const std::string& name) {
  ToyEncoder enc(config.encoder, 0);
  enc.params().assign(ParameterSet::load(dir.checkpoint(name)));
  return enc;
}

MrttConfig mrtt_config(const RunConfig& config) {
  MrttConfig m;
  m.embed_dim = config.encoder.feature_dim;
  m.classes = config.encoder.classes;
  m.pathway = config.temporal.pathway;
  m.learn_gamma = config.toggles.gamma;
  m.use_beta = config.toggles.beta;
  return m;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? NAN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Rows of `windows` stacked into B x W x d plus the B x W validity mask.
struct WindowBatch {
  Tensor e;
  Tensor mask;
  Tensor targets;  // B x W x C
};

WindowBatch stack_windows(std::span<const Window> windows, std::span<const Tensor> features,
                          std::span<const Tensor> targets, std::size_t width) {
  const std::size_t d = features[0].cols();
  const std::size_t c = targets[0].cols();
  WindowBatch out{Tensor(Shape{windows.size(), width, d}), Tensor(Shape{windows.size(), width}),
                  Tensor(Shape{windows.size(), width, c})};
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Window& w = windows[b];
    for (std::size_t t = 0; t < w.length; ++t) {
      const auto f = features[w.episode].row(w.start + t);
      std::copy(f.begin(), f.end(), out.e.data().begin() + static_cast<std::ptrdiff_t>((b * width + t) * d));
      const auto y = targets[w.episode].row(w.start + t);
      std::copy(y.begin(), y.end(), out.targets.data().begin() + static_cast<std::ptrdiff_t>((b * width + t) * c));
      out.mask.at(b, t) = 1.0;
    }
  }
  return out;
}

double binary_entropy_mean(const Tensor& p) {
  double total = 0.0;
  for (double v : p.data()) {
    const double q = std::clamp(v, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    total -= q * std::log(q) + (1.0 - q) * std::log(1.0 - q);
  }
  return total / static_cast<double>(p.size());
}

}  // namespace

void RunDir::prepare(const RunConfig& config, std::uint64_t seed) const {
  config.validate();
  for (const auto& sub : {data(), checkpoints(), reports(), plots()}) fs::create_directories(sub);
  const std::string lock = lock_json(config, seed).dump(2) + "\n";
  if (fs::exists(config_lock())) {
    if (read_text(config_lock()) != lock) {
      throw ConfigError("run directory " + root_.string() + " was created with a different config or seed");
    }
    return;
  }
  write_text(config_lock(), lock);
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

EpisodeDataset load_run_dataset(const RunConfig& config, const RunDir& dir) {
  const fs::path path = config.dataset ? *config.dataset : dir.data() / "dataset.bin";
  if (!fs::exists(path)) throw IoError("missing dataset " + path.string() + " (run gen-data first)");
  EpisodeDataset ds = read_dataset(path);
  if (ds.config.obs_dim != config.encoder.input_dim || ds.vocab.size() != config.encoder.classes) {
    throw ConfigError("dataset has " + std::to_string(ds.config.obs_dim) + " features and " +
                      std::to_string(ds.vocab.size()) + " classes; encoder expects " +
                      std::to_string(config.encoder.input_dim) + " and " + std::to_string(config.encoder.classes));
  }
  return ds;
}

EpisodeDataset cmd_gen_data(const RunConfig& config, std::uint64_t seed, const RunDir& dir) {
  dir.prepare(config, seed);
  EpisodeDataset ds = generate_dataset(config.data, stream_seed(seed, Stream::kData));
  const std::string bytes = dataset_to_bytes(ds);
  write_text(dir.data() / "dataset.bin", bytes);
  write_json(dir.data() / "manifest.json", dataset_manifest(ds, bytes));
  spdlog::info("gen-data: {} episodes ({} train), {} classes", ds.episodes.size(), ds.train_episodes, ds.vocab.size());
  return ds;
}

nlohmann::json PretrainLog::to_json() const {
  nlohmann::json j{{"pretrained", pretrained}};
  if (!pretrained) j["marker"] = "no-pretrain";
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    j["stages"].push_back(
        {{"stage", s.stage}, {"epoch_loss", s.epoch_loss}, {"step_loss", s.step_loss}, {"empty_batches", s.empty_batches}});
  }
  return j;
}

PretrainLog cmd_pretrain(const RunConfig& config, std::uint64_t seed, const RunDir& dir) {
  dir.prepare(config, seed);
  const EpisodeDataset ds = load_run_dataset(config, dir);
  ToyEncoder enc(config.encoder, stream_seed(seed, Stream::kEncoderInit));
  PretrainLog log;
  if (!config.toggles.supcon) {
    spdlog::info("pretrain: supcon off, writing the random initialization");
    enc.params().save(dir.checkpoint("pretrained"));
    write_json(dir.report("pretrain.json"), log.to_json());
    return log;
  }
  log.pretrained = true;
  const FrameSet frames = gather_frames(ds, true);
  const std::size_t n = frames.labels.size();
  const auto stages = config.stages();
  const auto epochs = config.stage_epochs();
  const std::size_t total_steps =
      std::accumulate(epochs.begin(), epochs.end(), std::size_t{0}) * batches_per_epoch(n, config.batch_size);
  SamplerConfig sampler = config.sampler;
  sampler.alpha = config.loss.alpha_feat;

  const std::uint64_t stream = stream_seed(seed, Stream::kPretrain);
  Rng order(stream);
  AdamW opt(config.pretrain_optimizer);
  std::size_t step = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    PretrainLog::StageLog stage_log{stages[s].name(), {}, {}, {}};
    for (std::size_t epoch = 0; epoch < epochs[s]; ++epoch) {
      std::vector<double> losses;
      std::size_t empty = 0;
      for (const auto& idx : epoch_batches(n, config.batch_size, order)) {
        const std::uint64_t step_seed = derive_seed(stream, step);
        const double lr = cosine_learning_rate(config.pretrain_optimizer, step, total_steps);
        ++step;
        std::vector<MultiLabel> labels;
        for (std::size_t i : idx) labels.push_back(frames.labels[i]);
        Tape tape;
        const Bindings b(tape, enc.params());
        const Var z = enc.project_normalize(b, enc.encode(b, tape.constant(take_rows(frames.obs, idx))));
        std::optional<Var> loss;
        if (config.toggles.feature_mixup) {
          const PairSet pairs = select_pairs(z.value(), labels, ds.vocab, stages[s], sampler, step_seed);
          if (pairs.active_count() > 0) loss = supcon_mix_loss(z, pairs, config.loss.tau);
        }
        if (!config.toggles.feature_mixup || config.loss.sum_contrastive) {
          try {
            const Var full = supcon_stage_loss(z, labels, ds.vocab, stages[s], config.loss.tau);
            loss = loss ? ops::add(*loss, full) : full;
          } catch (const EmptyBatchError&) {
          }
        }
        if (!loss) {
          ++empty;
          continue;
        }
        losses.push_back(loss->value().item());
        opt.step(enc.params(), b.gradients(tape.backward(*loss)), lr);
      }
      if (losses.empty()) {
        throw EmptyBatchError("stage " + stages[s].name() + " epoch " + std::to_string(epoch) +
                              ": no batch had an anchor with a positive; the stage labels are too fine for "
                              "batch size " + std::to_string(config.batch_size) + " or the split is too small");
      }
      stage_log.step_loss.insert(stage_log.step_loss.end(), losses.begin(), losses.end());
      stage_log.epoch_loss.push_back(mean_of(losses));
      stage_log.empty_batches.push_back(empty);
      spdlog::info("pretrain {} epoch {}: loss {:.4f} ({} empty batches)", stage_log.stage, epoch,
                   stage_log.epoch_loss.back(), empty);
    }
    log.stages.push_back(std::move(stage_log));
  }
  enc.params().save(dir.checkpoint("pretrained"));
  write_json(dir.report("pretrain.json"), log.to_json());
  return log;
}

nlohmann::json DistillLog::to_json() const {
  return {{"teacher_epoch_loss", teacher_epoch_loss},
          {"student_epoch_loss", student_epoch_loss},
          {"teacher_entropy", teacher_entropy}};
}

DistillLog cmd_distill(const RunConfig& config, std::uint64_t seed, const RunDir& dir) {
  dir.prepare(config, seed);
  const EpisodeDataset ds = load_run_dataset(config, dir);
  const ParameterSet pretrained = ParameterSet::load(dir.checkpoint("pretrained"));
  const FrameSet frames = gather_frames(ds, true);
  const std::size_t n = frames.labels.size();
  DistillLog log;

  ToyEncoder teacher(config.encoder, stream_seed(seed, Stream::kTeacherInit));
  if (config.teacher_from_pretrained) teacher.params().assign(pretrained);

  auto mix = [&](const std::vector<std::size_t>& idx, Rng& rng) {
    const Tensor x = take_rows(frames.obs, idx);
    const Tensor y = take_rows(frames.targets, idx);
    if (!config.toggles.input_mixup) return MixedBatch{x, y, 1.0, {}};
    return input_mixup(x, y, config.loss.alpha_input, rng);
  };

  {
    Rng rng(stream_seed(seed, Stream::kTeacher));
    AdamW opt(config.finetune_optimizer);
    const std::size_t total = config.teacher_epochs * batches_per_epoch(n, config.batch_size);
    for (std::size_t epoch = 0; epoch < config.teacher_epochs; ++epoch) {
      std::vector<double> losses;
      for (const auto& idx : epoch_batches(n, config.batch_size, rng)) {
        const MixedBatch batch = mix(idx, rng);
        Tape tape;
        const Bindings b(tape, teacher.params());
        const Var p = ops::sigmoid(teacher.classify(b, teacher.encode(b, tape.constant(batch.x))));
        const Var loss = bce_multilabel(p, batch.y);
        losses.push_back(loss.value().item());
        opt.step(teacher.params(), b.gradients(tape.backward(loss)),
                 cosine_learning_rate(config.finetune_optimizer, opt.steps(), total));
      }
      log.teacher_epoch_loss.push_back(mean_of(losses));
      spdlog::info("teacher epoch {}: bce {:.4f}", epoch, log.teacher_epoch_loss.back());
    }
  }
  teacher.params().save(dir.checkpoint("teacher"));
  const std::string teacher_bytes = teacher.params().to_bytes();

  ToyEncoder student(config.encoder, 0);
  student.params().assign(pretrained);
  {
    Rng rng(stream_seed(seed, Stream::kStudent));
    AdamW opt(config.finetune_optimizer);
    const std::size_t total = config.student_epochs * batches_per_epoch(n, config.batch_size);
    for (std::size_t epoch = 0; epoch < config.student_epochs; ++epoch) {
      std::vector<double> losses;
      for (const auto& idx : epoch_batches(n, config.batch_size, rng)) {
        const MixedBatch batch = mix(idx, rng);
        const Tensor soft = teacher.probabilities(batch.x);
        Tape tape;
        const Bindings b(tape, student.params());
        const Var p = ops::sigmoid(student.classify(b, student.encode(b, tape.constant(batch.x))));
        Var loss = soft_distill_loss(p, soft);
        if (config.loss.hard_label_weight > 0.0) {
          loss = ops::add(loss, ops::scale(bce_multilabel(p, batch.y), config.loss.hard_label_weight));
        }
        losses.push_back(loss.value().item());
        opt.step(student.params(), b.gradients(tape.backward(loss)),
                 cosine_learning_rate(config.finetune_optimizer, opt.steps(), total));
      }
      log.student_epoch_loss.push_back(mean_of(losses));
      spdlog::info("student epoch {}: loss {:.4f}", epoch, log.student_epoch_loss.back());
    }
  }
  if (teacher.params().to_bytes() != teacher_bytes) throw IntegrityError("teacher parameters changed during distillation");
  log.teacher_entropy = binary_entropy_mean(teacher.probabilities(frames.obs));
  student.params().save(dir.checkpoint("student"));
  write_json(dir.report("distill.json"), log.to_json());
  return log;
}

nlohmann::json TemporalLog::to_json() const {
  return {{"trained", trained}, {"epoch_loss", epoch_loss}, {"gamma", gamma}, {"beta", beta}};
}

std::vector<Window> training_windows(std::size_t frames, std::size_t window, std::size_t hop) {
  if (window == 0 || hop == 0) throw ConfigError("window and hop must be positive");
  if (hop > window) throw ConfigError("hop longer than the window skips frames");
  if (frames <= window) return {{0, 0, frames}};
  std::vector<Window> out;
  std::size_t start = 0;
  for (; start + window <= frames; start += hop) out.push_back({0, start, window});
  if (out.back().start + window != frames) out.push_back({0, frames - window, window});
  return out;
}

std::vector<Window> evaluation_windows(std::size_t frames, std::size_t window) {
  if (window == 0) throw ConfigError("window must be positive");
  std::vector<Window> out;
  for (std::size_t start = 0; start < frames; start += window) {
    out.push_back({0, start, std::min(window, frames - start)});
  }
  return out;
}

TemporalLog cmd_train_temporal(const RunConfig& config, std::uint64_t seed, const RunDir& dir) {
  dir.prepare(config, seed);
  TemporalLog log;
  if (!config.toggles.temporal()) {
    spdlog::info("train-temporal: both fusion toggles off, evaluation stays frame-level");
    write_json(dir.report("temporal.json"), log.to_json());
    return log;
  }
  const EpisodeDataset ds = load_run_dataset(config, dir);
  const ToyEncoder student = load_encoder(config, dir, "student");
  const std::string backbone_bytes = student.params().to_bytes();

  std::vector<Tensor> features, targets;
  std::vector<Window> windows;
  for (std::size_t e = 0; e < ds.train_episodes; ++e) {
    const Episode& ep = ds.episodes[e];
    features.push_back(student.features(ep.observations));
    targets.push_back(label_targets(ep.labels, ds.vocab.size()));
    for (Window w : training_windows(ep.labels.size(), config.temporal.window, config.temporal.hop)) {
      w.episode = e;
      windows.push_back(w);
    }
  }

  MrttModel model(mrtt_config(config), stream_seed(seed, Stream::kTemporalInit));
  const auto frozen = model.frozen_names();
  Rng rng(stream_seed(seed, Stream::kTemporal));
  AdamW opt(config.temporal.optimizer);
  const std::size_t bs = config.temporal.batch_size;
  const std::size_t per_epoch = (windows.size() + bs - 1) / bs;
  const std::size_t total = per_epoch * config.temporal.epochs;
  log.trained = true;
  for (std::size_t epoch = 0; epoch < config.temporal.epochs; ++epoch) {
    const auto perm = rng.permutation(windows.size());
    std::vector<double> losses;
    for (std::size_t lo = 0; lo < perm.size(); lo += bs) {
      std::vector<Window> chosen;
      for (std::size_t i = lo; i < std::min(perm.size(), lo + bs); ++i) chosen.push_back(windows[perm[i]]);
      const WindowBatch batch = stack_windows(chosen, features, targets, config.temporal.window);
      Tape tape;
      const Bindings b(tape, model.params(), frozen);
      const MrttOutput out = model.forward(b, tape.constant(batch.e), batch.mask, &rng, true);
      Var loss = bce_multilabel(ops::sigmoid(out.final_logits), batch.targets, batch.mask);
      if (config.temporal.pathway_loss) {
        for (const Var& z : out.pathways) {
          const Var aux = bce_multilabel(ops::sigmoid(z), batch.targets, batch.mask);
          loss = ops::add(loss, ops::scale(aux, 1.0 / static_cast<double>(out.pathways.size())));
        }
      }
      losses.push_back(loss.value().item());
      opt.step(model.params(), b.gradients(tape.backward(loss)),
               cosine_learning_rate(config.temporal.optimizer, opt.steps(), total));
    }
    log.epoch_loss.push_back(mean_of(losses));
    log.gamma.push_back(model.gamma());
    log.beta.push_back(model.beta());
    spdlog::info("temporal epoch {}: loss {:.4f}, beta {:.3f}", epoch, log.epoch_loss.back(), log.beta.back());
  }
  if (student.params().to_bytes() != backbone_bytes) throw IntegrityError("backbone changed during temporal training");
  model.params().save(dir.checkpoint("mrtt"));
  write_json(dir.report("temporal.json"), log.to_json());
  return log;
}

std::string eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kFull: return "full";
    case EvalMode::kSpatialOnly: return "spatial";
    case EvalMode::kFrameLevel: return "frame";
    case EvalMode::kTeacher: return "teacher";
    case EvalMode::kOracle: return "oracle";
  }
  return "full";
}

EvalMode parse_eval_mode(const std::string& name) {
  for (EvalMode m : {EvalMode::kFull, EvalMode::kSpatialOnly, EvalMode::kFrameLevel, EvalMode::kTeacher,
                     EvalMode::kOracle}) {
    if (eval_mode_name(m) == name) return m;
  }
  throw ConfigError("unknown evaluation mode '" + name + "'");
}

Tensor predict_split(const RunConfig& config, const RunDir& dir, const EpisodeDataset& ds, const EvalOptions& options) {
  const auto [lo, hi] = split_range(ds, options.train_split);
  const std::size_t classes = ds.vocab.size();
  std::vector<double> scores;
  EvalMode mode = options.mode;
  if (mode == EvalMode::kFull && !config.toggles.temporal()) mode = EvalMode::kFrameLevel;
  if (mode == EvalMode::kSpatialOnly && !config.toggles.beta) {
    throw ConfigError("spatial-only evaluation needs the beta toggle; the spatial head is not trained without it");
  }

  if (mode == EvalMode::kOracle) {
    for (std::size_t e = lo; e < hi; ++e) {
      const Tensor t = label_targets(ds.episodes[e].labels, classes);
      scores.insert(scores.end(), t.data().begin(), t.data().end());
    }
  } else if (mode == EvalMode::kFrameLevel || mode == EvalMode::kTeacher) {
    const ToyEncoder enc = load_encoder(config, dir, mode == EvalMode::kTeacher ? "teacher" : "student");
    for (std::size_t e = lo; e < hi; ++e) {
      const Tensor p = enc.probabilities(ds.episodes[e].observations);
      scores.insert(scores.end(), p.data().begin(), p.data().end());
    }
  } else {
    const ToyEncoder student = load_encoder(config, dir, "student");
    MrttModel model(mrtt_config(config), 0);
    model.params().assign(ParameterSet::load(dir.checkpoint("mrtt")));
    const std::size_t width = config.temporal.window;
    for (std::size_t e = lo; e < hi; ++e) {
      const Episode& ep = ds.episodes[e];
      const std::vector<Tensor> features{student.features(ep.observations)};
      const std::vector<Tensor> targets{label_targets(ep.labels, classes)};
      const auto windows = evaluation_windows(ep.labels.size(), width);
      const WindowBatch batch = stack_windows(windows, features, targets, width);
      const Tensor p = model.probabilities(batch.e, batch.mask, mode == EvalMode::kSpatialOnly);
      for (std::size_t b = 0; b < windows.size(); ++b) {
        const auto first = p.data().begin() + static_cast<std::ptrdiff_t>(b * width * classes);
        scores.insert(scores.end(), first, first + static_cast<std::ptrdiff_t>(windows[b].length * classes));
      }
    }
  }
  const std::size_t frames = scores.size() / classes;
  return Tensor(Shape{frames, classes}, std::move(scores));
}

namespace {

void write_plots(const RunDir& dir, const EvalReport& report, const std::string& tag,
                 const std::vector<std::size_t>& strides) {
  std::vector<std::string> names;
  std::vector<double> means;
  for (MetricFamily f : kAllFamilies) {
    names.emplace_back(family_name(f));
    means.push_back(report.mean(f));
  }
  write_text(dir.plots() / ("ap_" + tag + ".svg"), plot::bar_chart("mean AP per family (" + tag + ")", names, means));

  if (auto j = read_json_if_present(dir.report("pretrain.json")); j && (*j)["pretrained"].get<bool>()) {
    std::vector<plot::Series> series;
    for (const auto& s : (*j)["stages"]) series.push_back({s["stage"].get<std::string>(), s["step_loss"]});
    write_text(dir.plots() / "loss_pretrain.svg", plot::line_chart("contrastive loss per step", "step", series));
  }
  if (auto j = read_json_if_present(dir.report("distill.json"))) {
    write_text(dir.plots() / "loss_distill.svg",
               plot::line_chart("fine-tuning loss", "epoch",
                                {{"teacher", (*j)["teacher_epoch_loss"]}, {"student", (*j)["student_epoch_loss"]}}));
  }
  if (auto j = read_json_if_present(dir.report("temporal.json")); j && (*j)["trained"].get<bool>()) {
    write_text(dir.plots() / "loss_temporal.svg",
               plot::line_chart("temporal loss", "epoch", {{"bce", (*j)["epoch_loss"]}}));
    const auto gammas = (*j)["gamma"].get<std::vector<std::vector<double>>>();
    std::vector<plot::Series> series;
    for (std::size_t k = 0; !gammas.empty() && k < gammas.front().size(); ++k) {
      plot::Series s{"gamma k=" + (k < strides.size() ? std::to_string(strides[k]) : std::to_string(k)), {}};
      for (const auto& g : gammas) s.values.push_back(g[k]);
      series.push_back(std::move(s));
    }
    series.push_back({"beta", (*j)["beta"].get<std::vector<double>>()});
    write_text(dir.plots() / "fusion.svg", plot::line_chart("fusion weights", "epoch", series));
  }
}

}  // namespace

EvalReport cmd_evaluate(const RunConfig& config, std::uint64_t seed, const RunDir& dir, const EvalOptions& options) {
  dir.prepare(config, seed);
  const EpisodeDataset ds = load_run_dataset(config, dir);
  const Tensor scores = predict_split(config, dir, ds, options);
  const auto [lo, hi] = split_range(ds, options.train_split);
  std::vector<MultiLabel> labels;
  for (std::size_t e = lo; e < hi; ++e) labels.insert(labels.end(), ds.episodes[e].labels.begin(), ds.episodes[e].labels.end());
  const EvalReport report = evaluate(scores, LabelMatrix::from_labels(labels, ds.vocab.size()), ds.vocab);

  std::string tag = options.train_split ? "train" : "val";
  if (options.mode != EvalMode::kFull) tag += "_" + eval_mode_name(options.mode);
  nlohmann::json j = report.to_json();
  j["split"] = options.train_split ? "train" : "val";
  j["mode"] = eval_mode_name(options.mode);
  write_json(dir.report("eval_" + tag + ".json"), j);
  write_text(dir.report("eval_" + tag + ".csv"), report.to_csv());
  write_plots(dir, report, tag, config.temporal.pathway.strides);
  spdlog::info("evaluate {}: AP_IVT {:.4f}", tag, report.mean(MetricFamily::kIVT));
  return report;
}

RunSummary cmd_run(const RunConfig& config, std::uint64_t seed, const RunDir& dir) {
  cmd_gen_data(config, seed, dir);
  cmd_pretrain(config, seed, dir);
  cmd_distill(config, seed, dir);
  cmd_train_temporal(config, seed, dir);
  RunSummary s;
  s.train = cmd_evaluate(config, seed, dir, {true, EvalMode::kFull});
  s.val = cmd_evaluate(config, seed, dir, {false, EvalMode::kFull});
  return s;
}

}  // namespace tripcon
