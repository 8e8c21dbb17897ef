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

#pragma once

// Stage commands of the training recipe. Every command reads and writes a run
// directory:
//
//   config.lock            resolved config and seed (written by every command)
//   data/                  dataset.bin, manifest.json
//   checkpoints/           pretrained, teacher, student, mrtt (.ckpt)
//   reports/               per-stage logs and evaluation reports
//   plots/                 SVG curves and bar charts
//
// All randomness is derived from the run seed, so (config, seed) fixes every
// byte under the run directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/config.hpp"
#include "tripcon/datagen.hpp"
#include "tripcon/encoder.hpp"
#include "tripcon/metrics.hpp"
#include "tripcon/mrtt.hpp"

namespace tripcon {

class RunDir {
 public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path config_lock() const { return root_ / "config.lock"; }
  std::filesystem::path data() const { return root_ / "data"; }
  std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
  std::filesystem::path reports() const { return root_ / "reports"; }
  std::filesystem::path plots() const { return root_ / "plots"; }
  std::filesystem::path checkpoint(const std::string& name) const { return checkpoints() / (name + ".ckpt"); }
  std::filesystem::path report(const std::string& name) const { return reports() / name; }

  // Creates the layout and writes config.lock; throws ConfigError when the
  // directory already holds a lock for a different config or seed.
  void prepare(const RunConfig& config, std::uint64_t seed) const;

 private:
  std::filesystem::path root_;
};

// Independent random streams of one run.
enum class Stream : std::uint64_t {
  kData = 1,
  kEncoderInit,
  kPretrain,
  kTeacherInit,
  kTeacher,
  kStudent,
  kTemporalInit,
  kTemporal,
};
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

// Dataset at config.dataset, else <out>/data/dataset.bin.
EpisodeDataset load_run_dataset(const RunConfig& config, const RunDir& dir);

EpisodeDataset cmd_gen_data(const RunConfig& config, std::uint64_t seed, const RunDir& dir);

struct PretrainLog {
  bool pretrained = false;
  struct StageLog {
    std::string stage;
    std::vector<double> step_loss;
    std::vector<double> epoch_loss;
    std::vector<std::size_t> empty_batches;  // per epoch
  };
  std::vector<StageLog> stages;
  nlohmann::json to_json() const;
};

// Writes checkpoints/pretrained.ckpt and reports/pretrain.json. With supcon
// off the random initialization is written with a "no-pretrain" marker.
PretrainLog cmd_pretrain(const RunConfig& config, std::uint64_t seed, const RunDir& dir);

struct DistillLog {
  std::vector<double> teacher_epoch_loss;
  std::vector<double> student_epoch_loss;
  double teacher_entropy = 0.0;  // mean binary entropy of the final soft targets
  nlohmann::json to_json() const;
};

// Writes checkpoints/teacher.ckpt and checkpoints/student.ckpt and
// reports/distill.json. Throws CheckpointError when pretrained.ckpt does not
// fit the configured encoder, IntegrityError if the teacher changes while the
// student trains.
DistillLog cmd_distill(const RunConfig& config, std::uint64_t seed, const RunDir& dir);

struct TemporalLog {
  bool trained = false;
  std::vector<double> epoch_loss;
  std::vector<std::vector<double>> gamma;  // per epoch, after the update
  std::vector<double> beta;
  nlohmann::json to_json() const;
};

// Fixed-length windows over an episode: starts every `hop` frames plus one
// aligned to the end; episodes shorter than the window give one padded window.
// Requires hop <= window.
struct Window {
  std::size_t episode = 0;
  std::size_t start = 0;
  std::size_t length = 0;  // valid frames
};
std::vector<Window> training_windows(std::size_t frames, std::size_t window, std::size_t hop);
// Non-overlapping cover, last window padded.
std::vector<Window> evaluation_windows(std::size_t frames, std::size_t window);

// Writes checkpoints/mrtt.ckpt and reports/temporal.json. With both fusion
// toggles off nothing is trained and the log says so.
TemporalLog cmd_train_temporal(const RunConfig& config, std::uint64_t seed, const RunDir& dir);

enum class EvalMode {
  kFull,         // MRTT when trained, else the frame-level student
  kSpatialOnly,  // sigmoid(Z_spat) of the MRTT (beta forced to 1)
  kFrameLevel,   // student probabilities per frame
  kTeacher,      // teacher probabilities per frame
  kOracle,       // ground truth as predictions
};
std::string eval_mode_name(EvalMode mode);
EvalMode parse_eval_mode(const std::string& name);

struct EvalOptions {
  bool train_split = false;
  EvalMode mode = EvalMode::kFull;
};

// Per-frame probabilities for one split, in episode order.
Tensor predict_split(const RunConfig& config, const RunDir& dir, const EpisodeDataset& ds, const EvalOptions& options);

// Writes reports/eval_<split>[_<mode>].json and .csv plus SVG plots of the
// available training logs and the per-family AP.
EvalReport cmd_evaluate(const RunConfig& config, std::uint64_t seed, const RunDir& dir, const EvalOptions& options);

// gen-data, pretrain, distill, train-temporal, then evaluation of both splits.
struct RunSummary {
  EvalReport train;
  EvalReport val;
};
RunSummary cmd_run(const RunConfig& config, std::uint64_t seed, const RunDir& dir);

// Sweep definition:
//   {"kind": "toggles" | "curriculum_order" | "mixup_alpha" | "strides",
//    "seeds": [...], optional "rows": [...]}
// Rows default to the standard grid of each kind. Each row and seed runs in
// its own sub-directory with the same seed across rows.
struct AblationRow {
  std::string label;
  RunConfig config;
  std::vector<double> val_ap_ivt;  // one per seed
  double mean = 0.0;
  double sd = 0.0;
};
struct AblationResult {
  std::string kind;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;
  std::string to_csv() const;
  std::string to_markdown() const;
};
std::vector<AblationRow> ablation_rows(const RunConfig& base, const nlohmann::json& sweep);
AblationResult cmd_ablate(const RunConfig& config, const nlohmann::json& sweep, const RunDir& dir);

}  // namespace tripcon
