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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tripcon/errors.hpp"
#include "tripcon/losses.hpp"

namespace tripcon {
namespace {

namespace fs = std::filesystem;

RunConfig tiny_config() {
  RunConfig c = RunConfig::desk();
  c.data.instruments = 2;
  c.data.verbs = 2;
  c.data.targets = 2;
  c.data.classes = 6;
  c.data.obs_dim = 8;
  c.data.episodes = 8;
  c.data.val_episodes = 2;
  c.data.episode_length = 24;
  c.encoder.input_dim = 8;
  c.encoder.hidden = {16};
  c.encoder.feature_dim = 8;
  c.encoder.projection_dim = 4;
  c.encoder.classes = 6;
  c.teacher_epochs = 2;
  c.student_epochs = 2;
  c.batch_size = 32;
  c.temporal.pathway.strides = {2, 3};
  c.temporal.pathway.layers = 1;
  c.temporal.pathway.heads = 2;
  c.temporal.pathway.ff_width = 8;
  c.temporal.window = 12;
  c.temporal.hop = 6;
  c.temporal.epochs = 2;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tripcon_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) out[fs::relative(entry.path(), root).string()] = slurp(entry.path());
  }
  return out;
}

TEST(ConfigTest, JsonRoundTripAndUnknownKeys) {
  RunConfig c = tiny_config();
  c.toggles.gamma = false;
  c.curriculum = {"V", "VT", "IVT"};
  c.dataset = "/tmp/some.bin";
  const nlohmann::json j = c;
  RunConfig back = RunConfig::desk();
  from_json(j, back);
  EXPECT_EQ(nlohmann::json(back), j);
  RunConfig d = RunConfig::desk();
  EXPECT_THROW(from_json(nlohmann::json{{"toggle", {}}}, d), ConfigError);
}

TEST(ConfigTest, ToggleAndShapeDependencies) {
  RunConfig c = tiny_config();
  c.toggles.supcon = false;
  c.toggles.feature_mixup = false;
  EXPECT_THROW(c.validate(), ConfigError);  // curriculum without supcon
  c.toggles.curriculum = false;
  EXPECT_NO_THROW(c.validate());

  RunConfig w = tiny_config();
  w.temporal.window = 2;  // shorter than stride 3
  EXPECT_THROW(w.validate(), ConfigError);
  w.toggles.gamma = w.toggles.beta = false;  // no temporal model, no constraint
  EXPECT_NO_THROW(w.validate());
  w = tiny_config();
  w.temporal.hop = w.temporal.window + 1;
  EXPECT_THROW(w.validate(), ConfigError);

  RunConfig e = tiny_config();
  e.teacher_epochs = 0;
  EXPECT_THROW(e.validate(), ConfigError);
  e = tiny_config();
  e.curriculum = {"T", "X"};
  EXPECT_THROW(e.validate(), ConfigError);
}

TEST(ConfigTest, StageScheduleSplitsTheEpochBudget) {
  RunConfig c = tiny_config();
  EXPECT_EQ(c.stage_epochs(), (std::vector<std::size_t>{1, 1, 1}));
  c.pretrain_epochs = 5;
  EXPECT_EQ(c.stage_epochs(), (std::vector<std::size_t>{1, 2, 2}));
  c.toggles.curriculum = false;
  ASSERT_EQ(c.stages().size(), 1u);
  EXPECT_EQ(c.stages()[0], kStageS3);
  EXPECT_EQ(c.stage_epochs(), std::vector<std::size_t>{5});
}

TEST(WindowTest, TrainingWindowsCoverEveryFrame) {
  for (std::size_t frames = 1; frames <= 70; ++frames) {
    for (std::size_t window : {4, 12, 32}) {
      for (std::size_t hop : {1, 4, 5, 8}) {
        if (hop > window) {
          EXPECT_THROW(training_windows(frames, window, hop), ConfigError);
          continue;
        }
        const auto ws = training_windows(frames, window, hop);
        std::vector<int> covered(frames, 0);
        for (const auto& w : ws) {
          EXPECT_LE(w.start + w.length, frames);
          EXPECT_EQ(w.length, std::min(window, frames));
          for (std::size_t t = 0; t < w.length; ++t) covered[w.start + t] = 1;
        }
        for (int c : covered) EXPECT_EQ(c, 1);
        EXPECT_EQ(ws.back().start + ws.back().length, frames);
      }
    }
  }
}

TEST(WindowTest, EvaluationWindowsPartitionTheEpisode) {
  for (std::size_t frames = 1; frames <= 70; ++frames) {
    const auto ws = evaluation_windows(frames, 12);
    std::size_t next = 0;
    for (const auto& w : ws) {
      EXPECT_EQ(w.start, next);
      next += w.length;
    }
    EXPECT_EQ(next, frames);
  }
}

TEST(PipelineTest, SameSeedGivesByteIdenticalRuns) {
  const RunConfig c = tiny_config();
  const RunDir a(fresh_dir("det_a")), b(fresh_dir("det_b"));
  cmd_run(c, 7, a);
  cmd_run(c, 7, b);
  const auto ta = tree_bytes(a.root());
  const auto tb = tree_bytes(b.root());
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("checkpoints/mrtt.ckpt"));
  EXPECT_TRUE(ta.count("reports/eval_val.json"));
  EXPECT_TRUE(ta.count("plots/fusion.svg"));

  const RunDir other(fresh_dir("det_c"));
  cmd_run(c, 8, other);
  EXPECT_NE(slurp(a.checkpoint("student")), slurp(other.checkpoint("student")));
}

TEST(PipelineTest, LockRejectsADifferentConfig) {
  const RunDir dir(fresh_dir("lock"));
  const RunConfig c = tiny_config();
  cmd_gen_data(c, 1, dir);
  EXPECT_NO_THROW(cmd_gen_data(c, 1, dir));
  EXPECT_THROW(cmd_gen_data(c, 2, dir), ConfigError);
  RunConfig d = c;
  d.teacher_epochs = 3;
  EXPECT_THROW(cmd_pretrain(d, 1, dir), ConfigError);
}

TEST(PipelineTest, MissingArtifactsAreReported) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("missing"));
  EXPECT_THROW(cmd_pretrain(c, 1, dir), IoError);
  cmd_gen_data(c, 1, dir);
  EXPECT_THROW(cmd_distill(c, 1, dir), IoError);
}

TEST(PipelineTest, IncompatibleCheckpointIsRejected) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("incompatible"));
  cmd_gen_data(c, 1, dir);
  EncoderConfig wide = c.encoder;
  wide.hidden = {17};
  ToyEncoder(wide, 1).params().save(dir.checkpoint("pretrained"));
  EXPECT_THROW(cmd_distill(c, 1, dir), CheckpointError);
}

TEST(PipelineTest, NoPretrainWritesTheMarkedInitialization) {
  RunConfig c = tiny_config();
  c.toggles = Toggles{false, false, false, false, false, false};
  const RunDir dir(fresh_dir("nopretrain"));
  cmd_gen_data(c, 3, dir);
  const PretrainLog log = cmd_pretrain(c, 3, dir);
  EXPECT_FALSE(log.pretrained);
  const auto j = nlohmann::json::parse(slurp(dir.report("pretrain.json")));
  EXPECT_EQ(j["marker"], "no-pretrain");
  EXPECT_EQ(ParameterSet::load(dir.checkpoint("pretrained")),
            ToyEncoder(c.encoder, stream_seed(3, Stream::kEncoderInit)).params());
}

TEST(PipelineTest, CurriculumOffRunsOneFineStage) {
  RunConfig c = tiny_config();
  c.toggles.curriculum = false;
  c.pretrain_epochs = 2;
  const RunDir dir(fresh_dir("nocurriculum"));
  cmd_gen_data(c, 3, dir);
  const PretrainLog log = cmd_pretrain(c, 3, dir);
  ASSERT_EQ(log.stages.size(), 1u);
  EXPECT_EQ(log.stages[0].stage, "IVT");
  EXPECT_EQ(log.stages[0].epoch_loss.size(), 2u);
}

TEST(PipelineTest, FrozenTeacherAndFrozenBackbone) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("frozen"));
  cmd_gen_data(c, 5, dir);
  cmd_pretrain(c, 5, dir);
  const DistillLog log = cmd_distill(c, 5, dir);
  const std::string teacher = slurp(dir.checkpoint("teacher"));
  const std::string student = slurp(dir.checkpoint("student"));
  EXPECT_NE(student, slurp(dir.checkpoint("pretrained")));
  cmd_train_temporal(c, 5, dir);
  cmd_evaluate(c, 5, dir, {false, EvalMode::kFull});
  EXPECT_EQ(slurp(dir.checkpoint("teacher")), teacher);
  EXPECT_EQ(slurp(dir.checkpoint("student")), student);

  // Cross-entropy against the teacher is bounded below by its entropy.
  const EpisodeDataset ds = load_run_dataset(c, dir);
  ToyEncoder t(c.encoder, 0), s(c.encoder, 0);
  t.params().assign(ParameterSet::load(dir.checkpoint("teacher")));
  s.params().assign(ParameterSet::load(dir.checkpoint("student")));
  const Tensor& obs = ds.episodes[0].observations;
  Tape tape(false);
  const double cross = soft_distill_loss(tape.constant(s.probabilities(obs)), t.probabilities(obs)).value().item();
  const double self = soft_distill_loss(tape.constant(t.probabilities(obs)), t.probabilities(obs)).value().item();
  EXPECT_GE(cross, self - 1e-12);
  EXPECT_GT(log.teacher_entropy, 0.0);
}

TEST(PipelineTest, FusionWeightsStayOnTheSimplex) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("simplex"));
  cmd_gen_data(c, 9, dir);
  cmd_pretrain(c, 9, dir);
  cmd_distill(c, 9, dir);
  const TemporalLog log = cmd_train_temporal(c, 9, dir);
  ASSERT_EQ(log.gamma.size(), c.temporal.epochs);
  for (std::size_t e = 0; e < log.gamma.size(); ++e) {
    double total = 0.0;
    for (double g : log.gamma[e]) {
      EXPECT_GT(g, 0.0);
      total += g;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GT(log.beta[e], 0.0);
    EXPECT_LT(log.beta[e], 1.0);
  }
}

TEST(PipelineTest, OracleScoresArePerfect) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("oracle"));
  cmd_gen_data(c, 2, dir);
  const EvalReport r = cmd_evaluate(c, 2, dir, {true, EvalMode::kOracle});
  for (const auto& f : r.families) {
    for (double ap : f.ap) {
      if (std::isfinite(ap)) EXPECT_EQ(ap, 1.0);
    }
  }
  EXPECT_TRUE(fs::exists(dir.report("eval_train_oracle.json")));
  EXPECT_TRUE(fs::exists(dir.report("eval_train_oracle.csv")));
}

// Every combination of the six toggles that passes validation runs through
// and yields a comparable report.
class ToggleGridTest : public ::testing::TestWithParam<int> {};

TEST_P(ToggleGridTest, RunsToCompletion) {
  const int bits = GetParam();
  RunConfig c = tiny_config();
  c.toggles = Toggles{bool(bits & 1), bool(bits & 2), bool(bits & 4), bool(bits & 8), bool(bits & 16), bool(bits & 32)};
  if ((c.toggles.curriculum || c.toggles.feature_mixup) && !c.toggles.supcon) {
    EXPECT_THROW(c.validate(), ConfigError);
    return;
  }
  const RunDir dir(fresh_dir("grid" + std::to_string(bits)));
  const RunSummary s = cmd_run(c, 11, dir);
  EXPECT_TRUE(std::isfinite(s.val.mean(MetricFamily::kIVT)));
  EXPECT_EQ(fs::exists(dir.checkpoint("mrtt")), c.toggles.temporal());
  if (c.toggles.beta) {
    EXPECT_NO_THROW(cmd_evaluate(c, 11, dir, {false, EvalMode::kSpatialOnly}));
  } else {
    EXPECT_THROW(cmd_evaluate(c, 11, dir, {false, EvalMode::kSpatialOnly}), ConfigError);
  }
}

INSTANTIATE_TEST_SUITE_P(AllToggles, ToggleGridTest, ::testing::Range(0, 64));

TEST(AblationTest, DefaultGrids) {
  const RunConfig c = tiny_config();
  EXPECT_EQ(ablation_rows(c, {{"kind", "toggles"}}).size(), 8u);
  EXPECT_EQ(ablation_rows(c, {{"kind", "curriculum_order"}}).size(), 3u);
  EXPECT_EQ(ablation_rows(c, {{"kind", "mixup_alpha"}}).size(), 8u);
  const auto strides = ablation_rows(c, {{"kind", "strides"}});
  ASSERT_EQ(strides.size(), 2u);
  EXPECT_EQ(strides[0].config.temporal.pathway.strides, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_THROW(ablation_rows(c, {{"kind", "nope"}}), ConfigError);
  EXPECT_THROW(ablation_rows(c, nlohmann::json::array()), ConfigError);
}

TEST(AblationTest, SweepRunsWithSharedSeedsAndEmitsTables) {
  const RunConfig c = tiny_config();
  const RunDir dir(fresh_dir("ablate"));
  const nlohmann::json sweep{{"kind", "strides"}, {"seeds", {1, 2}}, {"rows", {{2, 3}, {3, 4}}}};
  const AblationResult r = cmd_ablate(c, sweep, dir);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) EXPECT_EQ(row.val_ap_ivt.size(), 2u);
  // Both rows see the same data for the same seed.
  EXPECT_EQ(slurp(dir.root() / "row0" / "seed1" / "data" / "dataset.bin"),
            slurp(dir.root() / "row1" / "seed1" / "data" / "dataset.bin"));
  EXPECT_TRUE(fs::exists(dir.report("ablation_strides.csv")));
  EXPECT_NE(slurp(dir.report("ablation_strides.md")).find("| {2,3} |"), std::string::npos);
  EXPECT_THROW(cmd_ablate(c, {{"kind", "strides"}}, dir), ConfigError);
}

TEST(AblationTest, ToggleTableHasOneColumnPerComponent) {
  AblationResult r;
  r.kind = "toggles";
  r.seeds = {1};
  r.rows = ablation_rows(tiny_config(), {{"kind", "toggles"}});
  const std::string md = r.to_markdown();
  EXPECT_NE(md.find("| SupCon | Curriculum | Input Mixup | Feature Mixup |"), std::string::npos);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "supcon,curriculum,input_mixup,feature_mixup,gamma,beta,seed_1,mean_ap_ivt,sd_ap_ivt");
  EXPECT_NE(csv.find("\n0,0,0,0,0,0,"), std::string::npos);
  EXPECT_NE(csv.find("\n1,1,1,1,1,1,"), std::string::npos);
}

#ifdef TRIPCON_CLI_PATH
int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(TRIPCON_CLI_PATH) + " -q " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST(CliTest, ErrorsAreJsonOnStderr) {
  const fs::path root = fresh_dir("cli");
  fs::create_directories(root);
  const fs::path err = root / "stderr.txt";
  EXPECT_NE(run_cli("pretrain --out " + (root / "run").string(), err), 0);
  auto j = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(j["kind"], "io");

  std::ofstream(root / "bad.json") << R"({"toggles": {"supcon": false}})";
  EXPECT_NE(run_cli("gen-data --config " + (root / "bad.json").string() + " --out " + (root / "run2").string(), err), 0);
  j = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(j["kind"], "config");

  EXPECT_NE(run_cli("gen-data", err), 0);
  j = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(j["kind"], "usage");
}

TEST(CliTest, GenDataWritesTheRunLayout) {
  const fs::path root = fresh_dir("cli_gen");
  EXPECT_EQ(run_cli("gen-data --seed 4 --out " + root.string(), root.string() + ".err"), 0);
  EXPECT_TRUE(fs::exists(root / "config.lock"));
  EXPECT_TRUE(fs::exists(root / "data" / "dataset.bin"));
  for (const char* sub : {"checkpoints", "reports", "plots"}) EXPECT_TRUE(fs::is_directory(root / sub));
}
#endif

}  // namespace
}  // namespace tripcon
