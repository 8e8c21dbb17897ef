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

#include "tripcon/config.hpp"

#include <algorithm>
#include <fstream>

#include "tripcon/errors.hpp"

namespace tripcon {

namespace {

nlohmann::json optimizer_json(const AdamWConfig& o) {
  return {{"learning_rate", o.learning_rate},
          {"final_learning_rate", o.final_learning_rate},
          {"weight_decay", o.weight_decay},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

AdamWConfig optimizer_from(const nlohmann::json& j, AdamWConfig o) {
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.final_learning_rate = j.value("final_learning_rate", o.final_learning_rate);
  o.weight_decay = j.value("weight_decay", o.weight_decay);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.epsilon = j.value("epsilon", o.epsilon);
  return o;
}

void check_optimizer(const AdamWConfig& o, const char* what) {
  if (!(o.learning_rate > 0.0) || !(o.final_learning_rate >= 0.0) || !(o.weight_decay >= 0.0)) {
    throw ConfigError(std::string(what) + ": learning rates must be positive and weight decay non-negative");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const Toggles& t) {
  j = {{"supcon", t.supcon},         {"curriculum", t.curriculum}, {"input_mixup", t.input_mixup},
       {"feature_mixup", t.feature_mixup}, {"gamma", t.gamma},   {"beta", t.beta}};
}

void from_json(const nlohmann::json& j, Toggles& t) {
  t.supcon = j.value("supcon", t.supcon);
  t.curriculum = j.value("curriculum", t.curriculum);
  t.input_mixup = j.value("input_mixup", t.input_mixup);
  t.feature_mixup = j.value("feature_mixup", t.feature_mixup);
  t.gamma = j.value("gamma", t.gamma);
  t.beta = j.value("beta", t.beta);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"data", c.data},
       {"encoder", c.encoder},
       {"curriculum", c.curriculum},
       {"pretrain_epochs", c.pretrain_epochs},
       {"teacher_epochs", c.teacher_epochs},
       {"student_epochs", c.student_epochs},
       {"batch_size", c.batch_size},
       {"teacher_from_pretrained", c.teacher_from_pretrained},
       {"pretrain_optimizer", optimizer_json(c.pretrain_optimizer)},
       {"finetune_optimizer", optimizer_json(c.finetune_optimizer)},
       {"loss",
        {{"tau", c.loss.tau},
         {"alpha_input", c.loss.alpha_input},
         {"alpha_feat", c.loss.alpha_feat},
         {"hard_label_weight", c.loss.hard_label_weight},
         {"sum_contrastive", c.loss.sum_contrastive}}},
       {"sampler",
        {{"hard_positives", c.sampler.hard_positives},
         {"hard_negatives", c.sampler.hard_negatives},
         {"sampled_negatives", c.sampler.sampled_negatives},
         {"synthetic_negatives", c.sampler.synthetic_negatives}}},
       {"temporal",
        {{"pathway", c.temporal.pathway},
         {"window", c.temporal.window},
         {"hop", c.temporal.hop},
         {"batch_size", c.temporal.batch_size},
         {"epochs", c.temporal.epochs},
         {"pathway_loss", c.temporal.pathway_loss},
         {"optimizer", optimizer_json(c.temporal.optimizer)}}},
       {"toggles", c.toggles}};
  if (c.dataset) j["dataset"] = c.dataset->string();
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  static const std::vector<std::string> known{
      "data",          "dataset",        "encoder",    "curriculum",         "pretrain_epochs",
      "teacher_epochs", "student_epochs", "batch_size", "teacher_from_pretrained", "pretrain_optimizer",
      "finetune_optimizer", "loss",      "sampler",    "temporal",           "toggles"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  if (j.contains("data")) c.data = j.at("data").get<SyntheticConfig>();
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  if (j.contains("encoder")) c.encoder = j.at("encoder").get<EncoderConfig>();
  c.curriculum = j.value("curriculum", c.curriculum);
  c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
  c.teacher_epochs = j.value("teacher_epochs", c.teacher_epochs);
  c.student_epochs = j.value("student_epochs", c.student_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.teacher_from_pretrained = j.value("teacher_from_pretrained", c.teacher_from_pretrained);
  if (j.contains("pretrain_optimizer")) c.pretrain_optimizer = optimizer_from(j["pretrain_optimizer"], c.pretrain_optimizer);
  if (j.contains("finetune_optimizer")) c.finetune_optimizer = optimizer_from(j["finetune_optimizer"], c.finetune_optimizer);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    c.loss.tau = l.value("tau", c.loss.tau);
    c.loss.alpha_input = l.value("alpha_input", c.loss.alpha_input);
    c.loss.alpha_feat = l.value("alpha_feat", c.loss.alpha_feat);
    c.loss.hard_label_weight = l.value("hard_label_weight", c.loss.hard_label_weight);
    c.loss.sum_contrastive = l.value("sum_contrastive", c.loss.sum_contrastive);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    c.sampler.hard_positives = s.value("hard_positives", c.sampler.hard_positives);
    c.sampler.hard_negatives = s.value("hard_negatives", c.sampler.hard_negatives);
    c.sampler.sampled_negatives = s.value("sampled_negatives", c.sampler.sampled_negatives);
    c.sampler.synthetic_negatives = s.value("synthetic_negatives", c.sampler.synthetic_negatives);
  }
  if (j.contains("temporal")) {
    const auto& t = j["temporal"];
    if (t.contains("pathway")) c.temporal.pathway = t["pathway"].get<PathwayConfig>();
    c.temporal.window = t.value("window", c.temporal.window);
    c.temporal.hop = t.value("hop", c.temporal.hop);
    c.temporal.batch_size = t.value("batch_size", c.temporal.batch_size);
    c.temporal.epochs = t.value("epochs", c.temporal.epochs);
    c.temporal.pathway_loss = t.value("pathway_loss", c.temporal.pathway_loss);
    if (t.contains("optimizer")) c.temporal.optimizer = optimizer_from(t["optimizer"], c.temporal.optimizer);
  }
  if (j.contains("toggles")) c.toggles = j.at("toggles").get<Toggles>();
}

void RunConfig::validate() const {
  data.validate();
  encoder.validate();
  loss.validate();
  if (toggles.curriculum && !toggles.supcon) throw ConfigError("the curriculum toggle requires supcon");
  if (toggles.feature_mixup && !toggles.supcon) throw ConfigError("feature mixup requires supcon");
  if (curriculum.empty()) throw ConfigError("curriculum needs at least one stage");
  for (const auto& s : curriculum) (void)Stage::parse(s);
  if (toggles.supcon && pretrain_epochs < stages().size()) {
    throw ConfigError("pretrain_epochs must give every curriculum stage at least one epoch");
  }
  if (teacher_epochs == 0 || student_epochs == 0) throw ConfigError("teacher and student epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (sampler.hard_positives == 0 || sampler.hard_negatives == 0 || sampler.sampled_negatives == 0) {
    throw ConfigError("sampler caps must be at least 1");
  }
  check_optimizer(pretrain_optimizer, "pretrain_optimizer");
  check_optimizer(finetune_optimizer, "finetune_optimizer");
  check_optimizer(temporal.optimizer, "temporal.optimizer");
  if (toggles.temporal()) {
    temporal.pathway.validate(encoder.feature_dim);
    const std::size_t max_stride = *std::max_element(temporal.pathway.strides.begin(), temporal.pathway.strides.end());
    if (temporal.window < max_stride) {
      throw ConfigError("temporal window " + std::to_string(temporal.window) + " is shorter than stride " +
                        std::to_string(max_stride));
    }
    if (temporal.hop == 0 || temporal.batch_size == 0 || temporal.epochs == 0) {
      throw ConfigError("temporal hop, batch size and epochs must be positive");
    }
    if (temporal.hop > temporal.window) throw ConfigError("temporal hop longer than the window skips frames");
    if (encoder.feature_dim % 2 != 0) throw ConfigError("feature_dim must be even for positional encodings");
  }
}

std::vector<Stage> RunConfig::stages() const {
  if (!toggles.curriculum) return {kStageS3};
  std::vector<Stage> out;
  for (const auto& s : curriculum) out.push_back(Stage::parse(s));
  return out;
}

std::vector<std::size_t> RunConfig::stage_epochs() const {
  const std::size_t n = stages().size();
  std::vector<std::size_t> out(n, pretrain_epochs / n);
  for (std::size_t r = 0; r < pretrain_epochs % n; ++r) ++out[n - 1 - r];
  return out;
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.temporal.pathway.ff_width = 256;
  c.pretrain_optimizer.learning_rate = 1e-3;
  c.pretrain_optimizer.final_learning_rate = 1e-4;
  c.finetune_optimizer.learning_rate = 3e-3;
  c.finetune_optimizer.final_learning_rate = 3e-4;
  c.temporal.optimizer.learning_rate = 2e-3;
  c.temporal.optimizer.final_learning_rate = 1e-4;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  RunConfig c = RunConfig::desk();
  try {
    from_json(nlohmann::json::parse(in), c);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

}  // namespace tripcon
