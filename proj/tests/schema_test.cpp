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

#include "tripcon/schema.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"
#include "tripcon/errors.hpp"

namespace tripcon {
namespace {

TripletVocabulary surgical_vocab() {
  return TripletVocabulary({"grasper", "hook"}, {"retract", "dissect"}, {"gallbladder", "cystic_duct"},
                           {{0, 0, 0}, {1, 1, 0}, {1, 1, 1}, {0, 0, 1}});
}

TEST(SchemaTest, RejectsOutOfRangeAndDuplicateTriplets) {
  EXPECT_THROW(TripletVocabulary({"a"}, {"b"}, {"c"}, {{0, 0, 1}}), ConfigError);
  EXPECT_THROW(TripletVocabulary({"a"}, {"b"}, {"c"}, {{0, 0, 0}, {0, 0, 0}}), ConfigError);
}

TEST(SchemaTest, SingleTripletProjectsToItsTargetAtS1) {
  const auto vocab = surgical_vocab();
  const auto label = MultiLabel::from_active(4, {0});
  const StageLabel s1 = project_to_stage(label, vocab, kStageS1);
  ASSERT_EQ(s1.keys.size(), 1u);
  EXPECT_EQ(vocab.targets()[s1.keys[0][2]], "gallbladder");
  EXPECT_EQ(s1.keys[0][0], kDropped);
  EXPECT_EQ(s1.keys[0][1], kDropped);
}

TEST(SchemaTest, SharedTargetCollapsesAtS1ButNotS3) {
  const auto vocab = surgical_vocab();
  const auto label = MultiLabel::from_active(4, {0, 1});
  EXPECT_EQ(project_to_stage(label, vocab, kStageS1).keys.size(), 1u);
  EXPECT_EQ(project_to_stage(label, vocab, kStageS3).keys.size(), 2u);
}

TEST(SchemaTest, ProjectionRejectsLengthMismatch) {
  EXPECT_THROW(project_to_stage(MultiLabel(3), surgical_vocab(), kStageS1), ShapeError);
  EXPECT_THROW(stage_equal(MultiLabel(4), MultiLabel(3), surgical_vocab(), kStageS1), ShapeError);
}

TEST(SchemaTest, EmptyLabelProjectsToEmptySetAtEveryStage) {
  const auto vocab = surgical_vocab();
  for (Stage s : {kStageS1, kStageS2, kStageS3}) {
    EXPECT_TRUE(project_to_stage(MultiLabel(4), vocab, s).keys.empty());
  }
}

TEST(SchemaTest, StageEqualityExamples) {
  const auto vocab = surgical_vocab();
  const auto a = MultiLabel::from_active(4, {0});
  const auto b = MultiLabel::from_active(4, {1});  // same target, other instrument
  const auto c = MultiLabel::from_active(4, {2});  // other target
  for (Stage s : {kStageS1, kStageS2, kStageS3}) EXPECT_TRUE(stage_equal(a, a, vocab, s));
  EXPECT_TRUE(stage_equal(a, b, vocab, kStageS1));
  EXPECT_FALSE(stage_equal(a, b, vocab, kStageS2));
  for (Stage s : {kStageS1, kStageS2, kStageS3}) EXPECT_FALSE(stage_equal(a, c, vocab, s));
}

TEST(SchemaTest, StageParsing) {
  EXPECT_EQ(Stage::parse("T"), kStageS1);
  EXPECT_EQ(Stage::parse("IT"), kStageS2);
  EXPECT_EQ(Stage::parse("TI"), kStageS2);
  EXPECT_EQ(Stage::parse("IVT"), kStageS3);
  EXPECT_EQ(Stage::parse("VT").name(), "VT");
  EXPECT_THROW(Stage::parse("X"), ConfigError);
  EXPECT_THROW(Stage::parse(""), ConfigError);
}

TEST(SchemaTest, ComponentMapGroupCounts) {
  std::vector<Triplet> full;
  for (std::uint32_t i = 0; i < 2; ++i)
    for (std::uint32_t v = 0; v < 2; ++v)
      for (std::uint32_t t = 0; t < 2; ++t) full.push_back({i, v, t});
  const auto maps = component_maps(TripletVocabulary({"a", "b"}, {"c", "d"}, {"e", "f"}, full));
  EXPECT_EQ(maps.instrument.groups, 2u);
  EXPECT_EQ(maps.instrument_verb.groups, 4u);

  const auto single = component_maps(TripletVocabulary({"a"}, {"b"}, {"c"}, {{0, 0, 0}}));
  for (MetricFamily f : {MetricFamily::kI, MetricFamily::kV, MetricFamily::kT, MetricFamily::kIV,
                         MetricFamily::kIT}) {
    EXPECT_EQ(single.family(f).groups, 1u);
  }
}

TEST(SchemaTest, HundredTripletVocabularyOverSixInstruments) {
  // Six instruments, ten verbs, fifteen targets; the first 100 combinations
  // in an order that cycles through instruments fastest.
  std::vector<Triplet> triplets;
  for (std::uint32_t n = 0; triplets.size() < 100; ++n) {
    triplets.push_back({n % 6, (n / 6) % 10, (n / 60) % 15});
  }
  const TripletVocabulary vocab(testing::names("i", 6), testing::names("v", 10), testing::names("t", 15),
                                triplets);
  EXPECT_EQ(vocab.size(), 100u);
  EXPECT_EQ(component_maps(vocab).instrument.groups, 6u);
}

TEST(SchemaTest, ComponentMapsReproduceTripletComponents) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto vocab = testing::random_vocabulary(rng);
    const auto maps = component_maps(vocab);
    for (std::size_t c = 0; c < vocab.size(); ++c) {
      const Triplet& t = vocab[c];
      EXPECT_EQ(maps.instrument.group_names[maps.instrument.group_of[c]], vocab.instruments()[t.instrument]);
      EXPECT_EQ(maps.verb.group_names[maps.verb.group_of[c]], vocab.verbs()[t.verb]);
      EXPECT_EQ(maps.target.group_names[maps.target.group_of[c]], vocab.targets()[t.target]);
      EXPECT_EQ(maps.instrument_target.group_names[maps.instrument_target.group_of[c]],
                vocab.instruments()[t.instrument] + "," + vocab.targets()[t.target]);
    }
    // Surjective: every group id is hit.
    for (MetricFamily f : {MetricFamily::kI, MetricFamily::kV, MetricFamily::kT, MetricFamily::kIV,
                           MetricFamily::kIT}) {
      const GroupMap& m = maps.family(f);
      std::vector<bool> hit(m.groups, false);
      for (std::size_t g : m.group_of) hit.at(g) = true;
      EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
    }
  }
}

TEST(SchemaTest, MonotoneCoarseningOverRandomVocabularies) {
  Rng rng(5);
  int s3 = 0;
  int s2 = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto vocab = testing::random_vocabulary(rng);
    const auto a = testing::random_label(rng, vocab.size());
    const auto b = testing::random_label(rng, vocab.size());
    const bool e3 = stage_equal(a, b, vocab, kStageS3);
    const bool e2 = stage_equal(a, b, vocab, kStageS2);
    const bool e1 = stage_equal(a, b, vocab, kStageS1);
    if (e3) ++s3;
    if (e2) ++s2;
    EXPECT_TRUE(!e3 || e2);
    EXPECT_TRUE(!e2 || e1);
    EXPECT_EQ(e3, testing::reference_stage_equal(a, b, vocab, kStageS3));
    EXPECT_EQ(e1, testing::reference_stage_equal(a, b, vocab, kStageS1));
  }
  // The property is only informative if equal pairs actually occur.
  EXPECT_GT(s3, 20);
  EXPECT_GT(s2, s3);
}

TEST(SchemaTest, VocabularyJsonRoundTrip) {
  const auto vocab = surgical_vocab();
  EXPECT_EQ(TripletVocabulary::from_json(vocab.to_json()), vocab);
  const auto path = std::filesystem::temp_directory_path() / "tripcon_vocab_test.json";
  vocab.save(path);
  EXPECT_EQ(TripletVocabulary::load(path), vocab);
  std::filesystem::remove(path);
  EXPECT_THROW(TripletVocabulary::from_json(nlohmann::json{{"instruments", {"a"}}}), ConfigError);
}

}  // namespace
}  // namespace tripcon
