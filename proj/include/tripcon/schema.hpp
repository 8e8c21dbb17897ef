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

// Label algebra for <instrument, verb, target> triplets: vocabularies,
// multi-label vectors, curriculum stage projections and the component maps
// shared by the sampler and the metrics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tripcon {

struct Triplet {
  std::uint32_t instrument = 0;
  std::uint32_t verb = 0;
  std::uint32_t target = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

class TripletVocabulary {
 public:
  TripletVocabulary() = default;
  // Throws ConfigError on out-of-range component ids or duplicate triplets.
  TripletVocabulary(std::vector<std::string> instruments, std::vector<std::string> verbs,
                    std::vector<std::string> targets, std::vector<Triplet> triplets);

  const std::vector<std::string>& instruments() const { return instruments_; }
  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::vector<std::string>& targets() const { return targets_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  std::size_t size() const { return triplets_.size(); }
  const Triplet& operator[](std::size_t id) const { return triplets_.at(id); }

  std::string triplet_name(std::size_t id) const;

  nlohmann::json to_json() const;
  static TripletVocabulary from_json(const nlohmann::json& j);
  static TripletVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  friend bool operator==(const TripletVocabulary&, const TripletVocabulary&) = default;

 private:
  std::vector<std::string> instruments_;
  std::vector<std::string> verbs_;
  std::vector<std::string> targets_;
  std::vector<Triplet> triplets_;
};

// Binary vector over the C triplet classes of one frame.
class MultiLabel {
 public:
  MultiLabel() = default;
  explicit MultiLabel(std::size_t classes) : bits_(classes, 0) {}
  static MultiLabel from_active(std::size_t classes, std::initializer_list<std::size_t> active);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t c) const { return bits_.at(c) != 0; }
  void set(std::size_t c, bool on = true) { bits_.at(c) = on ? 1 : 0; }
  bool empty() const;
  std::size_t count() const;
  std::vector<std::size_t> active() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const MultiLabel&, const MultiLabel&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

enum Component : std::uint8_t {
  kInstrument = 1,
  kVerb = 2,
  kTarget = 4,
};

// Which triplet components a curriculum stage keeps. The default chain is
// T -> IT -> IVT; any non-empty subset can be used to build other orders.
class Stage {
 public:
  constexpr Stage() = default;
  constexpr explicit Stage(std::uint8_t components) : components_(components) {}

  // Parses "T", "IT", "IVT", "VT", ... (letters I, V, T in any order).
  static Stage parse(std::string_view name);

  constexpr bool keeps(Component c) const { return (components_ & c) != 0; }
  constexpr std::uint8_t components() const { return components_; }
  std::string name() const;

  friend constexpr bool operator==(Stage, Stage) = default;

 private:
  std::uint8_t components_ = kInstrument | kVerb | kTarget;
};

inline constexpr Stage kStageS1{kTarget};
inline constexpr Stage kStageS2{kInstrument | kTarget};
inline constexpr Stage kStageS3{kInstrument | kVerb | kTarget};

// A projected key is the triplet with dropped components set to kDropped.
using StageKey = std::array<std::uint32_t, 3>;
inline constexpr std::uint32_t kDropped = 0xffffffffu;

struct StageLabel {
  Stage stage;
  std::vector<StageKey> keys;  // sorted, unique

  friend bool operator==(const StageLabel&, const StageLabel&) = default;
};

StageLabel project_to_stage(const MultiLabel& label, const TripletVocabulary& vocab, Stage stage);
bool stage_equal(const MultiLabel& a, const MultiLabel& b, const TripletVocabulary& vocab, Stage stage);

enum class MetricFamily : std::uint8_t { kI = 0, kV, kT, kIV, kIT, kIVT };
inline constexpr std::array<MetricFamily, 6> kAllFamilies{MetricFamily::kI,  MetricFamily::kV,
                                                          MetricFamily::kT,  MetricFamily::kIV,
                                                          MetricFamily::kIT, MetricFamily::kIVT};
std::string_view family_name(MetricFamily family);

// Triplet id -> dense group id for one family; groups are numbered by
// ascending component id (or component pair).
struct GroupMap {
  std::vector<std::size_t> group_of;
  std::size_t groups = 0;
  std::vector<std::string> group_names;
};

struct ComponentMaps {
  GroupMap instrument;
  GroupMap verb;
  GroupMap target;
  GroupMap instrument_verb;
  GroupMap instrument_target;

  const GroupMap& family(MetricFamily f) const;
};

ComponentMaps component_maps(const TripletVocabulary& vocab);

}  // namespace tripcon
