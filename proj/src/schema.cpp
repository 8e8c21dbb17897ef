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

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "tripcon/errors.hpp"

namespace tripcon {

TripletVocabulary::TripletVocabulary(std::vector<std::string> instruments, std::vector<std::string> verbs,
                                     std::vector<std::string> targets, std::vector<Triplet> triplets)
    : instruments_(std::move(instruments)),
      verbs_(std::move(verbs)),
      targets_(std::move(targets)),
      triplets_(std::move(triplets)) {
  std::set<Triplet> seen;
  for (std::size_t id = 0; id < triplets_.size(); ++id) {
    const Triplet& t = triplets_[id];
    if (t.instrument >= instruments_.size() || t.verb >= verbs_.size() || t.target >= targets_.size()) {
      throw ConfigError("triplet " + std::to_string(id) + " references a component outside its alphabet");
    }
    if (!seen.insert(t).second) throw ConfigError("duplicate triplet at class " + std::to_string(id));
  }
}

std::string TripletVocabulary::triplet_name(std::size_t id) const {
  const Triplet& t = triplets_.at(id);
  return instruments_[t.instrument] + "," + verbs_[t.verb] + "," + targets_[t.target];
}

nlohmann::json TripletVocabulary::to_json() const {
  nlohmann::json triplets = nlohmann::json::array();
  for (const Triplet& t : triplets_) triplets.push_back({t.instrument, t.verb, t.target});
  return {{"instruments", instruments_}, {"verbs", verbs_}, {"targets", targets_}, {"triplets", triplets}};
}

TripletVocabulary TripletVocabulary::from_json(const nlohmann::json& j) {
  try {
    std::vector<Triplet> triplets;
    for (const auto& t : j.at("triplets")) {
      if (!t.is_array() || t.size() != 3) throw ConfigError("each triplet must be [instrument, verb, target]");
      triplets.push_back({t[0].get<std::uint32_t>(), t[1].get<std::uint32_t>(), t[2].get<std::uint32_t>()});
    }
    return TripletVocabulary(j.at("instruments").get<std::vector<std::string>>(),
                             j.at("verbs").get<std::vector<std::string>>(),
                             j.at("targets").get<std::vector<std::string>>(), std::move(triplets));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed vocabulary: ") + e.what());
  }
}

TripletVocabulary TripletVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("vocabulary " + path.string() + ": " + e.what());
  }
}

void TripletVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file " + path.string());
  out << to_json().dump(2) << "\n";
}

MultiLabel MultiLabel::from_active(std::size_t classes, std::initializer_list<std::size_t> active) {
  MultiLabel label(classes);
  for (std::size_t c : active) label.set(c);
  return label;
}

bool MultiLabel::empty() const {
  return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

std::size_t MultiLabel::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

std::vector<std::size_t> MultiLabel::active() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < bits_.size(); ++c) {
    if (bits_[c]) out.push_back(c);
  }
  return out;
}

Stage Stage::parse(std::string_view name) {
  std::uint8_t mask = 0;
  for (char ch : name) {
    switch (ch) {
      case 'I': case 'i': mask |= kInstrument; break;
      case 'V': case 'v': mask |= kVerb; break;
      case 'T': case 't': mask |= kTarget; break;
      default: throw ConfigError("unknown curriculum stage '" + std::string(name) + "'");
    }
  }
  if (mask == 0) throw ConfigError("empty curriculum stage");
  return Stage(mask);
}

std::string Stage::name() const {
  std::string out;
  if (keeps(kInstrument)) out += 'I';
  if (keeps(kVerb)) out += 'V';
  if (keeps(kTarget)) out += 'T';
  return out;
}

StageLabel project_to_stage(const MultiLabel& label, const TripletVocabulary& vocab, Stage stage) {
  if (label.size() != vocab.size()) {
    throw ShapeError("label has " + std::to_string(label.size()) + " classes, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  StageLabel out{stage, {}};
  for (std::size_t c : label.active()) {
    const Triplet& t = vocab[c];
    out.keys.push_back({stage.keeps(kInstrument) ? t.instrument : kDropped,
                        stage.keeps(kVerb) ? t.verb : kDropped, stage.keeps(kTarget) ? t.target : kDropped});
  }
  std::sort(out.keys.begin(), out.keys.end());
  out.keys.erase(std::unique(out.keys.begin(), out.keys.end()), out.keys.end());
  return out;
}

bool stage_equal(const MultiLabel& a, const MultiLabel& b, const TripletVocabulary& vocab, Stage stage) {
  if (a.size() != b.size()) throw ShapeError("stage_equal on labels of different length");
  return project_to_stage(a, vocab, stage).keys == project_to_stage(b, vocab, stage).keys;
}

std::string_view family_name(MetricFamily family) {
  switch (family) {
    case MetricFamily::kI: return "AP_I";
    case MetricFamily::kV: return "AP_V";
    case MetricFamily::kT: return "AP_T";
    case MetricFamily::kIV: return "AP_IV";
    case MetricFamily::kIT: return "AP_IT";
    case MetricFamily::kIVT: return "AP_IVT";
  }
  return "AP_?";
}

const GroupMap& ComponentMaps::family(MetricFamily f) const {
  switch (f) {
    case MetricFamily::kI: return instrument;
    case MetricFamily::kV: return verb;
    case MetricFamily::kT: return target;
    case MetricFamily::kIV: return instrument_verb;
    case MetricFamily::kIT: return instrument_target;
    default: throw ConfigError("the triplet family has no component map");
  }
}

namespace {

template <typename KeyFn, typename NameFn>
GroupMap build_map(const TripletVocabulary& vocab, KeyFn key, NameFn name) {
  using Key = decltype(key(vocab[0]));
  std::map<Key, std::size_t> ids;
  for (const Triplet& t : vocab.triplets()) ids.emplace(key(t), 0);
  GroupMap out;
  for (auto& [k, id] : ids) {
    id = out.groups++;
    out.group_names.push_back(name(k));
  }
  for (const Triplet& t : vocab.triplets()) out.group_of.push_back(ids.at(key(t)));
  return out;
}

}  // namespace

ComponentMaps component_maps(const TripletVocabulary& vocab) {
  const auto& in = vocab.instruments();
  const auto& vb = vocab.verbs();
  const auto& tg = vocab.targets();
  ComponentMaps maps;
  maps.instrument = build_map(vocab, [](const Triplet& t) { return t.instrument; },
                              [&](std::uint32_t k) { return in[k]; });
  maps.verb = build_map(vocab, [](const Triplet& t) { return t.verb; }, [&](std::uint32_t k) { return vb[k]; });
  maps.target = build_map(vocab, [](const Triplet& t) { return t.target; }, [&](std::uint32_t k) { return tg[k]; });
  maps.instrument_verb = build_map(
      vocab, [](const Triplet& t) { return std::pair{t.instrument, t.verb}; },
      [&](std::pair<std::uint32_t, std::uint32_t> k) { return in[k.first] + "," + vb[k.second]; });
  maps.instrument_target = build_map(
      vocab, [](const Triplet& t) { return std::pair{t.instrument, t.target}; },
      [&](std::pair<std::uint32_t, std::uint32_t> k) { return in[k.first] + "," + tg[k.second]; });
  return maps;
}

}  // namespace tripcon
