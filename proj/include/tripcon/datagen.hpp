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

// Seeded generator of synthetic long-tailed triplet episodes, and the binary
// dataset file format.
//
// Every instrument, target and verb owns a random unit direction in R^D, and
// all verbs share one random plane (g1, g2). A frame carrying triplet
// (i, v, t) adds
//   u_i + u_t + b h_v + A (cos(theta) g1 + sin(theta) g2),  theta = phase + v * omega * age,
// where the phase is drawn per segment and age counts frames since the
// segment started. The plane term looks the same for every verb in a single
// frame; only its rotation speed tells verbs apart, and only over time. The
// static term b h_v is a weak per-frame hint that noise can drown. Gaussian
// noise sigma is added per coordinate.
//
// File layout (little-endian):
//   "TRIPDATA"       8 bytes
//   version          u32
//   header_length    u32, then header_length bytes of JSON (config, vocabulary,
//                    train episode count)
//   seed             u64
//   checksum         u64, FNV-1a 64 over header JSON, seed and payload
//   payload:
//     episodes       u32
//     per episode:   frames u32, dim u32, frames x dim f64 observations,
//                    frames x ceil(C / 8) bytes of label bits (LSB first)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripcon/schema.hpp"
#include "tripcon/tensor.hpp"

namespace tripcon {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct SyntheticConfig {
  std::size_t instruments = 3;
  std::size_t verbs = 3;
  std::size_t targets = 4;
  std::size_t classes = 12;
  std::size_t obs_dim = 32;
  double noise = 0.3;
  double imbalance = 1.2;  // Zipf exponent over class ranks
  std::size_t episodes = 64;
  std::size_t episode_length = 64;
  std::size_t val_episodes = 16;
  double multi_label_rate = 0.2;
  double dwell = 8.0;
  double modulation_amplitude = 1.0;
  double rotation_step = 0.5;  // omega, radians per frame per verb index
  double verb_offset = 0.3;    // b, weight of the static verb direction h_v
  std::size_t verbs_per_pair = 2;  // verb variants per (instrument, target)

  void validate() const;
  static SyntheticConfig desk();

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

struct Episode {
  Tensor observations;  // T x D
  std::vector<MultiLabel> labels;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct EpisodeDataset {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  TripletVocabulary vocab;
  std::vector<Episode> episodes;
  std::size_t train_episodes = 0;

  std::size_t frame_count(bool train) const;
  // Frames per class over the chosen split.
  std::vector<std::size_t> class_counts(bool train) const;

  friend bool operator==(const EpisodeDataset&, const EpisodeDataset&) = default;
};

// Zipf(rho) weights over class ranks 0..C-1, normalized.
std::vector<double> zipf_weights(std::size_t classes, double rho);

EpisodeDataset generate_dataset(const SyntheticConfig& config, std::uint64_t seed);

std::string dataset_to_bytes(const EpisodeDataset& ds);
EpisodeDataset dataset_from_bytes(const std::string& bytes);
void write_dataset(const EpisodeDataset& ds, const std::filesystem::path& path);
EpisodeDataset read_dataset(const std::filesystem::path& path);

// Summary written next to a dataset file.
nlohmann::json dataset_manifest(const EpisodeDataset& ds, const std::string& bytes);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

// Adapter interface for real recordings. Nothing in this project implements
// it; a loader for an annotated video corpus would produce the same
// EpisodeDataset (embeddings or observations per frame plus triplet labels).
class EpisodeSource {
 public:
  virtual ~EpisodeSource() = default;
  virtual EpisodeDataset load() = 0;
};

}  // namespace tripcon
