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

#include "tripcon/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tripcon/errors.hpp"
#include "tripcon/rng.hpp"

namespace tripcon {

void SyntheticConfig::validate() const {
  if (instruments == 0 || verbs == 0 || targets == 0) throw ConfigError("component alphabets must be non-empty");
  if (classes == 0 || classes > instruments * verbs * targets) {
    throw ConfigError("class count must lie in [1, instruments * verbs * targets]");
  }
  if (verbs_per_pair == 0) throw ConfigError("verbs_per_pair must be at least 1");
  if (classes > instruments * targets * std::min(verbs_per_pair, verbs)) {
    throw ConfigError("not enough (instrument, target) pairs for the class count at this verbs_per_pair");
  }
  if (obs_dim < 2) throw ConfigError("observation dimension must be at least 2");
  if (!(verb_offset >= 0.0)) throw ConfigError("verb_offset must be non-negative");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (!(imbalance >= 0.0)) throw ConfigError("imbalance exponent must be non-negative");
  if (!(dwell >= 1.0)) throw ConfigError("dwell must be at least 1");
  if (!(multi_label_rate >= 0.0 && multi_label_rate <= 1.0)) throw ConfigError("multi_label_rate must lie in [0, 1]");
  if (multi_label_rate > 0.0 && classes < 2) throw ConfigError("concurrent triplets need at least two classes");
  if (episodes == 0 || episode_length == 0) throw ConfigError("episode count and length must be positive");
  if (val_episodes >= episodes) throw ConfigError("at least one training episode is required");
}

SyntheticConfig SyntheticConfig::desk() { return SyntheticConfig{}; }

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = {{"instruments", c.instruments},
       {"verbs", c.verbs},
       {"targets", c.targets},
       {"classes", c.classes},
       {"obs_dim", c.obs_dim},
       {"noise", c.noise},
       {"imbalance", c.imbalance},
       {"episodes", c.episodes},
       {"episode_length", c.episode_length},
       {"val_episodes", c.val_episodes},
       {"multi_label_rate", c.multi_label_rate},
       {"dwell", c.dwell},
       {"modulation_amplitude", c.modulation_amplitude},
       {"rotation_step", c.rotation_step},
       {"verb_offset", c.verb_offset},
       {"verbs_per_pair", c.verbs_per_pair}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
  c.instruments = j.value("instruments", c.instruments);
  c.verbs = j.value("verbs", c.verbs);
  c.targets = j.value("targets", c.targets);
  c.classes = j.value("classes", c.classes);
  c.obs_dim = j.value("obs_dim", c.obs_dim);
  c.noise = j.value("noise", c.noise);
  c.imbalance = j.value("imbalance", c.imbalance);
  c.episodes = j.value("episodes", c.episodes);
  c.episode_length = j.value("episode_length", c.episode_length);
  c.val_episodes = j.value("val_episodes", c.val_episodes);
  c.multi_label_rate = j.value("multi_label_rate", c.multi_label_rate);
  c.dwell = j.value("dwell", c.dwell);
  c.modulation_amplitude = j.value("modulation_amplitude", c.modulation_amplitude);
  c.rotation_step = j.value("rotation_step", c.rotation_step);
  c.verb_offset = j.value("verb_offset", c.verb_offset);
  c.verbs_per_pair = j.value("verbs_per_pair", c.verbs_per_pair);
}

std::size_t EpisodeDataset::frame_count(bool train) const {
  std::size_t n = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    if ((e < train_episodes) == train) n += episodes[e].labels.size();
  }
  return n;
}

std::vector<std::size_t> EpisodeDataset::class_counts(bool train) const {
  std::vector<std::size_t> counts(vocab.size(), 0);
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    if ((e < train_episodes) != train) continue;
    for (const MultiLabel& l : episodes[e].labels) {
      for (std::size_t c : l.active()) ++counts[c];
    }
  }
  return counts;
}

std::vector<double> zipf_weights(std::size_t classes, double rho) {
  std::vector<double> w(classes);
  for (std::size_t c = 0; c < classes; ++c) w[c] = std::pow(static_cast<double>(c + 1), -rho);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

namespace {

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Each (instrument, target) pair gets up to verbs_per_pair distinct verbs so
// that verb variants share everything except their temporal signature.
TripletVocabulary build_vocabulary(const SyntheticConfig& c, Rng& rng) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::uint32_t i = 0; i < c.instruments; ++i)
    for (std::uint32_t t = 0; t < c.targets; ++t) pairs.emplace_back(i, t);
  rng.shuffle(pairs);
  const std::size_t per_pair = std::min(c.verbs_per_pair, c.verbs);
  std::vector<Triplet> triplets;
  for (const auto& [i, t] : pairs) {
    std::vector<std::uint32_t> verbs(c.verbs);
    std::iota(verbs.begin(), verbs.end(), 0u);
    rng.shuffle(verbs);
    for (std::size_t k = 0; k < per_pair && triplets.size() < c.classes; ++k) triplets.push_back({i, verbs[k], t});
    if (triplets.size() == c.classes) break;
  }
  // Class index is the Zipf rank.
  rng.shuffle(triplets);
  return TripletVocabulary(numbered("instrument", c.instruments), numbered("verb", c.verbs),
                           numbered("target", c.targets), std::move(triplets));
}

std::size_t draw_class(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// Length >= 1 with mean `dwell`: 1 + Geometric(p), p = 1 / dwell.
std::size_t draw_length(double dwell, Rng& rng) {
  if (dwell <= 1.0) return 1;
  // Inverse CDF on one uniform keeps the draw independent of the standard
  // library's distribution implementation.
  const double u = rng.uniform();
  return 1 + static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log1p(-1.0 / dwell)));
}

struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t primary = 0;
  long secondary = -1;
};

struct Layout {
  std::vector<std::vector<Segment>> episodes;
};

std::size_t draw_other(const std::vector<double>& weights, std::size_t exclude, Rng& rng) {
  double total = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (c != exclude) total += weights[c];
  }
  double u = rng.uniform() * total;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (c == exclude) continue;
    if (u < weights[c]) return c;
    u -= weights[c];
  }
  return exclude == weights.size() - 1 ? weights.size() - 2 : weights.size() - 1;
}

Layout draw_layout(const SyntheticConfig& c, Rng& rng) {
  const auto weights = zipf_weights(c.classes, c.imbalance);
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  Layout layout;
  for (std::size_t e = 0; e < c.episodes; ++e) {
    std::vector<Segment> segs;
    for (std::size_t t = 0; t < c.episode_length;) {
      Segment s;
      s.start = t;
      s.length = std::min(draw_length(c.dwell, rng), c.episode_length - t);
      s.primary = draw_class(cdf, rng);
      if (c.multi_label_rate > 0.0 && rng.uniform() < c.multi_label_rate) {
        s.secondary = static_cast<long>(draw_other(weights, s.primary, rng));
      }
      t += s.length;
      // Same labels as the previous segment: one continuous segment.
      if (!segs.empty() && segs.back().primary == s.primary && segs.back().secondary == s.secondary) {
        segs.back().length += s.length;
      } else {
        segs.push_back(s);
      }
    }
    layout.episodes.push_back(std::move(segs));
  }
  return layout;
}

// Reassigns segments until every class appears in the training episodes.
// A segment is only taken from a class that keeps at least one other
// training segment.
void ensure_train_coverage(Layout& layout, std::size_t train_episodes, std::size_t classes, Rng& rng) {
  auto count = [&]() {
    std::vector<std::size_t> n(classes, 0);
    for (std::size_t e = 0; e < train_episodes; ++e) {
      for (const Segment& s : layout.episodes[e]) {
        ++n[s.primary];
        if (s.secondary >= 0) ++n[static_cast<std::size_t>(s.secondary)];
      }
    }
    return n;
  };
  for (std::size_t missing = 0; missing < classes; ++missing) {
    auto n = count();
    if (n[missing] > 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> donors;
    for (std::size_t e = 0; e < train_episodes; ++e) {
      for (std::size_t i = 0; i < layout.episodes[e].size(); ++i) {
        const Segment& s = layout.episodes[e][i];
        if (n[s.primary] >= 2 && s.secondary != static_cast<long>(missing)) donors.emplace_back(e, i);
      }
    }
    if (donors.empty()) throw ConfigError("training split is too small to contain every class");
    const auto [e, i] = donors[rng.index(donors.size())];
    layout.episodes[e][i].primary = missing;
  }
}

struct Latents {
  std::vector<std::vector<double>> instrument;
  std::vector<std::vector<double>> target;
  std::vector<double> g1;
  std::vector<double> g2;
  std::vector<std::vector<double>> verb;
};

std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double n = 0.0;
  do {
    n = 0.0;
    for (double& x : v) {
      x = rng.normal();
      n += x * x;
    }
  } while (n == 0.0);
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

Latents draw_latents(const SyntheticConfig& c, Rng& rng) {
  Latents l;
  for (std::size_t i = 0; i < c.instruments; ++i) l.instrument.push_back(random_unit(c.obs_dim, rng));
  for (std::size_t t = 0; t < c.targets; ++t) l.target.push_back(random_unit(c.obs_dim, rng));
  l.g1 = random_unit(c.obs_dim, rng);
  // Gram-Schmidt for the second plane axis.
  for (;;) {
    std::vector<double> v = random_unit(c.obs_dim, rng);
    double dot = 0.0;
    for (std::size_t k = 0; k < c.obs_dim; ++k) dot += v[k] * l.g1[k];
    double n = 0.0;
    for (std::size_t k = 0; k < c.obs_dim; ++k) {
      v[k] -= dot * l.g1[k];
      n += v[k] * v[k];
    }
    if (n < 1e-12) continue;
    for (double& x : v) x /= std::sqrt(n);
    l.g2 = std::move(v);
    break;
  }
  for (std::size_t v = 0; v < c.verbs; ++v) l.verb.push_back(random_unit(c.obs_dim, rng));
  return l;
}

void add_triplet(std::span<double> row, const Triplet& t, double theta, const SyntheticConfig& c, const Latents& l) {
  const double a = c.modulation_amplitude * std::cos(theta);
  const double b = c.modulation_amplitude * std::sin(theta);
  for (std::size_t k = 0; k < row.size(); ++k) {
    row[k] += l.instrument[t.instrument][k] + l.target[t.target][k] + a * l.g1[k] + b * l.g2[k] +
              c.verb_offset * l.verb[t.verb][k];
  }
}

Episode render(const std::vector<Segment>& segs, const SyntheticConfig& c, const TripletVocabulary& vocab,
               const Latents& l, Rng& rng) {
  Episode ep;
  ep.observations = Tensor({c.episode_length, c.obs_dim});
  ep.labels.assign(c.episode_length, MultiLabel(c.classes));
  for (const Segment& s : segs) {
    const double phase1 = 2.0 * std::numbers::pi * rng.uniform();
    const double phase2 = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t age = 0; age < s.length; ++age) {
      const std::size_t t = s.start + age;
      auto row = ep.observations.row(t);
      const Triplet& p = vocab[s.primary];
      add_triplet(row, p, phase1 + c.rotation_step * p.verb * static_cast<double>(age), c, l);
      ep.labels[t].set(s.primary);
      if (s.secondary >= 0) {
        const Triplet& q = vocab[static_cast<std::size_t>(s.secondary)];
        add_triplet(row, q, phase2 + c.rotation_step * q.verb * static_cast<double>(age), c, l);
        ep.labels[t].set(static_cast<std::size_t>(s.secondary));
      }
    }
  }
  if (c.noise > 0.0) {
    for (double& x : ep.observations.data()) x += c.noise * rng.normal();
  }
  return ep;
}

}  // namespace

EpisodeDataset generate_dataset(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  EpisodeDataset ds;
  ds.config = config;
  ds.seed = seed;
  ds.train_episodes = config.episodes - config.val_episodes;
  Rng vocab_rng(derive_seed(seed, 1));
  ds.vocab = build_vocabulary(config, vocab_rng);
  Rng layout_rng(derive_seed(seed, 2));
  Layout layout = draw_layout(config, layout_rng);
  ensure_train_coverage(layout, ds.train_episodes, config.classes, layout_rng);
  Rng latent_rng(derive_seed(seed, 3));
  const Latents latents = draw_latents(config, latent_rng);
  Rng render_rng(derive_seed(seed, 4));
  for (const auto& segs : layout.episodes) {
    ds.episodes.push_back(render(segs, config, ds.vocab, latents, render_rng));
  }
  return ds;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("dataset file is truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[] = "TRIPDATA";

std::string header_json(const EpisodeDataset& ds) {
  return nlohmann::json{{"config", ds.config}, {"vocabulary", ds.vocab.to_json()}, {"train_episodes", ds.train_episodes}}
      .dump();
}

std::string payload_bytes(const EpisodeDataset& ds) {
  std::string out;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.episodes.size()));
  const std::size_t classes = ds.vocab.size();
  const std::size_t packed = (classes + 7) / 8;
  for (const Episode& ep : ds.episodes) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.observations.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.observations.cols()));
    out.append(reinterpret_cast<const char*>(ep.observations.data().data()), ep.observations.size() * sizeof(double));
    for (const MultiLabel& l : ep.labels) {
      std::string bits(packed, '\0');
      for (std::size_t c : l.active()) bits[c / 8] = static_cast<char>(bits[c / 8] | (1 << (c % 8)));
      out += bits;
    }
  }
  return out;
}

}  // namespace

std::string dataset_to_bytes(const EpisodeDataset& ds) {
  const std::string header = header_json(ds);
  const std::string payload = payload_bytes(ds);
  std::string seed_bytes;
  put<std::uint64_t>(seed_bytes, ds.seed);
  const std::uint64_t checksum = fnv1a64(payload, fnv1a64(seed_bytes, fnv1a64(header)));
  std::string out(kMagic, 8);
  put<std::uint32_t>(out, kDatasetVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out += seed_bytes;
  put<std::uint64_t>(out, checksum);
  out += payload;
  return out;
}

EpisodeDataset dataset_from_bytes(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(8) != std::string_view(kMagic, 8)) throw FormatError("not a dataset file");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw VersionError("dataset version " + std::to_string(version) + " is not supported (this reader handles " +
                       std::to_string(kDatasetVersion) + ")");
  }
  const std::string header(r.take(r.get<std::uint32_t>()));
  const std::string seed_bytes(r.take(sizeof(std::uint64_t)));
  const auto checksum = r.get<std::uint64_t>();
  const std::string_view payload = std::string_view(bytes).substr(r.pos());
  if (fnv1a64(payload, fnv1a64(seed_bytes, fnv1a64(header))) != checksum) {
    throw IntegrityError("dataset checksum mismatch");
  }

  EpisodeDataset ds;
  std::memcpy(&ds.seed, seed_bytes.data(), sizeof(ds.seed));
  try {
    const auto h = nlohmann::json::parse(header);
    ds.config = h.at("config").get<SyntheticConfig>();
    ds.vocab = TripletVocabulary::from_json(h.at("vocabulary"));
    ds.train_episodes = h.at("train_episodes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header: ") + e.what());
  }
  const std::size_t classes = ds.vocab.size();
  const std::size_t packed = (classes + 7) / 8;
  const auto episodes = r.get<std::uint32_t>();
  for (std::uint32_t e = 0; e < episodes; ++e) {
    Episode ep;
    const auto frames = r.get<std::uint32_t>();
    const auto dim = r.get<std::uint32_t>();
    ep.observations = Tensor({frames, dim});
    const std::string_view raw = r.take(ep.observations.size() * sizeof(double));
    std::memcpy(ep.observations.data().data(), raw.data(), raw.size());
    for (std::uint32_t t = 0; t < frames; ++t) {
      const std::string_view bits = r.take(packed);
      MultiLabel l(classes);
      for (std::size_t c = 0; c < classes; ++c) l.set(c, (static_cast<unsigned char>(bits[c / 8]) >> (c % 8)) & 1);
      ep.labels.push_back(std::move(l));
    }
    ds.episodes.push_back(std::move(ep));
  }
  if (!r.done()) throw FormatError("trailing bytes after the last episode");
  return ds;
}

void write_dataset(const EpisodeDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  const std::string bytes = dataset_to_bytes(ds);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EpisodeDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return dataset_from_bytes(ss.str());
}

nlohmann::json dataset_manifest(const EpisodeDataset& ds, const std::string& bytes) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return {{"format_version", kDatasetVersion},
          {"seed", ds.seed},
          {"config", ds.config},
          {"classes", ds.vocab.size()},
          {"episodes", ds.episodes.size()},
          {"train_episodes", ds.train_episodes},
          {"train_frames", ds.frame_count(true)},
          {"val_frames", ds.frame_count(false)},
          {"train_class_counts", ds.class_counts(true)},
          {"val_class_counts", ds.class_counts(false)},
          {"file_fnv1a64", hex}};
}

}  // namespace tripcon
