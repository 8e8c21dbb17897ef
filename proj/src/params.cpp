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

#include "tripcon/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tripcon/errors.hpp"

namespace tripcon {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (has(name)) throw ConfigError("duplicate parameter " + name);
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

bool ParameterSet::has(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

Tensor& ParameterSet::get(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter " + name);
}

const Tensor& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

bool ParameterSet::same_signature(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
  }
  return true;
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
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[] = "TRIPCKPT";

}  // namespace

std::string ParameterSet::to_bytes() const {
  std::string out(kMagic, 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(double));
  }
  return out;
}

ParameterSet ParameterSet::from_bytes(const std::string& bytes) {
  Reader r(bytes);
  if (r.take(8) != std::string(kMagic, 8)) throw FormatError("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  ParameterSet out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.take(r.get<std::uint32_t>());
    Shape shape(r.get<std::uint32_t>());
    for (std::size_t& d : shape) d = r.get<std::uint64_t>();
    Tensor t(shape);
    const std::string raw = r.take(t.size() * sizeof(double));
    std::memcpy(t.data().data(), raw.data(), raw.size());
    out.add(name, std::move(t));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint records");
  return out;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string bytes = to_bytes();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParameterSet ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_bytes(ss.str());
}

void ParameterSet::assign(const ParameterSet& other) {
  if (!same_signature(other)) {
    for (const auto& [name, t] : entries_) {
      if (!other.has(name)) throw CheckpointError("checkpoint lacks parameter " + name);
      if (other.get(name).shape() != t.shape()) {
        throw CheckpointError("parameter " + name + " has shape " + shape_string(other.get(name).shape()) +
                              ", model expects " + shape_string(t.shape()));
      }
    }
    throw CheckpointError("checkpoint holds parameters the model does not define");
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].second = other.entries_[i].second;
}

Bindings::Bindings(Tape& tape, const ParameterSet& params, bool trainable) : tape_(&tape) {
  for (const auto& [name, t] : params.entries()) vars_.emplace(name, tape.leaf(t, trainable));
}

Bindings::Bindings(Tape& tape, const ParameterSet& params, const std::vector<std::string>& frozen) : tape_(&tape) {
  for (const auto& [name, t] : params.entries()) {
    const bool train = std::find(frozen.begin(), frozen.end(), name) == frozen.end();
    vars_.emplace(name, tape.leaf(t, train));
  }
}

Bindings::Bindings(const ParameterSet& params, std::span<const Var> vars) {
  if (vars.size() != params.size() || vars.empty()) throw ShapeError("one var per parameter expected");
  tape_ = vars[0].tape();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].shape() != params.entries()[i].second.shape()) {
      throw ShapeError("var for " + params.entries()[i].first + " has the wrong shape");
    }
    vars_.emplace(params.entries()[i].first, vars[i]);
  }
}

Var Bindings::operator[](const std::string& name) const {
  const auto it = vars_.find(name);
  if (it == vars_.end()) throw ConfigError("parameter " + name + " is not bound");
  return it->second;
}

std::map<std::string, Tensor> Bindings::gradients(const Gradients& grads) const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : vars_) {
    if (grads.has(v)) out.emplace(name, grads[v]);
  }
  return out;
}

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = bound * (2.0 * rng.uniform() - 1.0);
  return t;
}

double cosine_learning_rate(const AdamWConfig& config, std::size_t step, std::size_t total) {
  if (total <= 1) return config.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total - 1));
  return config.final_learning_rate +
         0.5 * (config.learning_rate - config.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * progress));
}

void AdamW::step(ParameterSet& params, const std::map<std::string, Tensor>& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : params.entries()) {
    const auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    if (g.shape() != p.shape()) throw ShapeError("gradient for " + name + " has the wrong shape");
    auto [mi, fresh_m] = m_.try_emplace(name, Tensor(p.shape()));
    auto [vi, fresh_v] = v_.try_emplace(name, Tensor(p.shape()));
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      p[i] -= learning_rate * (update + config_.weight_decay * p[i]);
    }
  }
}

}  // namespace tripcon
