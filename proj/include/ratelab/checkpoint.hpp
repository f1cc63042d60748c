// Copyright 2026 The ratelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary network checkpoints. Layout is documented in
// docs/checkpoint_format.md; all integers and doubles are little-endian and
// weight matrices are written row-major.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratelab/neural.hpp"

namespace ratelab {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic = {'R', 'L', 'C', 'K', 'P', 'T', '\0', '\0'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CheckpointKind : std::uint32_t { kMlp = 0, kActorCritic = 1 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kMlp;
  std::vector<int> sizes;  // full widths for an Mlp, trunk widths for actor-critic
  int num_actions = 0;     // actor-critic only
  bool relu_output = false;
  ParamSet params;
  std::optional<AdamState> optimizer;

  static Checkpoint Of(const Mlp& net, std::optional<AdamState> opt = std::nullopt) {
    return {CheckpointKind::kMlp, net.sizes(), 0, net.relu_output(), net.params(), std::move(opt)};
  }
  static Checkpoint Of(const ActorCriticNet& net, std::optional<AdamState> opt = std::nullopt) {
    return {CheckpointKind::kActorCritic, net.trunk_sizes(), net.num_actions(), false, net.params(), std::move(opt)};
  }

  Mlp ToMlp() const {
    if (kind != CheckpointKind::kMlp) throw CheckpointError("checkpoint does not hold an Mlp");
    return Mlp::FromParams(sizes, params, relu_output);
  }
  ActorCriticNet ToActorCritic() const {
    if (kind != CheckpointKind::kActorCritic) throw CheckpointError("checkpoint does not hold an actor-critic net");
    return ActorCriticNet::FromParams(sizes, num_actions, params);
  }
};

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& os) : os_(os) {}

  template <typename T>
  void Put(T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os_.write(bytes.data(), sizeof(T));
  }

  void PutLayers(const ParamSet& p) {
    Put<std::uint32_t>(static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
      Put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.rows()));
      Put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.cols()));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) Put<double>(l.weight(r, c));
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) Put<double>(l.bias[r]);
    }
  }

 private:
  std::ostream& os_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& is) : is_(is) {}

  template <typename T>
  T Get() {
    std::array<char, sizeof(T)> bytes;
    if (!is_.read(bytes.data(), sizeof(T))) throw CheckpointError("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  ParamSet GetLayers() {
    ParamSet p;
    const auto n = Get<std::uint32_t>();
    if (n > 4096) throw CheckpointError("checkpoint layer count implausible");
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto rows = Get<std::uint32_t>();
      const auto cols = Get<std::uint32_t>();
      if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20)) {
        throw CheckpointError("checkpoint layer shape implausible");
      }
      DenseLayer l{Matrix(rows, cols), Vector(rows)};
      for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = Get<double>();
      }
      for (std::uint32_t r = 0; r < rows; ++r) l.bias[r] = Get<double>();
      p.layers.push_back(std::move(l));
    }
    return p;
  }

 private:
  std::istream& is_;
};

}  // namespace detail

inline void WriteCheckpoint(std::ostream& os, const Checkpoint& ckpt) {
  detail::ByteWriter w(os);
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.Put<std::uint32_t>(kCheckpointVersion);
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.kind));
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.sizes.size()));
  for (int s : ckpt.sizes) w.Put<std::int32_t>(s);
  w.Put<std::int32_t>(ckpt.num_actions);
  w.Put<std::uint8_t>(ckpt.relu_output ? 1 : 0);
  w.PutLayers(ckpt.params);
  w.Put<std::uint8_t>(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const AdamState& a = *ckpt.optimizer;
    w.Put<std::int64_t>(a.step);
    w.Put<double>(a.beta1);
    w.Put<double>(a.beta2);
    w.Put<double>(a.epsilon);
    w.PutLayers(a.m);
    w.PutLayers(a.v);
  }
  if (!os) throw CheckpointError("checkpoint write failed");
}

inline Checkpoint ReadCheckpoint(std::istream& is) {
  std::array<char, 8> magic;
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointError("not a ratelab checkpoint");
  }
  detail::ByteReader r(is);
  const auto version = r.Get<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto kind = r.Get<std::uint32_t>();
  if (kind > 1) throw CheckpointError("unknown checkpoint kind");
  ckpt.kind = static_cast<CheckpointKind>(kind);
  const auto n_sizes = r.Get<std::uint32_t>();
  if (n_sizes > 4096) throw CheckpointError("checkpoint size list implausible");
  for (std::uint32_t i = 0; i < n_sizes; ++i) ckpt.sizes.push_back(r.Get<std::int32_t>());
  ckpt.num_actions = r.Get<std::int32_t>();
  ckpt.relu_output = r.Get<std::uint8_t>() != 0;
  ckpt.params = r.GetLayers();
  if (r.Get<std::uint8_t>() != 0) {
    AdamState a;
    a.step = r.Get<std::int64_t>();
    a.beta1 = r.Get<double>();
    a.beta2 = r.Get<double>();
    a.epsilon = r.Get<double>();
    a.m = r.GetLayers();
    a.v = r.GetLayers();
    if (!a.m.SameShape(ckpt.params) || !a.v.SameShape(ckpt.params)) {
      throw CheckpointError("optimizer moments do not match parameters");
    }
    ckpt.optimizer = std::move(a);
  }
  return ckpt;
}

inline void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  WriteCheckpoint(os, ckpt);
}

inline Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  return ReadCheckpoint(is);
}

}  // namespace ratelab
