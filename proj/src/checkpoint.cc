// Copyright 2026 The PriorSeq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "priorseq/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "neural";
constexpr char kMagic[4] = {'P', 'S', 'Q', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void WriteLe(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::kMalformedInput, kModule, "truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void Checkpoint::Put(Tensor t) {
  for (auto& existing : tensors_) {
    if (existing.name == t.name) {
      existing = std::move(t);
      return;
    }
  }
  tensors_.push_back(std::move(t));
}

void Checkpoint::PutMatrix(const std::string& name, const Matrix& m) {
  Tensor t;
  t.name = name;
  t.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  t.values.assign(m.data(), m.data() + m.size());
  Put(std::move(t));
}

void Checkpoint::PutVector(const std::string& name, const Vector& v) {
  Tensor t;
  t.name = name;
  t.dims = {static_cast<uint32_t>(v.size())};
  t.values.assign(v.data(), v.data() + v.size());
  Put(std::move(t));
}

void Checkpoint::PutScalar(const std::string& name, double value) {
  Put(Tensor{name, {}, {value}});
}

void Checkpoint::PutParams(const std::string& prefix, const ParamSet& params) {
  for (size_t i = 0; i < params.size(); ++i) {
    PutMatrix(prefix + params.name(i), params.value(i));
  }
}

void Checkpoint::PutAdam(const AdamState& state) {
  PutScalar("adam/step", static_cast<double>(state.step));
  PutScalar("adam/lr", state.config.lr);
  PutScalar("adam/beta1", state.config.beta1);
  PutScalar("adam/beta2", state.config.beta2);
  PutScalar("adam/eps", state.config.eps);
  PutParams("adam/m/", state.m);
  PutParams("adam/v/", state.v);
}

bool Checkpoint::Contains(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const Tensor& t) { return t.name == name; });
}

const Checkpoint::Tensor& Checkpoint::Get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::kMalformedInput, kModule,
              "checkpoint has no tensor '" + name + "'");
}

Matrix Checkpoint::GetMatrix(const std::string& name) const {
  const Tensor& t = Get(name);
  Eigen::Index rows = 1, cols = 1;
  if (t.dims.size() == 1) {
    rows = t.dims[0];
  } else if (t.dims.size() >= 2) {
    rows = t.dims[0];
    cols = 1;
    for (size_t i = 1; i < t.dims.size(); ++i) cols *= t.dims[i];
  }
  Matrix m(rows, cols);
  std::copy(t.values.begin(), t.values.end(), m.data());
  return m;
}

Vector Checkpoint::GetVector(const std::string& name) const {
  const Tensor& t = Get(name);
  Vector v(static_cast<Eigen::Index>(t.values.size()));
  std::copy(t.values.begin(), t.values.end(), v.data());
  return v;
}

double Checkpoint::GetScalar(const std::string& name) const {
  const Tensor& t = Get(name);
  if (t.values.size() != 1) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "tensor '" + name + "' is not a scalar");
  }
  return t.values[0];
}

ParamSet Checkpoint::GetParams(const std::string& prefix) const {
  ParamSet params;
  for (const auto& t : tensors_) {
    if (t.name.rfind(prefix, 0) != 0) continue;
    params.Add(t.name.substr(prefix.size()), GetMatrix(t.name));
  }
  return params;
}

AdamState Checkpoint::GetAdam(const ParamSet& params) const {
  AdamState state;
  state.step = static_cast<int64_t>(GetScalar("adam/step"));
  state.config.lr = GetScalar("adam/lr");
  state.config.beta1 = GetScalar("adam/beta1");
  state.config.beta2 = GetScalar("adam/beta2");
  state.config.eps = GetScalar("adam/eps");
  state.m = params.ZerosLike();
  state.v = params.ZerosLike();
  for (size_t i = 0; i < params.size(); ++i) {
    state.m.value(i) = GetMatrix("adam/m/" + params.name(i));
    state.v.value(i) = GetMatrix("adam/v/" + params.name(i));
  }
  if (!state.m.SameLayout(params) || !state.v.SameLayout(params)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "stored Adam moments do not match the parameters");
  }
  return state;
}

void Checkpoint::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, kModule, "cannot write " + path.string());
  out.write(kMagic, 4);
  WriteLe<uint32_t>(out, kVersion);
  WriteLe<uint32_t>(out, static_cast<uint32_t>(tensors_.size()));
  for (const auto& t : tensors_) {
    WriteLe<uint16_t>(out, static_cast<uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    WriteLe<uint8_t>(out, static_cast<uint8_t>(t.dims.size()));
    for (uint32_t d : t.dims) WriteLe<uint32_t>(out, d);
    for (double v : t.values) WriteLe<double>(out, v);
  }
}

Checkpoint Checkpoint::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, kModule, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                path.string() + " is not a checkpoint");
  }
  const auto version = ReadLe<uint32_t>(in);
  if (version != kVersion) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = ReadLe<uint32_t>(in);
  Checkpoint ckpt;
  for (uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name.resize(ReadLe<uint16_t>(in));
    if (!in.read(t.name.data(), static_cast<std::streamsize>(t.name.size()))) {
      throw Error(ErrorCode::kMalformedInput, kModule, "truncated tensor name");
    }
    const auto rank = ReadLe<uint8_t>(in);
    size_t n = 1;
    for (uint8_t r = 0; r < rank; ++r) {
      t.dims.push_back(ReadLe<uint32_t>(in));
      n *= t.dims.back();
    }
    t.values.resize(n);
    for (auto& v : t.values) v = ReadLe<double>(in);
    ckpt.tensors_.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace priorseq
