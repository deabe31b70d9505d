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

#ifndef PRIORSEQ_CHECKPOINT_H_
#define PRIORSEQ_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "priorseq/neural.h"
#include "priorseq/tensor.h"

namespace priorseq {

// Binary tensor archive: magic "PSQC", version u32, count u32, then per
// tensor a u16 name length, UTF-8 name, u8 rank, u32 dims and little-endian
// f64 values. Tensor order is preserved.
class Checkpoint {
 public:
  struct Tensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<double> values;
  };

  void PutMatrix(const std::string& name, const Matrix& m);
  void PutVector(const std::string& name, const Vector& v);
  void PutScalar(const std::string& name, double value);
  // Each tensor of `params` under "<prefix><name>".
  void PutParams(const std::string& prefix, const ParamSet& params);
  // Optimizer state under "adam/".
  void PutAdam(const AdamState& state);

  bool Contains(const std::string& name) const;
  const Tensor& Get(const std::string& name) const;
  // Rank 2 as stored; rank 1 as n x 1; rank 0 as 1 x 1.
  Matrix GetMatrix(const std::string& name) const;
  Vector GetVector(const std::string& name) const;
  double GetScalar(const std::string& name) const;
  // Tensors whose names start with `prefix`, prefix stripped, stored order.
  ParamSet GetParams(const std::string& prefix) const;
  // Restores Adam state for parameters laid out like `params`.
  AdamState GetAdam(const ParamSet& params) const;
  bool HasAdam() const { return Contains("adam/step"); }

  const std::vector<Tensor>& tensors() const { return tensors_; }

  void Save(const std::filesystem::path& path) const;
  static Checkpoint Load(const std::filesystem::path& path);

 private:
  void Put(Tensor t);

  std::vector<Tensor> tensors_;
};

}  // namespace priorseq

#endif  // PRIORSEQ_CHECKPOINT_H_
