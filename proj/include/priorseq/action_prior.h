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

#ifndef PRIORSEQ_ACTION_PRIOR_H_
#define PRIORSEQ_ACTION_PRIOR_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "priorseq/corpus.h"

namespace priorseq {

// Per-step indicator over the vocabulary: 1 where a token may be emitted.
struct MaskVector {
  std::vector<uint8_t> bits;
  int cardinality = 0;

  static MaskVector Zeros(size_t vocab_size);
  static MaskVector Ones(size_t vocab_size);
  static MaskVector FromIds(size_t vocab_size, std::span<const TokenId> ids);

  size_t size() const { return bits.size(); }
  bool allows(TokenId id) const { return bits[id] != 0; }
  bool empty() const { return cardinality == 0; }
  std::vector<TokenId> Ids() const;

  bool operator==(const MaskVector&) const = default;
};

// Mask state that follows one decode. Sessions are single-threaded; the
// prior that creates them is shared and immutable.
class PriorSession {
 public:
  virtual ~PriorSession() = default;
  // Never empty: implementations fall back or throw kMaskEmpty.
  virtual const MaskVector& Current() = 0;
  virtual void Advance(TokenId token) = 0;
  // Number of steps whose mask came from a fallback path.
  virtual int64_t fallbacks() const = 0;
};

class ActionPrior {
 public:
  virtual ~ActionPrior() = default;
  virtual std::unique_ptr<PriorSession> Begin() const = 0;
  virtual size_t vocab_size() const = 0;
  virtual std::string Describe() const = 0;
};

}  // namespace priorseq

#endif  // PRIORSEQ_ACTION_PRIOR_H_
