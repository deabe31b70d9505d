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

#ifndef PRIORSEQ_LANGMODEL_H_
#define PRIORSEQ_LANGMODEL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/checkpoint.h"
#include "priorseq/corpus.h"
#include "priorseq/policy.h"

namespace priorseq {

// eta(t) = eta0 * growth^t for step t = 0, 1, ...
struct ThresholdSchedule {
  double eta0 = 5e-5;
  double growth = 2.0;

  double At(int t) const;
  void Validate() const;
};

// Unconditional LSTM language model over captions: START-prefixed,
// END-terminated, with its own embeddings.
class LanguageModel {
 public:
  static LanguageModel Create(int vocab, int embed, int hidden, Rng* rng);
  static LanguageModel FromCheckpoint(const Checkpoint& ckpt);
  void Save(Checkpoint* ckpt) const { decoder_.Save(ckpt); }

  const Decoder& decoder() const { return decoder_; }
  Decoder& decoder() { return decoder_; }
  int vocab_size() const { return decoder_.dims().vocab; }

  // p(. | START, history) from an unmasked softmax.
  Vector NextWordDistribution(std::span<const TokenId> history) const;

  // Mean negative log-likelihood per predicted token (END included).
  double CrossEntropy(const std::vector<TokenSeq>& sentences) const;

 private:
  explicit LanguageModel(Decoder decoder) : decoder_(std::move(decoder)) {}

  Decoder decoder_;
};

struct LmTrainConfig {
  int embed = 64;
  int hidden = 64;
  int epochs = 10;
  int batch = 20;
  double lr = 1e-3;
  double clip = 5.0;
  uint64_t seed = 1;
};

struct LmTrainReport {
  std::vector<double> epoch_cross_entropy;  // training mean per epoch
};

// Maximum likelihood with Adam on the training-split references.
LanguageModel TrainLanguageModel(const std::vector<CaptionRecord>& corpus,
                                 int vocab_size, const LmTrainConfig& config,
                                 LmTrainReport* report = nullptr);

// Runs Adam epochs on an existing model; returns per-epoch training
// cross-entropy.
std::vector<double> ContinueLanguageModelTraining(
    LanguageModel* lm, const std::vector<TokenSeq>& sentences,
    const LmTrainConfig& config);

// 1 where p(k | history) >= eta(t). When no word clears the threshold the
// single most probable word (lowest id on ties) is allowed and `*counter`,
// if given, is incremented.
MaskVector LmMask(const LanguageModel& lm, std::span<const TokenId> history,
                  const ThresholdSchedule& schedule, int t,
                  int64_t* counter = nullptr);

// Same rule applied to an already computed distribution.
MaskVector ThresholdMask(const Vector& probs, double eta,
                         int64_t* counter = nullptr);

class LmPrior : public ActionPrior {
 public:
  LmPrior(const LanguageModel& lm, ThresholdSchedule schedule)
      : lm_(lm), schedule_(schedule) {
    schedule_.Validate();
  }

  std::unique_ptr<PriorSession> Begin() const override;
  size_t vocab_size() const override { return lm_.vocab_size(); }
  std::string Describe() const override { return "lm"; }

  const LanguageModel& lm() const { return lm_; }
  const ThresholdSchedule& schedule() const { return schedule_; }

 private:
  const LanguageModel& lm_;
  ThresholdSchedule schedule_;
};

}  // namespace priorseq

#endif  // PRIORSEQ_LANGMODEL_H_
