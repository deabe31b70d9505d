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

#include "priorseq/langmodel.h"

#include <cmath>
#include <numeric>
#include <optional>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "langmodel";

class LmSession : public PriorSession {
 public:
  explicit LmSession(const LmPrior& prior)
      : prior_(prior), state_(prior.lm().decoder().InitState(nullptr)) {}

  const MaskVector& Current() override {
    if (!mask_) {
      const Vector logits = prior_.lm().decoder().Step(&state_);
      const Vector probs = MaskedSoftmax(logits, nullptr);
      mask_ = ThresholdMask(probs, prior_.schedule().At(step_), &fallbacks_);
    }
    return *mask_;
  }

  void Advance(TokenId token) override {
    // The LM must consume the current position before the next token.
    if (!mask_) Current();
    state_.history.push_back(token);
    ++step_;
    mask_.reset();
  }

  int64_t fallbacks() const override { return fallbacks_; }

 private:
  const LmPrior& prior_;
  DecoderState state_;
  std::optional<MaskVector> mask_;
  int step_ = 0;
  int64_t fallbacks_ = 0;
};

}  // namespace

double ThresholdSchedule::At(int t) const {
  return eta0 * std::pow(growth, t);
}

void ThresholdSchedule::Validate() const {
  if (!(eta0 > 0.0) || !(growth >= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "threshold schedule needs eta0 > 0 and growth >= 1");
  }
}

LanguageModel LanguageModel::Create(int vocab, int embed, int hidden,
                                    Rng* rng) {
  ModelDims dims;
  dims.arch = Arch::kLanguageModel;
  dims.vocab = vocab;
  dims.embed = embed;
  dims.hidden = hidden;
  return LanguageModel(Decoder::Create(dims, rng));
}

LanguageModel LanguageModel::FromCheckpoint(const Checkpoint& ckpt) {
  Decoder decoder = Decoder::FromCheckpoint(ckpt);
  if (decoder.dims().arch != Arch::kLanguageModel) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "checkpoint is not a language model");
  }
  return LanguageModel(std::move(decoder));
}

Vector LanguageModel::NextWordDistribution(
    std::span<const TokenId> history) const {
  DecoderState state = decoder_.InitState(nullptr);
  for (TokenId token : history) {
    decoder_.Step(&state);
    state.history.push_back(token);
  }
  return MaskedSoftmax(decoder_.Step(&state), nullptr);
}

double LanguageModel::CrossEntropy(const std::vector<TokenSeq>& sentences) const {
  double total = 0.0;
  size_t tokens = 0;
  for (const auto& s : sentences) {
    total -= decoder_.SequenceLogProb(nullptr, s, nullptr);
    tokens += s.size();
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

std::vector<double> ContinueLanguageModelTraining(
    LanguageModel* lm, const std::vector<TokenSeq>& sentences,
    const LmTrainConfig& config) {
  if (sentences.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no training sentences");
  }
  if (config.batch < 1 || config.epochs < 0) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "batch must be >= 1 and epochs >= 0");
  }
  Decoder& decoder = lm->decoder();
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamState adam = InitAdam(decoder.params(), adam_config);
  ParamSet grads = decoder.params().ZerosLike();
  Rng rng = Rng::Stream(config.seed, "lm-shuffle");
  std::vector<size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order.begin(), order.end());
    double epoch_nll = 0.0;
    size_t epoch_tokens = 0;
    for (size_t start = 0; start < order.size(); start += config.batch) {
      const size_t end = std::min(order.size(), start + config.batch);
      size_t batch_tokens = 0;
      for (size_t i = start; i < end; ++i) {
        batch_tokens += sentences[order[i]].size();
      }
      grads.SetZero();
      for (size_t i = start; i < end; ++i) {
        const TokenSeq& s = sentences[order[i]];
        const std::vector<double> weights(
            s.size(), -1.0 / static_cast<double>(batch_tokens));
        // Weighted objective is this sentence's share of the batch mean NLL.
        epoch_nll += decoder.SequenceObjective(nullptr, s, nullptr, weights,
                                               1.0, &grads) *
                     static_cast<double>(batch_tokens);
      }
      ClipGlobalNorm(&grads, config.clip);
      AdamUpdate(&adam, &decoder.params(), grads);
      epoch_tokens += batch_tokens;
    }
    history.push_back(epoch_nll / static_cast<double>(epoch_tokens));
  }
  return history;
}

LanguageModel TrainLanguageModel(const std::vector<CaptionRecord>& corpus,
                                 int vocab_size, const LmTrainConfig& config,
                                 LmTrainReport* report) {
  std::vector<TokenSeq> sentences;
  for (const auto& rec : corpus) {
    if (rec.split != Split::kTrain) continue;
    for (const auto& ref : rec.references) sentences.push_back(ref);
  }
  if (sentences.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule,
                "no training-split references for the language model");
  }
  Rng init = Rng::Stream(config.seed, "init-lm");
  LanguageModel lm =
      LanguageModel::Create(vocab_size, config.embed, config.hidden, &init);
  auto curve = ContinueLanguageModelTraining(&lm, sentences, config);
  if (report != nullptr) report->epoch_cross_entropy = std::move(curve);
  return lm;
}

MaskVector ThresholdMask(const Vector& probs, double eta, int64_t* counter) {
  MaskVector mask = MaskVector::Zeros(static_cast<size_t>(probs.size()));
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (probs[k] >= eta) {
      mask.bits[k] = 1;
      ++mask.cardinality;
    }
  }
  if (mask.empty()) {
    mask.bits[MaskedArgmax(probs, nullptr)] = 1;
    mask.cardinality = 1;
    if (counter != nullptr) ++*counter;
  }
  return mask;
}

MaskVector LmMask(const LanguageModel& lm, std::span<const TokenId> history,
                  const ThresholdSchedule& schedule, int t, int64_t* counter) {
  schedule.Validate();
  return ThresholdMask(lm.NextWordDistribution(history), schedule.At(t),
                       counter);
}

std::unique_ptr<PriorSession> LmPrior::Begin() const {
  return std::make_unique<LmSession>(*this);
}

}  // namespace priorseq
