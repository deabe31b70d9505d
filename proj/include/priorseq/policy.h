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

#ifndef PRIORSEQ_POLICY_H_
#define PRIORSEQ_POLICY_H_

#include <span>
#include <string>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/checkpoint.h"
#include "priorseq/corpus.h"
#include "priorseq/neural.h"
#include "priorseq/rng.h"

namespace priorseq {

// kPlain feeds the pooled image vector as the first input; kAttention
// re-weights the L feature locations at every step from the previous hidden
// state; kLanguageModel has no image and starts from START.
enum class Arch { kPlain, kAttention, kLanguageModel };

const char* ArchName(Arch arch);
Arch ParseArch(std::string_view name);

struct ModelDims {
  Arch arch = Arch::kPlain;
  int vocab = 0;
  int embed = 128;
  int hidden = 128;
  int feature_dim = 0;     // D, unused by kLanguageModel
  int attention_dim = 64;  // A, used by kAttention
};

struct DecoderState {
  Vector h, c;
  int t = 0;
  TokenSeq history;  // tokens emitted so far; size() == t after each commit
  Vector beta;       // attention weights of the last step
  Matrix features;   // kPlain: 1 x D pooled image; kAttention: L x D grid
  Matrix projected;  // kAttention: features * W_a^T, L x A

  void Save(Checkpoint* ckpt, const std::string& prefix) const;
  static DecoderState Load(const Checkpoint& ckpt, const std::string& prefix);
  bool operator==(const DecoderState& other) const;
};

// Intermediates of one step kept for the backward pass.
struct StepCache {
  TokenId input_word = kStartId;  // ignored on the image step
  bool image_step = false;
  LstmCache lstm;
  Matrix u;  // attention tanh activations, L x A
  Vector beta;
  Vector logits;
};

// The LSTM decoder p_theta. Parameters live in one ParamSet so the
// optimizer and checkpoints treat every architecture the same way.
class Decoder {
 public:
  static Decoder Create(const ModelDims& dims, Rng* rng);
  static Decoder FromCheckpoint(const Checkpoint& ckpt);
  void Save(Checkpoint* ckpt) const;

  const ModelDims& dims() const { return dims_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // h0 = c0 = 0. kPlain mean-pools the grid into the image vector;
  // kAttention keeps the L x D grid. `features` is ignored for the LM.
  DecoderState InitState(const FeatureGrid* features) const;

  // Consumes the step input (image, START, or history.back()) and returns
  // logits over the vocabulary. The caller appends the chosen token to
  // state->history afterwards.
  Vector Step(DecoderState* state, StepCache* cache = nullptr) const;

  // Sum over t of weights[t] * log p_t(tokens[t]) under teacher forcing,
  // where p_t is the softmax of logits / temperature restricted to
  // (*masks)[t] when masks is non-null. Adds the gradient into `grads` when
  // it is non-null.
  double SequenceObjective(const FeatureGrid* features, const TokenSeq& tokens,
                           const std::vector<MaskVector>* masks,
                           std::span<const double> weights,
                           double temperature, ParamSet* grads) const;

  // Log-probability of the whole sequence (unit weights).
  double SequenceLogProb(const FeatureGrid* features, const TokenSeq& tokens,
                         const std::vector<MaskVector>* masks,
                         double temperature = 1.0) const;

 private:
  void CheckFeatures(const FeatureGrid* features) const;

  ModelDims dims_;
  ParamSet params_;
};

enum class DecodeMode { kGreedy, kSample };

struct DecodeConfig {
  int max_len = 16;
  DecodeMode mode = DecodeMode::kGreedy;
  double temperature = 1.0;
  // Keep per-step masks so the sequence can be re-scored under them.
  bool record_masks = false;
};

struct DecodeResult {
  TokenSeq tokens;  // includes END when the decode terminated on it
  std::vector<double> log_probs;
  std::vector<int> mask_sizes;
  std::vector<MaskVector> masks;  // filled when record_masks and a prior
  int64_t fallbacks = 0;
  bool ended = false;

  double log_prob() const;
};

// Greedy (argmax, ties to lowest id) or Gumbel-max sampling, optionally
// constrained by `prior`. Log-probs are those of the masked, renormalized
// distribution actually used. `rng` may be null in greedy mode.
DecodeResult Decode(const Decoder& model, const FeatureGrid* features,
                    const DecodeConfig& config, const ActionPrior* prior,
                    Rng* rng);

}  // namespace priorseq

#endif  // PRIORSEQ_POLICY_H_
