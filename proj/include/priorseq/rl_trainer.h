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


#ifndef PRIORSEQ_RL_TRAINER_H_
#define PRIORSEQ_RL_TRAINER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/corpus.h"
#include "priorseq/learning_curve.h"
#include "priorseq/metrics.h"
#include "priorseq/neural.h"
#include "priorseq/policy.h"

namespace priorseq {

// Terminal reward of a decoded sequence against one item's references.
using RewardFn =
    std::function<double(const TokenSeq& candidate, const CaptionRecord& item)>;

// Metric ids: "cider-d", "cider", "bleu4", "rouge-l". CIDEr document
// frequencies come from the references of `df_corpus`.
RewardFn MakeReward(const std::string& metric,
                    const std::vector<CaptionRecord>& df_corpus);

struct RolloutRecord {
  TokenSeq sample;
  std::vector<double> log_probs;
  double reward = 0.0;
  TokenSeq baseline;
  double baseline_reward = 0.0;
  double advantage() const { return reward - baseline_reward; }
  // Rewards of all k draws in draw order; the retained one is a maximum.
  std::vector<double> candidate_rewards;
  std::vector<int> mask_sizes;
  int64_t fallbacks = 0;
};

struct TrainConfig {
  std::string reward = "cider-d";
  int k = 10;
  int batch = 20;
  double lr = 5e-5;
  double anneal = 0.2;
  int patience = 10;
  double clip = 5.0;
  int epochs = 30;
  int max_len = 16;
  double temperature = 1.0;
  // Also push gradient through the k-1 discarded samples (each against the
  // greedy baseline, weighted 1/k).
  bool average_all = false;
  // Validation decodes use the same prior as training.
  bool constrain_at_inference = true;
  // Validation CIDEr is computed after stripping bad endings.
  bool strip_for_validation = false;
  uint64_t seed = 1;
  int threads = 1;
  // Zero the wall-clock column so curves compare byte for byte.
  bool deterministic = false;

  void Validate() const;
};

struct StepDiagnostics {
  double mean_reward = 0.0;
  double mean_baseline = 0.0;
  double mean_advantage = 0.0;
  double mean_mask_size = 0.0;
  double bad_end_rate = 0.0;
  int64_t fallbacks = 0;
  double grad_norm = 0.0;
  bool updated = false;
  std::vector<RolloutRecord> rollouts;
};

// Items of one split with their features; `batch` indexes into it.
struct TrainData {
  const std::vector<CaptionRecord>& records;
  const std::vector<FeatureGrid>& features;
};

// One self-critical update over `batch`. For each item, k samples are drawn
// under `prior`, the best is kept, and the greedy decode under the same
// prior is the baseline. Loss is -(r(w^s) - r(w_bar)) * sum_t log p(w^s_t),
// summed over items, clipped, and applied with Adam. An all-zero gradient
// leaves parameters and optimizer state untouched. Randomness for item i
// comes from the "rollout" stream at (step_index, batch[i]).
StepDiagnostics SelfCriticalStep(Decoder* policy, AdamState* adam,
                                 const TrainData& data,
                                 std::span<const size_t> batch,
                                 const TrainConfig& config,
                                 const ActionPrior* prior,
                                 const RewardFn& reward,
                                 const Vocabulary& vocab,
                                 uint64_t step_index);

// Gradient of advantage * log softmax(logits)[action] with respect to the
// logits: advantage * (e_action - p).
Vector ScoreFunctionGradient(const Vector& logits, TokenId action,
                             double advantage);

struct EvalResult {
  double cider_d = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double bad_end_rate = 0.0;
  double mean_mask_size = 0.0;
  int64_t fallbacks = 0;
  std::vector<TokenSeq> predictions;
};

// Greedy decodes of every item scored against its references. CIDEr
// document frequencies come from the evaluated split.
EvalResult EvaluatePolicy(const Decoder& policy, const TrainData& data,
                          const ActionPrior* prior, const Vocabulary& vocab,
                          int max_len, bool strip_bad_endings, int threads);

struct RlResult {
  LearningCurve curve;
  std::vector<double> wall_seconds;  // cumulative, one per epoch
  int anneals = 0;
};

// Epochs of SelfCriticalStep over shuffled batches, each followed by a
// validation pass. The learning rate is multiplied by `anneal` once
// validation CIDEr-D has not improved for `patience` epochs.
RlResult TrainRl(Decoder* policy, const TrainData& train, const TrainData& val,
                 const TrainConfig& config, const ActionPrior* prior,
                 const Vocabulary& vocab);

struct MleConfig {
  int epochs = 10;
  int batch = 20;
  double lr = 5e-4;
  double clip = 5.0;
  int max_len = 16;
  uint64_t seed = 1;
  int threads = 1;
};

struct MleReport {
  std::vector<double> train_loss;  // mean per-token NLL per epoch
  std::vector<double> val_cider;   // greedy CIDEr-D after each epoch
  int best_epoch = 0;              // 1-based; 0 when no epoch ran
};

// Teacher-forced cross-entropy over every reference of every training item.
// The parameters of the epoch with the highest validation CIDEr-D are kept
// (the first such epoch on ties).
MleReport TrainMle(Decoder* policy, const TrainData& train,
                   const TrainData& val, const MleConfig& config,
                   const Vocabulary& vocab);

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
// exception is rethrown after all workers stop.
void ParallelFor(size_t n, int threads, const std::function<void(size_t)>& fn);

}  // namespace priorseq

#endif  // PRIORSEQ_RL_TRAINER_H_
