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

#include "priorseq/rl_trainer.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "priorseq/error.h"
#include "priorseq/rng.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "rl_trainer";

std::vector<TokenSeq> StrippedRefs(const CaptionRecord& item) {
  std::vector<TokenSeq> refs;
  refs.reserve(item.references.size());
  for (const auto& r : item.references) refs.push_back(StripEnd(r));
  return refs;
}

void CheckData(const TrainData& data, const char* what) {
  if (data.records.size() != data.features.size()) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                std::string(what) + ": records and features differ in count");
  }
}

std::vector<double> Constant(size_t n, double value) {
  return std::vector<double>(n, value);
}

// Per-item work product of a rollout phase.
struct ItemOutcome {
  RolloutRecord record;
  std::optional<ParamSet> grads;
  int64_t mask_steps = 0;
  double mask_total = 0.0;
  bool bad_ending = false;
};

}  // namespace

void ParallelFor(size_t n, int threads,
                 const std::function<void(size_t)>& fn) {
  const size_t workers =
      std::min<size_t>(n, static_cast<size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

RewardFn MakeReward(const std::string& metric,
                    const std::vector<CaptionRecord>& df_corpus) {
  if (metric == "cider-d" || metric == "cider") {
    std::vector<std::vector<TokenSeq>> refs;
    for (const auto& item : df_corpus) refs.push_back(StrippedRefs(item));
    if (refs.empty()) {
      throw Error(ErrorCode::kEmptyCorpus, kModule,
                  "reward needs a non-empty document-frequency corpus");
    }
    auto scorer = std::make_shared<CiderScorer>(
        refs, metric == "cider" ? CiderVariant::kPlain : CiderVariant::kD);
    return [scorer](const TokenSeq& candidate, const CaptionRecord& item) {
      return scorer->Score(StripEnd(candidate), StrippedRefs(item));
    };
  }
  if (metric == "bleu4") {
    return [](const TokenSeq& candidate, const CaptionRecord& item) {
      return SentenceBleu(StripEnd(candidate), StrippedRefs(item));
    };
  }
  if (metric == "rouge-l") {
    return [](const TokenSeq& candidate, const CaptionRecord& item) {
      return RougeL(StripEnd(candidate), StrippedRefs(item));
    };
  }
  throw Error(ErrorCode::kConfig, kModule, "unknown reward metric: " + metric);
}

void TrainConfig::Validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kConfig, kModule, field + ": " + why);
  };
  if (k < 1) fail("k", "must be >= 1");
  if (batch < 1) fail("batch", "must be >= 1");
  if (!(lr > 0.0)) fail("lr", "must be > 0");
  if (!(anneal > 0.0 && anneal <= 1.0)) fail("anneal", "must be in (0, 1]");
  if (patience < 1) fail("patience", "must be >= 1");
  if (!(clip > 0.0)) fail("clip", "must be > 0");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (max_len < 1) fail("max_len", "must be >= 1");
  if (!(temperature > 0.0)) fail("temperature", "must be > 0");
  if (reward != "cider-d" && reward != "cider" && reward != "bleu4" &&
      reward != "rouge-l") {
    fail("reward", "unknown metric '" + reward + "'");
  }
}

Vector ScoreFunctionGradient(const Vector& logits, TokenId action,
                             double advantage) {
  Vector g = -MaskedSoftmax(logits, nullptr);
  g[action] += 1.0;
  return advantage * g;
}

StepDiagnostics SelfCriticalStep(Decoder* policy, AdamState* adam,
                                 const TrainData& data,
                                 std::span<const size_t> batch,
                                 const TrainConfig& config,
                                 const ActionPrior* prior,
                                 const RewardFn& reward,
                                 const Vocabulary& vocab,
                                 uint64_t step_index) {
  config.Validate();
  CheckData(data, "train");
  if (batch.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "empty batch");
  }
  const BadEndingLexicon lexicon = BadEndingLexicon::Default();
  const Decoder& model = *policy;
  std::vector<ItemOutcome> outcomes(batch.size());

  ParallelFor(batch.size(), config.threads, [&](size_t i) {
    const size_t idx = batch[i];
    if (idx >= data.records.size()) {
      throw Error(ErrorCode::kInvalidArgument, kModule,
                  "batch index out of range");
    }
    const CaptionRecord& item = data.records[idx];
    const FeatureGrid* features = &data.features[idx];
    Rng rng = Rng::Stream(config.seed, "rollout",
                          step_index * 1000003ULL + idx);
    DecodeConfig dc;
    dc.max_len = config.max_len;
    dc.mode = DecodeMode::kSample;
    dc.temperature = config.temperature;
    dc.record_masks = true;

    ItemOutcome& out = outcomes[i];
    std::vector<DecodeResult> samples;
    std::vector<double> rewards;
    size_t best = 0;
    for (int j = 0; j < config.k; ++j) {
      samples.push_back(Decode(model, features, dc, prior, &rng));
      rewards.push_back(reward(samples.back().tokens, item));
      if (rewards.back() > rewards[best]) best = samples.size() - 1;
      out.record.fallbacks += samples.back().fallbacks;
      for (int m : samples.back().mask_sizes) out.mask_total += m;
      out.mask_steps += static_cast<int64_t>(samples.back().mask_sizes.size());
    }
    dc.mode = DecodeMode::kGreedy;
    const DecodeResult greedy = Decode(model, features, dc, prior, nullptr);
    out.record.fallbacks += greedy.fallbacks;

    RolloutRecord& rec = out.record;
    rec.sample = samples[best].tokens;
    rec.log_probs = samples[best].log_probs;
    rec.mask_sizes = samples[best].mask_sizes;
    rec.reward = rewards[best];
    rec.baseline = greedy.tokens;
    rec.baseline_reward = reward(greedy.tokens, item);
    rec.candidate_rewards = rewards;
    out.bad_ending = lexicon.Match(vocab.Decode(rec.sample)).has_value();

    auto accumulate = [&](const DecodeResult& s, double weight) {
      if (weight == 0.0) return;
      if (!out.grads) out.grads = model.params().ZerosLike();
      const std::vector<double> w = Constant(s.tokens.size(), -weight);
      model.SequenceObjective(features, s.tokens, prior ? &s.masks : nullptr,
                              w, config.temperature, &*out.grads);
    };
    if (config.average_all) {
      for (size_t j = 0; j < samples.size(); ++j) {
        accumulate(samples[j], (rewards[j] - rec.baseline_reward) /
                                   static_cast<double>(config.k));
      }
    } else {
      accumulate(samples[best], rec.advantage());
    }
  });

  StepDiagnostics diag;
  ParamSet grads = model.params().ZerosLike();
  int64_t mask_steps = 0;
  double mask_total = 0.0;
  int64_t bad = 0;
  for (auto& out : outcomes) {
    if (out.grads) grads.AddScaled(*out.grads, 1.0);
    diag.mean_reward += out.record.reward;
    diag.mean_baseline += out.record.baseline_reward;
    diag.mean_advantage += out.record.advantage();
    diag.fallbacks += out.record.fallbacks;
    mask_steps += out.mask_steps;
    mask_total += out.mask_total;
    bad += out.bad_ending ? 1 : 0;
    diag.rollouts.push_back(std::move(out.record));
  }
  const double n = static_cast<double>(batch.size());
  diag.mean_reward /= n;
  diag.mean_baseline /= n;
  diag.mean_advantage /= n;
  diag.bad_end_rate = static_cast<double>(bad) / n;
  diag.mean_mask_size =
      mask_steps > 0 ? mask_total / static_cast<double>(mask_steps) : 0.0;

  if (!grads.AllFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, kModule,
                "non-finite policy gradient");
  }
  if (grads.SquaredNorm() == 0.0) return diag;
  diag.grad_norm = ClipGlobalNorm(&grads, config.clip);
  adam->config.lr = config.lr;
  AdamUpdate(adam, &policy->params(), grads);
  diag.updated = true;
  return diag;
}

EvalResult EvaluatePolicy(const Decoder& policy, const TrainData& data,
                          const ActionPrior* prior, const Vocabulary& vocab,
                          int max_len, bool strip_bad_endings, int threads) {
  CheckData(data, "eval");
  EvalResult result;
  if (data.records.empty()) return result;
  std::vector<DecodeResult> decodes(data.records.size());
  DecodeConfig dc;
  dc.max_len = max_len;
  dc.mode = DecodeMode::kGreedy;
  ParallelFor(decodes.size(), threads, [&](size_t i) {
    decodes[i] = Decode(policy, &data.features[i], dc, prior, nullptr);
  });
  std::vector<ScoreInput> inputs;
  int64_t steps = 0;
  double mask_total = 0.0;
  for (size_t i = 0; i < decodes.size(); ++i) {
    ScoreInput in;
    in.id = data.records[i].item_id;
    in.candidate = vocab.Decode(decodes[i].tokens);
    for (const auto& r : data.records[i].references) {
      in.references.push_back(vocab.Decode(r));
    }
    inputs.push_back(std::move(in));
    for (int m : decodes[i].mask_sizes) mask_total += m;
    steps += static_cast<int64_t>(decodes[i].mask_sizes.size());
    result.fallbacks += decodes[i].fallbacks;
    result.predictions.push_back(std::move(decodes[i].tokens));
  }
  const ScoreReport report =
      ComputeScoreReport(inputs, BadEndingLexicon::Default());
  result.cider_d = strip_bad_endings ? report.adjusted_cider_d : report.cider_d;
  result.bleu4 = strip_bad_endings ? report.adjusted_bleu4 : report.bleu4;
  result.rouge_l = strip_bad_endings ? report.adjusted_rouge_l : report.rouge_l;
  result.bad_end_rate = report.bad_endings.rate;
  result.mean_mask_size =
      steps > 0 ? mask_total / static_cast<double>(steps) : 0.0;
  return result;
}

RlResult TrainRl(Decoder* policy, const TrainData& train, const TrainData& val,
                 const TrainConfig& config, const ActionPrior* prior,
                 const Vocabulary& vocab) {
  config.Validate();
  CheckData(train, "train");
  CheckData(val, "val");
  if (train.records.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no training items");
  }
  const RewardFn reward = MakeReward(config.reward, train.records);
  TrainConfig step_config = config;
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamState adam = InitAdam(policy->params(), adam_config);

  RlResult result;
  const auto start = std::chrono::steady_clock::now();
  std::vector<size_t> order(train.records.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = -std::numeric_limits<double>::infinity();
  int stale = 0;
  uint64_t step_index = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle = Rng::Stream(config.seed, "shuffle", epoch);
    shuffle.Shuffle(order.begin(), order.end());
    double reward_sum = 0.0, baseline_sum = 0.0, mask_sum = 0.0;
    double items = 0.0, mask_weight = 0.0;
    int64_t fallbacks = 0;
    for (size_t s = 0; s < order.size(); s += config.batch) {
      const size_t e = std::min(order.size(), s + config.batch);
      const std::span<const size_t> batch(order.data() + s, e - s);
      const StepDiagnostics d =
          SelfCriticalStep(policy, &adam, train, batch, step_config, prior,
                           reward, vocab, step_index++);
      const double n = static_cast<double>(batch.size());
      reward_sum += d.mean_reward * n;
      baseline_sum += d.mean_baseline * n;
      mask_sum += d.mean_mask_size * n;
      mask_weight += n;
      items += n;
      fallbacks += d.fallbacks;
    }
    const EvalResult ev =
        EvaluatePolicy(*policy, val, config.constrain_at_inference ? prior : nullptr,
                       vocab, config.max_len, config.strip_for_validation,
                       config.threads);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    result.wall_seconds.push_back(elapsed);

    CurveRow row;
    row.epoch = epoch;
    row.seconds = config.deterministic ? 0.0 : elapsed;
    row.mean_reward = reward_sum / items;
    row.mean_baseline = baseline_sum / items;
    row.val_cider = ev.cider_d;
    row.val_bleu4 = ev.bleu4;
    row.val_rouge_l = ev.rouge_l;
    row.bad_end_rate = ev.bad_end_rate;
    row.mean_mask_size = mask_sum / mask_weight;
    row.fallbacks = fallbacks + ev.fallbacks;
    row.lr = step_config.lr;
    result.curve.rows.push_back(row);

    if (ev.cider_d > best_val) {
      best_val = ev.cider_d;
      stale = 0;
    } else if (++stale >= config.patience) {
      step_config.lr *= config.anneal;
      ++result.anneals;
      stale = 0;
    }
  }
  return result;
}

MleReport TrainMle(Decoder* policy, const TrainData& train,
                   const TrainData& val, const MleConfig& config,
                   const Vocabulary& vocab) {
  CheckData(train, "train");
  CheckData(val, "val");
  if (train.records.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no training items");
  }
  if (config.batch < 1 || config.epochs < 0 || !(config.lr > 0.0) ||
      !(config.clip > 0.0)) {
    throw Error(ErrorCode::kConfig, kModule,
                "mle: batch >= 1, epochs >= 0, lr > 0 and clip > 0 required");
  }
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  AdamState adam = InitAdam(policy->params(), adam_config);
  const Decoder& model = *policy;

  MleReport report;
  std::optional<ParamSet> best_params;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<size_t> order(train.records.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle = Rng::Stream(config.seed, "mle-shuffle", epoch);
    shuffle.Shuffle(order.begin(), order.end());
    double nll = 0.0;
    double tokens = 0.0;
    for (size_t s = 0; s < order.size(); s += config.batch) {
      const size_t e = std::min(order.size(), s + config.batch);
      double batch_tokens = 0.0;
      for (size_t i = s; i < e; ++i) {
        for (const auto& r : train.records[order[i]].references) {
          batch_tokens += static_cast<double>(r.size());
        }
      }
      if (batch_tokens == 0.0) continue;
      std::vector<ParamSet> item_grads(e - s);
      std::vector<double> item_loss(e - s, 0.0);
      ParallelFor(e - s, config.threads, [&](size_t i) {
        const size_t idx = order[s + i];
        item_grads[i] = model.params().ZerosLike();
        for (const auto& r : train.records[idx].references) {
          const std::vector<double> w = Constant(r.size(), -1.0 / batch_tokens);
          item_loss[i] += model.SequenceObjective(&train.features[idx], r,
                                                  nullptr, w, 1.0,
                                                  &item_grads[i]);
        }
      });
      ParamSet grads = model.params().ZerosLike();
      for (size_t i = 0; i < item_grads.size(); ++i) {
        grads.AddScaled(item_grads[i], 1.0);
        nll += item_loss[i] * batch_tokens;
      }
      tokens += batch_tokens;
      ClipGlobalNorm(&grads, config.clip);
      AdamUpdate(&adam, &policy->params(), grads);
    }
    report.train_loss.push_back(tokens > 0.0 ? nll / tokens : 0.0);
    if (!val.records.empty()) {
      const EvalResult ev = EvaluatePolicy(*policy, val, nullptr, vocab,
                                           config.max_len, false,
                                           config.threads);
      report.val_cider.push_back(ev.cider_d);
      if (ev.cider_d > best_val) {
        best_val = ev.cider_d;
        best_params = policy->params();
        report.best_epoch = epoch;
      }
    } else {
      report.best_epoch = epoch;
    }
  }
  if (best_params) policy->params() = *best_params;
  return report;
}

}  // namespace priorseq
