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

#include <gtest/gtest.h>

#include "priorseq/error.h"
#include "priorseq/ngram_prior.h"
#include "priorseq/synthetic.h"
#include "test_util.h"

namespace priorseq {
namespace {

struct Fixture {
  Vocabulary vocab;
  SplitView train, val;
};

Fixture MakeFixture(int items = 60) {
  const SyntheticTask task = GenerateSyntheticTask(3, items, SyntheticConfig{});
  Fixture f;
  f.vocab = Vocabulary::Build(TrainingSentences(task.captions), 1);
  const auto records = EncodeCaptions(task.captions, f.vocab);
  f.train = SelectSplit(records, task.features, Split::kTrain);
  f.val = SelectSplit(records, task.features, Split::kVal);
  return f;
}

Decoder SmallPolicy(const Fixture& f, uint64_t seed = 1) {
  ModelDims dims;
  dims.arch = Arch::kPlain;
  dims.vocab = static_cast<int>(f.vocab.size());
  dims.embed = 8;
  dims.hidden = 8;
  dims.feature_dim = f.train.features[0].dim();
  Rng rng(seed);
  return Decoder::Create(dims, &rng);
}

TrainConfig SmallConfig() {
  TrainConfig c;
  c.k = 4;
  c.batch = 8;
  c.lr = 1e-3;
  c.epochs = 2;
  c.max_len = 10;
  c.deterministic = true;
  return c;
}

std::vector<size_t> FirstN(size_t n) {
  std::vector<size_t> b(n);
  for (size_t i = 0; i < n; ++i) b[i] = i;
  return b;
}

TEST(SelfCriticalTest, KeepsFirstBestOfKAndItsReward) {
  const Fixture f = MakeFixture();
  Decoder policy = SmallPolicy(f);
  AdamState adam = InitAdam(policy.params(), AdamConfig{});
  const TrainData data{f.train.records, f.train.features};
  const RewardFn reward = MakeReward("cider-d", f.train.records);
  TrainConfig cfg = SmallConfig();
  cfg.k = 6;
  const auto batch = FirstN(8);
  const StepDiagnostics d = SelfCriticalStep(&policy, &adam, data, batch, cfg,
                                             nullptr, reward, f.vocab, 0);
  ASSERT_EQ(d.rollouts.size(), 8u);
  double mean = 0.0;
  for (size_t i = 0; i < 8; ++i) {
    const RolloutRecord& r = d.rollouts[i];
    ASSERT_EQ(r.candidate_rewards.size(), 6u);
    const auto best = std::max_element(r.candidate_rewards.begin(),
                                       r.candidate_rewards.end());
    EXPECT_EQ(r.reward, *best);
    EXPECT_DOUBLE_EQ(reward(r.sample, f.train.records[i]), r.reward);
    EXPECT_DOUBLE_EQ(reward(r.baseline, f.train.records[i]),
                     r.baseline_reward);
    EXPECT_EQ(r.log_probs.size(), r.sample.size());
    mean += r.reward / 8;
  }
  EXPECT_NEAR(d.mean_reward, mean, 1e-12);
}

TEST(SelfCriticalTest, ZeroAdvantageLeavesParametersUntouched) {
  const Fixture f = MakeFixture();
  Decoder policy = SmallPolicy(f);
  const ParamSet before = policy.params();
  AdamState adam = InitAdam(policy.params(), AdamConfig{});
  const TrainData data{f.train.records, f.train.features};
  const RewardFn constant = [](const TokenSeq&, const CaptionRecord&) {
    return 0.7;
  };
  for (bool all : {false, true}) {
    TrainConfig cfg = SmallConfig();
    cfg.average_all = all;
    const StepDiagnostics d = SelfCriticalStep(
        &policy, &adam, data, FirstN(8), cfg, nullptr, constant, f.vocab, 0);
    EXPECT_FALSE(d.updated);
    EXPECT_EQ(d.mean_advantage, 0.0);
  }
  EXPECT_TRUE(policy.params() == before);
  EXPECT_EQ(adam.step, 0);
}

// Rewards the sample only when it differs from the greedy decode, so the
// advantage is +1 or -1 depending on `sign`.
void CheckAdvantageDirection(double sign) {
  const Fixture f = MakeFixture();
  const TrainData data{f.train.records, f.train.features};
  int checked = 0;
  for (size_t idx = 0; idx < f.train.records.size() && checked < 5; ++idx) {
    Decoder policy = SmallPolicy(f, 5);
    DecodeConfig dc;
    dc.max_len = 10;
    const TokenSeq greedy =
        Decode(policy, &f.train.features[idx], dc, nullptr, nullptr).tokens;
    const RewardFn reward = [&](const TokenSeq& s, const CaptionRecord&) {
      return s == greedy ? 0.0 : sign;
    };
    TrainConfig cfg = SmallConfig();
    cfg.k = 1;
    cfg.lr = 1e-5;
    AdamState adam = InitAdam(policy.params(), AdamConfig{});
    const std::vector<size_t> batch = {idx};
    const Decoder old = policy;
    const StepDiagnostics d = SelfCriticalStep(&policy, &adam, data, batch,
                                               cfg, nullptr, reward, f.vocab,
                                               idx);
    const RolloutRecord& r = d.rollouts[0];
    if (r.sample == greedy) {
      EXPECT_FALSE(d.updated);
      continue;
    }
    ++checked;
    ASSERT_TRUE(d.updated);
    const double lp_old =
        old.SequenceLogProb(&f.train.features[idx], r.sample, nullptr);
    const double lp_new =
        policy.SequenceLogProb(&f.train.features[idx], r.sample, nullptr);
    if (sign > 0) {
      EXPECT_GT(lp_new, lp_old);
    } else {
      EXPECT_LT(lp_new, lp_old);
    }
  }
  EXPECT_EQ(checked, 5);
}

TEST(SelfCriticalTest, PositiveAdvantageRaisesSampleLikelihood) {
  CheckAdvantageDirection(1.0);
}

TEST(SelfCriticalTest, NegativeAdvantageLowersSampleLikelihood) {
  CheckAdvantageDirection(-1.0);
}

TEST(SelfCriticalTest, PriorRestrictsEverySampledToken) {
  const Fixture f = MakeFixture();
  const NGramPrior prior =
      NGramPrior::Build(f.train.records, 3, 2, f.vocab.size());
  Decoder policy = SmallPolicy(f);
  AdamState adam = InitAdam(policy.params(), AdamConfig{});
  const TrainData data{f.train.records, f.train.features};
  const StepDiagnostics d = SelfCriticalStep(
      &policy, &adam, data, FirstN(8), SmallConfig(), &prior,
      MakeReward("cider-d", f.train.records), f.vocab, 0);
  EXPECT_LT(d.mean_mask_size, static_cast<double>(f.vocab.size()) / 4);
  for (const auto& r : d.rollouts) {
    auto session = prior.Begin();
    for (TokenId tok : r.sample) {
      EXPECT_TRUE(session->Current().allows(tok));
      session->Advance(tok);
    }
  }
}

TEST(SelfCriticalTest, IdenticalAcrossThreadCounts) {
  const Fixture f = MakeFixture();
  const TrainData data{f.train.records, f.train.features};
  const RewardFn reward = MakeReward("cider-d", f.train.records);
  std::vector<ParamSet> results;
  for (int threads : {1, 3}) {
    Decoder policy = SmallPolicy(f);
    AdamState adam = InitAdam(policy.params(), AdamConfig{});
    TrainConfig cfg = SmallConfig();
    cfg.threads = threads;
    SelfCriticalStep(&policy, &adam, data, FirstN(12), cfg, nullptr, reward,
                     f.vocab, 7);
    results.push_back(policy.params());
  }
  EXPECT_TRUE(results[0] == results[1]);
}

TEST(ScoreFunctionTest, BaselineKeepsMeanAndCutsVariance) {
  Vector logits(5);
  logits << 0.2, -0.5, 1.0, 0.1, 0.6;
  const double rewards[5] = {1.0, 0.4, 1.3, 0.9, 1.6};
  const Vector p = MaskedSoftmax(logits, nullptr);
  const double b = rewards[MaskedArgmax(logits, nullptr)];
  Vector exact = Vector::Zero(5);
  for (int a = 0; a < 5; ++a) {
    exact += p[a] * ScoreFunctionGradient(logits, a, rewards[a]);
  }
  Rng rng(17);
  const int n = 100000;
  Vector sum_plain = Vector::Zero(5), sum_base = Vector::Zero(5);
  Vector sq_plain = Vector::Zero(5), sq_base = Vector::Zero(5);
  for (int i = 0; i < n; ++i) {
    const TokenId a = GumbelSample(logits, nullptr, &rng);
    const Vector g1 = ScoreFunctionGradient(logits, a, rewards[a]);
    const Vector g2 = ScoreFunctionGradient(logits, a, rewards[a] - b);
    sum_plain += g1;
    sum_base += g2;
    sq_plain += g1.cwiseProduct(g1);
    sq_base += g2.cwiseProduct(g2);
  }
  const Vector mean_plain = sum_plain / n, mean_base = sum_base / n;
  const Vector var_plain = sq_plain / n - mean_plain.cwiseProduct(mean_plain);
  const Vector var_base = sq_base / n - mean_base.cwiseProduct(mean_base);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(mean_plain[k], exact[k], 4 * std::sqrt(var_plain[k] / n));
    EXPECT_NEAR(mean_base[k], exact[k], 4 * std::sqrt(var_base[k] / n));
  }
  EXPECT_LT(var_base.sum(), var_plain.sum());
  // d/dlogit of log softmax at the chosen action.
  const Vector g = ScoreFunctionGradient(logits, 2, 2.0);
  EXPECT_NEAR(g[2], 2.0 * (1.0 - p[2]), 1e-15);
  EXPECT_NEAR(g[0], -2.0 * p[0], 1e-15);
}

TEST(TrainRlTest, DeterministicRunsProduceIdenticalCurves) {
  const Fixture f = MakeFixture();
  const TrainData train{f.train.records, f.train.features};
  const TrainData val{f.val.records, f.val.features};
  std::vector<std::string> csv;
  std::vector<ParamSet> params;
  for (int threads : {1, 2}) {
    Decoder policy = SmallPolicy(f);
    TrainConfig cfg = SmallConfig();
    cfg.threads = threads;
    const RlResult r = TrainRl(&policy, train, val, cfg, nullptr, f.vocab);
    ASSERT_EQ(r.curve.rows.size(), 2u);
    EXPECT_EQ(r.curve.rows[0].seconds, 0.0);
    EXPECT_EQ(r.wall_seconds.size(), 2u);
    csv.push_back(r.curve.ToCsv());
    params.push_back(policy.params());
  }
  EXPECT_EQ(csv[0], csv[1]);
  EXPECT_TRUE(params[0] == params[1]);
}

TEST(TrainRlTest, LearningRateAnnealsAfterPatienceRunsOut) {
  const Fixture f = MakeFixture(30);
  const TrainData train{f.train.records, f.train.features};
  const std::vector<CaptionRecord> no_records;
  const std::vector<FeatureGrid> no_features;
  // An empty validation split scores 0 every epoch, so it never improves
  // after the first.
  const TrainData val{no_records, no_features};
  Decoder policy = SmallPolicy(f);
  TrainConfig cfg = SmallConfig();
  cfg.epochs = 5;
  cfg.patience = 2;
  cfg.anneal = 0.5;
  const RlResult r = TrainRl(&policy, train, val, cfg, nullptr, f.vocab);
  const std::vector<double> expected = {1e-3, 1e-3, 1e-3, 5e-4, 5e-4};
  for (size_t i = 0; i < expected.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.curve.rows[i].lr, expected[i]) << "epoch " << i + 1;
  }
  EXPECT_EQ(r.anneals, 2);
}

TEST(TrainConfigTest, ErrorsNameTheField) {
  const std::vector<std::pair<std::string, std::function<void(TrainConfig*)>>>
      cases = {{"k", [](TrainConfig* c) { c->k = 0; }},
               {"batch", [](TrainConfig* c) { c->batch = 0; }},
               {"lr", [](TrainConfig* c) { c->lr = -1; }},
               {"anneal", [](TrainConfig* c) { c->anneal = 1.5; }},
               {"temperature", [](TrainConfig* c) { c->temperature = 0; }},
               {"reward", [](TrainConfig* c) { c->reward = "meteor"; }}};
  for (const auto& [field, mutate] : cases) {
    TrainConfig c;
    mutate(&c);
    try {
      c.Validate();
      ADD_FAILURE() << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfig);
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos)
          << e.what();
    }
  }
  EXPECT_NO_THROW(TrainConfig{}.Validate());
}

TEST(RewardTest, MetricsIgnoreEndToken) {
  const Fixture f = MakeFixture();
  const CaptionRecord& item = f.train.records[0];
  const TokenSeq ref = item.references[0];
  std::vector<std::vector<TokenSeq>> corpus;
  for (const auto& r : f.train.records) {
    corpus.emplace_back();
    for (const auto& s : r.references) corpus.back().push_back(StripEnd(s));
  }
  const CiderScorer scorer(corpus, CiderVariant::kD);
  std::vector<TokenSeq> refs;
  for (const auto& s : item.references) refs.push_back(StripEnd(s));
  const RewardFn cider = MakeReward("cider-d", f.train.records);
  EXPECT_NEAR(cider(ref, item), scorer.Score(StripEnd(ref), refs), 1e-12);
  EXPECT_EQ(cider(ref, item), cider(StripEnd(ref), item));
  EXPECT_DOUBLE_EQ(MakeReward("bleu4", f.train.records)(ref, item), 1.0);
  EXPECT_DOUBLE_EQ(MakeReward("rouge-l", f.train.records)(ref, item), 1.0);
  EXPECT_THROW(MakeReward("spice", f.train.records), Error);
}

TEST(TrainMleTest, FitsTrainingCaptionsAndKeepsBestEpoch) {
  const Fixture f = MakeFixture(60);
  const TrainData train{f.train.records, f.train.features};
  const TrainData val{f.val.records, f.val.features};
  Decoder policy = SmallPolicy(f);
  MleConfig cfg;
  cfg.epochs = 6;
  cfg.batch = 8;
  cfg.lr = 0.01;
  const MleReport r = TrainMle(&policy, train, val, cfg, f.vocab);
  ASSERT_EQ(r.train_loss.size(), 6u);
  ASSERT_EQ(r.val_cider.size(), 6u);
  EXPECT_LT(r.train_loss.back(), r.train_loss.front());
  ASSERT_GE(r.best_epoch, 1);
  const auto best = std::max_element(r.val_cider.begin(), r.val_cider.end());
  EXPECT_EQ(r.best_epoch, best - r.val_cider.begin() + 1);
  const EvalResult ev =
      EvaluatePolicy(policy, val, nullptr, f.vocab, cfg.max_len, false, 1);
  EXPECT_NEAR(ev.cider_d, *best, 1e-12);
}

TEST(ParallelForTest, VisitsEveryIndexAndRethrows) {
  std::vector<int> hits(50, 0);
  ParallelFor(50, 4, [&](size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(ParallelFor(10, 3,
                           [](size_t i) {
                             if (i == 7) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
}

TEST(LearningCurveTest, CsvRoundTripAndValidation) {
  LearningCurve c;
  for (int e = 1; e <= 3; ++e) {
    CurveRow r;
    r.epoch = e;
    r.seconds = 0.25 * e;
    r.mean_reward = 0.1 * e;
    r.mean_baseline = 0.05;
    r.val_cider = 0.3 * e;
    r.val_bleu4 = 0.125;
    r.val_rouge_l = 0.5;
    r.bad_end_rate = 0.0;
    r.mean_mask_size = 7.5;
    r.fallbacks = 3 * e;
    r.lr = 5e-5;
    c.rows.push_back(r);
  }
  const std::string csv = c.ToCsv();
  EXPECT_EQ(csv.rfind(std::string(kCurveHeader) + "\n", 0), 0u);
  EXPECT_EQ(LearningCurve::FromCsv(csv).rows, c.rows);
  EXPECT_EQ(c.EpochsToReach(0.6), 2);
  EXPECT_EQ(c.EpochsToReach(5.0), -1);
  EXPECT_THROW(LearningCurve::FromCsv("epoch,foo\n1,2\n"), Error);
  try {
    LearningCurve::FromCsv(std::string(kCurveHeader) + "\n1,2,3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos)
        << e.what();
  }
  const std::string svg = c.ToSvg("run");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(CompareSvg({"a", "b"}, {c, c}).find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace priorseq
