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

#include "priorseq/metrics.h"

#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "priorseq/error.h"
#include "test_util.h"

namespace priorseq {
namespace {

using json = nlohmann::json;

const std::filesystem::path kFixtures = PRIORSEQ_FIXTURE_DIR;

json LoadJson(const std::string& name) {
  return json::parse(testing::ReadFile(kFixtures / name));
}

Words Split(const std::string& s) { return Tokenize(s); }

struct MetricCorpus {
  std::vector<Words> candidates;
  std::vector<std::vector<Words>> refs;
  std::vector<std::string> ids;
};

MetricCorpus LoadCorpus() {
  MetricCorpus c;
  std::ifstream in(kFixtures / "metric_corpus.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    c.ids.push_back(j["id"]);
    c.candidates.push_back(Split(j["candidate"]));
    std::vector<Words> refs;
    for (const auto& r : j["refs"]) refs.push_back(Split(r));
    c.refs.push_back(refs);
  }
  return c;
}

struct Interned {
  std::vector<TokenSeq> candidates;
  std::vector<std::vector<TokenSeq>> refs;
};

Interned Intern(const std::vector<Words>& cands,
                const std::vector<std::vector<Words>>& refs) {
  Interner in;
  Interned out;
  for (const auto& c : cands) out.candidates.push_back(in.Intern(c));
  for (const auto& rs : refs) {
    out.refs.emplace_back();
    for (const auto& r : rs) out.refs.back().push_back(in.Intern(r));
  }
  return out;
}

void ExpectAgreement(const Interned& x, const json& expected) {
  const size_t n = x.candidates.size();
  ASSERT_EQ(expected["items"]["bleu4"].size(), n);
  EXPECT_NEAR(CorpusBleu(x.candidates, x.refs), expected["bleu4"], 1e-4);
  const CorpusScores cider_d =
      CiderCorpus(x.candidates, x.refs, CiderVariant::kD);
  const CorpusScores cider =
      CiderCorpus(x.candidates, x.refs, CiderVariant::kPlain);
  EXPECT_NEAR(cider_d.mean, expected["cider_d"], 1e-3);
  EXPECT_NEAR(cider.mean, expected["cider"], 1e-3);
  double rouge_total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double bleu = x.candidates[i].empty()
                            ? 0.0
                            : SentenceBleu(x.candidates[i], x.refs[i]);
    const double rouge = RougeL(x.candidates[i], x.refs[i]);
    rouge_total += rouge;
    EXPECT_NEAR(bleu, expected["items"]["bleu4"][i].get<double>(), 1e-4)
        << "item " << i;
    EXPECT_NEAR(rouge, expected["items"]["rouge_l"][i].get<double>(), 1e-4)
        << "item " << i;
    EXPECT_NEAR(cider_d.per_item[i],
                expected["items"]["cider_d"][i].get<double>(), 1e-3)
        << "item " << i;
    EXPECT_NEAR(cider.per_item[i], expected["items"]["cider"][i].get<double>(),
                1e-3)
        << "item " << i;
  }
  EXPECT_NEAR(rouge_total / n, expected["rouge_l"], 1e-4);
}

TEST(ReferenceScorerTest, RawCandidatesAgree) {
  const MetricCorpus c = LoadCorpus();
  ASSERT_EQ(c.candidates.size(), 50u);
  const json expected = LoadJson("metric_expected.json");
  json raw = expected["corpus"];
  raw["items"] = expected["items"];
  ExpectAgreement(Intern(c.candidates, c.refs), raw);
}

TEST(ReferenceScorerTest, StrippedCandidatesAgree) {
  const MetricCorpus c = LoadCorpus();
  const json expected = LoadJson("metric_expected.json");
  std::vector<Words> stripped;
  for (const auto& w : c.candidates) {
    stripped.push_back(StripBadEnding(w, BadEndingLexicon::Default()));
  }
  json adj = expected["adjusted"];
  adj["items"] = expected["adjusted_items"];
  ExpectAgreement(Intern(stripped, c.refs), adj);
}

TEST(ReferenceScorerTest, DanglingPhraseRaisesCider) {
  const json fig = LoadJson("figure1.json");
  for (const std::string key : {"plain", "dangling"}) {
    std::vector<Words> cands = {Split(fig[key])};
    std::vector<std::vector<Words>> refs(1);
    for (const auto& r : fig["refs"]) refs[0].push_back(Split(r));
    for (const auto& ctx : fig["context"]) {
      cands.push_back(Split(ctx["candidate"]));
      refs.emplace_back();
      for (const auto& r : ctx["refs"]) refs.back().push_back(Split(r));
    }
    const Interned x = Intern(cands, refs);
    EXPECT_NEAR(CiderCorpus(x.candidates, x.refs, CiderVariant::kD).per_item[0],
                fig["cider_d_" + key].get<double>(), 1e-3);
    EXPECT_NEAR(
        CiderCorpus(x.candidates, x.refs, CiderVariant::kPlain).per_item[0],
        fig["cider_" + key].get<double>(), 1e-3);
    EXPECT_NEAR(SentenceBleu(x.candidates[0], x.refs[0]),
                fig["bleu4_" + key].get<double>(), 1e-4);
  }
  EXPECT_GT(fig["cider_d_dangling"].get<double>(),
            fig["cider_d_plain"].get<double>());
}

TEST(BleuTest, HandComputedCases) {
  const TokenSeq ref = {1, 2, 3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(SentenceBleu(ref, {ref}, false), 1.0);
  // Short candidate: brevity penalty exp(1 - 6/4), all n-grams match.
  const TokenSeq cand = {1, 2, 3, 4};
  EXPECT_NEAR(SentenceBleu(cand, {ref}, false), std::exp(1.0 - 6.0 / 4.0),
              1e-12);
  const BleuStats s = ComputeBleuStats(cand, {ref, {9, 9, 9, 9, 9}});
  EXPECT_EQ(s.reference_length, 5);  // closest length wins
  EXPECT_EQ(s.totals[3], 1);
  // Clipped counts: "the the the" against one "the".
  const BleuStats clip = ComputeBleuStats({7, 7, 7}, {{7, 8}});
  EXPECT_EQ(clip.matches[0], 1);
  EXPECT_EQ(clip.totals[0], 3);
  // No 4-gram match and no smoothing gives zero.
  EXPECT_EQ(SentenceBleu({1, 2, 3}, {ref}, false), 0.0);
  EXPECT_GT(SentenceBleu({1, 2, 3}, {ref}, true), 0.0);
}

TEST(RougeTest, LcsAndMultiReferenceMax) {
  EXPECT_EQ(LcsLength({1, 2, 3, 4}, {2, 4, 1, 3, 4}), 3u);
  EXPECT_EQ(LcsLength({}, {1}), 0u);
  EXPECT_DOUBLE_EQ(RougeL({1, 2}, {{1, 2}}), 1.0);
  // P = 2/3, R = 2/4.
  const double p = 2.0 / 3.0, r = 0.5, b2 = kRougeBeta * kRougeBeta;
  EXPECT_NEAR(RougeL({1, 2, 9}, {{1, 2, 3, 4}}),
              (1 + b2) * p * r / (r + b2 * p), 1e-12);
  EXPECT_EQ(RougeL({5}, {{1}}), 0.0);
}

TEST(CiderTest, IdenticalCandidateBeatsOthersAndVariantsDiffer) {
  const std::vector<std::vector<TokenSeq>> refs = {
      {{1, 2, 3, 4}, {1, 2, 3, 5}}, {{6, 7, 8}, {6, 7, 9}},
      {{10, 11}, {10, 12}}};
  const CiderScorer d(refs, CiderVariant::kD);
  const CiderScorer plain(refs, CiderVariant::kPlain);
  EXPECT_GT(d.Score({1, 2, 3, 4}, refs[0]), d.Score({1, 2, 9, 9}, refs[0]));
  EXPECT_EQ(d.Score({13, 14}, refs[0]), 0.0);
  // CIDEr-D clips repeated n-grams, plain CIDEr does not.
  EXPECT_LT(d.Score({1, 1, 1, 1, 1, 1}, refs[0]),
            plain.Score({1, 1, 1, 1, 1, 1}, refs[0]) + 1e-12);
  EXPECT_FALSE(d.idf_floored());
  const CiderScorer single({{{1, 2}}}, CiderVariant::kD);
  EXPECT_TRUE(single.idf_floored());
  EXPECT_STREQ(CiderVariantName(CiderVariant::kD), "CIDEr-D");
}

TEST(BadEndingTest, LexiconMatchAndStrip) {
  const auto lex = BadEndingLexicon::Default();
  EXPECT_EQ(lex.phrases().size(), 5u);
  EXPECT_EQ(lex.Match(Split("a man with a")), "with a");
  EXPECT_FALSE(lex.Match(Split("a man with a hat")).has_value());
  EXPECT_FALSE(lex.Match(Split("a")).has_value());
  EXPECT_EQ(StripBadEnding(Split("a dog on a with a"), lex),
            Split("a dog"));
  EXPECT_EQ(StripBadEnding(Split("a dog on a with a"), lex, true),
            Split("a dog on a"));
  EXPECT_EQ(StripBadEnding(Split("with a"), lex), Words{});
  const auto custom = BadEndingLexicon::FromPhrases({"of", "the top of"});
  EXPECT_EQ(custom.Match(Split("on the top of")), "the top of");
  EXPECT_EQ(custom.max_length(), 3u);

  const BadEndingReport r = BadEndingRate(
      {Split("a cat in a"), Split("a cat"), Split("a dog in a"),
       Split("x and a")},
      lex);
  EXPECT_EQ(r.flagged, 3);
  EXPECT_EQ(r.total, 4);
  EXPECT_DOUBLE_EQ(r.rate, 0.75);
  EXPECT_EQ(r.histogram.at("in a"), 2);
  EXPECT_EQ(r.histogram.at("and a"), 1);
}

TEST(NoveltyTest, FractionNotSeenInTraining) {
  const std::vector<Words> train = {Split("a red car"), Split("a dog")};
  EXPECT_DOUBLE_EQ(
      NoveltyScore({Split("a red car"), Split("a blue car"), Split("a dog"),
                    Split("a cat")},
                   train),
      0.5);
  EXPECT_DOUBLE_EQ(NoveltyScore({}, train), 0.0);
}

TEST(ActionSpaceTest, MeanAndHistogram) {
  const ActionSpaceStats s = ComputeActionSpaceStats({{3, 1}, {3}, {}});
  EXPECT_EQ(s.steps, 3);
  EXPECT_NEAR(s.mean, 7.0 / 3.0, 1e-15);
  EXPECT_EQ(s.histogram.at(3), 2);
  EXPECT_EQ(s.histogram.at(1), 1);
}

std::vector<ScoreInput> ScoreInputsFromFixtures() {
  std::map<std::string, std::vector<Words>> refs;
  std::ifstream caps(kFixtures / "score_captions.jsonl");
  std::string line;
  while (std::getline(caps, line)) {
    const json j = json::parse(line);
    for (const auto& r : j["refs"]) refs[j["id"]].push_back(Split(r));
  }
  std::vector<ScoreInput> inputs;
  std::ifstream preds(kFixtures / "score_predictions.jsonl");
  while (std::getline(preds, line)) {
    const json j = json::parse(line);
    inputs.push_back({j["id"], Split(j["caption"]), refs.at(j["id"])});
  }
  return inputs;
}

TEST(ScoreReportTest, JsonMatchesGoldenFile) {
  const auto inputs = ScoreInputsFromFixtures();
  ASSERT_FALSE(inputs.empty());
  const ScoreReport r =
      ComputeScoreReport(inputs, BadEndingLexicon::Default());
  EXPECT_EQ(ScoreReportJson(r, true),
            testing::ReadFile(kFixtures / "score_report.json"));
  EXPECT_EQ(r.items, static_cast<int64_t>(inputs.size()));
  EXPECT_LE(r.adjusted_bad_end_rate, r.bad_endings.rate);
  EXPECT_EQ(r.adjusted_bad_end_rate, 0.0);
}

TEST(ScoreReportTest, TableListsEveryMetric) {
  const ScoreReport r =
      ComputeScoreReport(ScoreInputsFromFixtures(), BadEndingLexicon::Default());
  const std::string table = ScoreReportTable(r, "run-a");
  for (const char* needle : {"run-a", "run-a (adj)", "BLEU4", "ROUGE-L",
                             "CIDEr-D", "BadEnd-Rate"}) {
    EXPECT_NE(table.find(needle), std::string::npos) << needle;
  }
}

TEST(ScoreReportTest, EmptyInputIsAnError) {
  EXPECT_THROW(ComputeScoreReport({}, BadEndingLexicon::Default()), Error);
}

}  // namespace
}  // namespace priorseq
