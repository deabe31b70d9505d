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

#ifndef PRIORSEQ_METRICS_H_
#define PRIORSEQ_METRICS_H_

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "priorseq/corpus.h"

namespace priorseq {

// Overlap metrics work on integer token sequences with END removed. Text
// can be mapped through an Interner, which keeps every distinct word
// distinct (no UNK collapse).
class Interner {
 public:
  TokenSeq Intern(const std::vector<std::string>& words);

 private:
  std::unordered_map<std::string, TokenId> ids_;
};

// Drops END and everything after it, and any START.
TokenSeq StripEnd(const TokenSeq& seq);

struct BleuStats {
  int64_t matches[4] = {0, 0, 0, 0};
  int64_t totals[4] = {0, 0, 0, 0};
  int64_t candidate_length = 0;
  int64_t reference_length = 0;  // closest reference length, ties shorter

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats ComputeBleuStats(const TokenSeq& candidate,
                           const std::vector<TokenSeq>& references);

// Geometric mean of clipped 1..4-gram precisions times the brevity
// penalty. With `smooth`, precisions of orders 2..4 become
// (matches + 1) / (totals + 1).
double BleuFromStats(const BleuStats& stats, bool smooth);

// Sentence-level BLEU-4, smoothed by default.
double SentenceBleu(const TokenSeq& candidate,
                    const std::vector<TokenSeq>& references,
                    bool smooth = true);

// Corpus-level BLEU-4: counts are summed before combining; unsmoothed by
// default.
double CorpusBleu(const std::vector<TokenSeq>& candidates,
                  const std::vector<std::vector<TokenSeq>>& references,
                  bool smooth = false);

inline constexpr double kRougeBeta = 1.2;

size_t LcsLength(const TokenSeq& a, const TokenSeq& b);

// LCS F-measure. With several references, precision and recall are each
// maximized over references before combining.
double RougeL(const TokenSeq& candidate,
              const std::vector<TokenSeq>& references,
              double beta = kRougeBeta);

enum class CiderVariant { kPlain, kD };

const char* CiderVariantName(CiderVariant variant);

// tf-idf n-gram (n = 1..4) cosine similarity averaged over n and over
// references, scaled by 10. Document frequencies come from the reference
// corpus given at construction. CIDEr-D clips candidate weights by the
// reference weights and applies a Gaussian length penalty with `sigma`.
class CiderScorer {
 public:
  explicit CiderScorer(const std::vector<std::vector<TokenSeq>>& ref_corpus,
                       CiderVariant variant = CiderVariant::kD,
                       double sigma = 6.0);

  double Score(const TokenSeq& candidate,
               const std::vector<TokenSeq>& references) const;

  CiderVariant variant() const { return variant_; }
  // True when the corpus had a single item and log(N) was floored to 1.
  bool idf_floored() const { return idf_floored_; }

 private:
  struct Cooked;
  Cooked Cook(const TokenSeq& seq) const;

  CiderVariant variant_;
  double sigma_;
  double log_corpus_size_;
  bool idf_floored_ = false;
  std::unordered_map<std::string, double> document_frequency_;
};

struct CorpusScores {
  double mean = 0.0;
  std::vector<double> per_item;
};

// Scores a corpus against itself as the document-frequency source.
CorpusScores CiderCorpus(const std::vector<TokenSeq>& candidates,
                         const std::vector<std::vector<TokenSeq>>& references,
                         CiderVariant variant);

using Words = std::vector<std::string>;

class BadEndingLexicon {
 public:
  // "with a", "on a", "of a", "in a", "and a".
  static BadEndingLexicon Default();
  static BadEndingLexicon FromPhrases(const std::vector<std::string>& phrases);

  const std::vector<Words>& phrases() const { return phrases_; }
  size_t max_length() const { return max_length_; }

  // Longest lexicon phrase that ends `candidate`, if any.
  std::optional<std::string> Match(const Words& candidate) const;

 private:
  std::vector<Words> phrases_;
  size_t max_length_ = 0;
};

struct BadEndingReport {
  double rate = 0.0;
  int64_t flagged = 0;
  int64_t total = 0;
  std::map<std::string, int64_t> histogram;
};

BadEndingReport BadEndingRate(const std::vector<Words>& candidates,
                              const BadEndingLexicon& lexicon);

// Removes the longest matching terminal phrase until none matches, or only
// once when `single_pass` is set.
Words StripBadEnding(const Words& candidate, const BadEndingLexicon& lexicon,
                     bool single_pass = false);

// Fraction of candidates whose exact token sequence is not a training
// reference.
double NoveltyScore(const std::vector<Words>& candidates,
                    const std::vector<Words>& training_refs);

struct ActionSpaceStats {
  double mean = 0.0;
  int64_t steps = 0;
  std::map<int, int64_t> histogram;  // mask cardinality -> step count
};

ActionSpaceStats ComputeActionSpaceStats(
    const std::vector<std::vector<int>>& mask_sizes);

// Corpus-level scores plus per-item rows for a predictions set.
struct ScoreReport {
  struct Item {
    std::string id;
    std::string caption;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double cider = 0.0;
    double cider_d = 0.0;
    std::string bad_ending;  // empty when not flagged
  };

  int64_t items = 0;
  int64_t references = 0;
  double bleu4 = 0.0;  // corpus-level, unsmoothed
  double rouge_l = 0.0;
  double cider = 0.0;
  double cider_d = 0.0;
  BadEndingReport bad_endings;
  // The same metrics after stripping bad endings from every candidate.
  double adjusted_bleu4 = 0.0;
  double adjusted_rouge_l = 0.0;
  double adjusted_cider = 0.0;
  double adjusted_cider_d = 0.0;
  double adjusted_bad_end_rate = 0.0;
  std::vector<Item> per_item;
};

struct ScoreInput {
  std::string id;
  Words candidate;
  std::vector<Words> references;
};

ScoreReport ComputeScoreReport(const std::vector<ScoreInput>& inputs,
                               const BadEndingLexicon& lexicon,
                               bool single_pass_strip = false);

// JSON with fixed number formatting so reports are byte-stable.
std::string ScoreReportJson(const ScoreReport& report, bool include_items);
// Plain-text table with CIDEr, BLEU4, ROUGE-L and BadEnd-Rate columns.
std::string ScoreReportTable(const ScoreReport& report,
                             const std::string& label);

}  // namespace priorseq

#endif  // PRIORSEQ_METRICS_H_
