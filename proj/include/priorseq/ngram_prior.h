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

#ifndef PRIORSEQ_NGRAM_PRIOR_H_
#define PRIORSEQ_NGRAM_PRIOR_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/corpus.h"

namespace priorseq {

// The hard n-gram set F. Sentences are padded with n-1 leading START tokens
// and end with END, so every decoding step has an (n-1)-token context.
// N-grams containing UNK are never stored.
class NGramTable {
 public:
  struct Successor {
    TokenId token;
    int64_t count;
  };

  // Counts n-grams over the training-split references only and keeps those
  // with count >= min_freq. n = 1 yields the unigram set (every non-START
  // token including END).
  static NGramTable Build(const std::vector<CaptionRecord>& corpus, int n,
                          int64_t min_freq, size_t vocab_size);

  int order() const { return n_; }
  int64_t min_freq() const { return min_freq_; }
  size_t vocab_size() const { return vocab_size_; }
  size_t total_ngrams() const { return total_ngrams_; }
  size_t num_contexts() const { return context_map_.size(); }

  // Allowed continuations of an exact (n-1)-token context, or nullptr.
  const std::vector<Successor>* Successors(
      std::span<const TokenId> context) const;
  bool Contains(std::span<const TokenId> ngram) const;

  // Last n-1 tokens of the START-padded history.
  std::vector<TokenId> ContextOf(std::span<const TokenId> history) const;

  // alpha[k] = 1 iff (context, k) is in F. All-zero for unseen contexts.
  MaskVector MaskFor(std::span<const TokenId> history) const;

  // Contexts in lexicographic id order.
  const std::map<std::vector<TokenId>, std::vector<Successor>>& contexts()
      const {
    return context_map_;
  }

 private:
  friend class NGramPrior;

  int n_ = 0;
  int64_t min_freq_ = 1;
  size_t vocab_size_ = 0;
  size_t total_ngrams_ = 0;
  std::map<std::vector<TokenId>, std::vector<Successor>> context_map_;
};

// The order-n table plus backoff tables of orders n-1 .. 1 built from the
// same corpus.
class NGramPrior : public ActionPrior {
 public:
  static NGramPrior Build(const std::vector<CaptionRecord>& corpus, int n,
                          int64_t min_freq, size_t vocab_size);

  // Text format: one block per order, highest first. Each block starts with
  // "#ngram v1 n=<n> min_freq=<m>" followed by lines of n space-separated
  // surface tokens, a tab and the decimal count.
  static NGramPrior Load(const std::filesystem::path& path,
                         const Vocabulary& vocab);
  void Save(const std::filesystem::path& path, const Vocabulary& vocab) const;

  const NGramTable& table() const { return tables_.front(); }
  const NGramTable& table_of_order(int order) const;
  int order() const { return table().order(); }

  MaskVector MaskFor(std::span<const TokenId> history) const {
    return table().MaskFor(history);
  }

  // Backs off through orders n-1 .. 1 until a non-empty mask is found and
  // increments `*counter` once. The unigram mask is never empty.
  MaskVector FallbackMask(std::span<const TokenId> history,
                          int64_t* counter) const;

  // MaskFor, or FallbackMask if that is empty and fallback is enabled;
  // throws kMaskEmpty otherwise.
  MaskVector Mask(std::span<const TokenId> history, int64_t* counter) const;

  void set_allow_fallback(bool allow) { allow_fallback_ = allow; }
  bool allow_fallback() const { return allow_fallback_; }

  std::unique_ptr<PriorSession> Begin() const override;
  size_t vocab_size() const override { return table().vocab_size(); }
  std::string Describe() const override;

 private:
  std::vector<NGramTable> tables_;  // orders n, n-1, ..., 1
  bool allow_fallback_ = true;
};

}  // namespace priorseq

#endif  // PRIORSEQ_NGRAM_PRIOR_H_
