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


#ifndef PRIORSEQ_TESTS_ORACLES_NGRAM_ORACLE_H_
#define PRIORSEQ_TESTS_ORACLES_NGRAM_ORACLE_H_

#include <algorithm>
#include <map>
#include <vector>

#include "priorseq/corpus.h"

namespace priorseq::testing {

// Brute-force n-gram set: enumerates every window of every padded training
// reference, counts them in an ordered map and filters by frequency. Mask
// queries scan the whole set.
class BruteForceNGrams {
 public:
  BruteForceNGrams(const std::vector<CaptionRecord>& corpus, int n,
                   int64_t min_freq)
      : n_(n) {
    std::map<std::vector<TokenId>, int64_t> counts;
    for (const auto& rec : corpus) {
      if (rec.split != Split::kTrain) continue;
      for (const auto& ref : rec.references) {
        std::vector<TokenId> padded(n - 1, kStartId);
        padded.insert(padded.end(), ref.begin(), ref.end());
        for (size_t i = 0; i + n <= padded.size(); ++i) {
          std::vector<TokenId> gram(padded.begin() + i, padded.begin() + i + n);
          if (std::find(gram.begin(), gram.end(), kUnkId) != gram.end()) {
            continue;
          }
          // Unigram START is padding, not a token.
          if (n == 1 && gram[0] == kStartId) continue;
          ++counts[gram];
        }
      }
    }
    for (const auto& [gram, c] : counts) {
      if (c >= min_freq) set_.push_back(gram);
    }
  }

  const std::vector<std::vector<TokenId>>& set() const { return set_; }

  bool Contains(const std::vector<TokenId>& gram) const {
    return std::find(set_.begin(), set_.end(), gram) != set_.end();
  }

  std::vector<TokenId> Context(const std::vector<TokenId>& history) const {
    std::vector<TokenId> padded(n_ - 1, kStartId);
    padded.insert(padded.end(), history.begin(), history.end());
    return std::vector<TokenId>(padded.end() - (n_ - 1), padded.end());
  }

  // Sorted allowed ids after `history`.
  std::vector<TokenId> Allowed(const std::vector<TokenId>& history) const {
    const auto ctx = Context(history);
    std::vector<TokenId> out;
    for (const auto& gram : set_) {
      if (std::equal(ctx.begin(), ctx.end(), gram.begin())) {
        out.push_back(gram.back());
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  int n_;
  std::vector<std::vector<TokenId>> set_;
};

// Backoff over independently enumerated orders n..1.
class BruteForceBackoff {
 public:
  BruteForceBackoff(const std::vector<CaptionRecord>& corpus, int n,
                    int64_t min_freq) {
    for (int k = n; k >= 1; --k) orders_.emplace_back(corpus, k, min_freq);
  }

  // Allowed ids and whether a lower order had to be used.
  std::pair<std::vector<TokenId>, bool> Allowed(
      const std::vector<TokenId>& history) const {
    for (size_t i = 0; i < orders_.size(); ++i) {
      auto ids = orders_[i].Allowed(history);
      if (!ids.empty()) return {ids, i > 0};
    }
    return {{}, true};
  }

  const BruteForceNGrams& order(size_t i) const { return orders_[i]; }

 private:
  std::vector<BruteForceNGrams> orders_;
};

}  // namespace priorseq::testing

#endif  // PRIORSEQ_TESTS_ORACLES_NGRAM_ORACLE_H_
