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

#include "priorseq/ngram_prior.h"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "ngram_prior";

class NGramSession : public PriorSession {
 public:
  explicit NGramSession(const NGramPrior& prior) : prior_(prior) {}

  const MaskVector& Current() override {
    if (!mask_) mask_ = prior_.Mask(history_, &fallbacks_);
    return *mask_;
  }

  void Advance(TokenId token) override {
    history_.push_back(token);
    mask_.reset();
  }

  int64_t fallbacks() const override { return fallbacks_; }

 private:
  const NGramPrior& prior_;
  std::vector<TokenId> history_;
  std::optional<MaskVector> mask_;
  int64_t fallbacks_ = 0;
};

}  // namespace

MaskVector MaskVector::Zeros(size_t vocab_size) {
  MaskVector m;
  m.bits.assign(vocab_size, 0);
  return m;
}

MaskVector MaskVector::Ones(size_t vocab_size) {
  MaskVector m;
  m.bits.assign(vocab_size, 1);
  m.cardinality = static_cast<int>(vocab_size);
  return m;
}

MaskVector MaskVector::FromIds(size_t vocab_size,
                               std::span<const TokenId> ids) {
  MaskVector m = Zeros(vocab_size);
  for (TokenId id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw Error(ErrorCode::kInvalidArgument, kModule,
                  "mask id " + std::to_string(id) + " out of range");
    }
    if (!m.bits[id]) {
      m.bits[id] = 1;
      ++m.cardinality;
    }
  }
  return m;
}

std::vector<TokenId> MaskVector::Ids() const {
  std::vector<TokenId> ids;
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) ids.push_back(static_cast<TokenId>(i));
  }
  return ids;
}

NGramTable NGramTable::Build(const std::vector<CaptionRecord>& corpus, int n,
                             int64_t min_freq, size_t vocab_size) {
  if (n < 1 || n > 6) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "n-gram order must be in [1, 6], got " + std::to_string(n));
  }
  if (min_freq < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "min_freq must be >= 1");
  }
  std::map<std::vector<TokenId>, int64_t> counts;
  size_t sentences = 0;
  for (const auto& record : corpus) {
    if (record.split != Split::kTrain) continue;
    for (const auto& ref : record.references) {
      ++sentences;
      std::vector<TokenId> padded(n - 1, kStartId);
      padded.insert(padded.end(), ref.begin(), ref.end());
      if (padded.empty() || padded.back() != kEndId) padded.push_back(kEndId);
      for (size_t i = 0; i + n <= padded.size(); ++i) {
        std::vector<TokenId> gram(padded.begin() + i, padded.begin() + i + n);
        if (std::find(gram.begin(), gram.end(), kUnkId) != gram.end()) continue;
        ++counts[gram];
      }
    }
  }
  if (sentences == 0) {
    throw Error(ErrorCode::kEmptyCorpus, kModule,
                "no training-split references to build n-grams from");
  }

  NGramTable table;
  table.n_ = n;
  table.min_freq_ = min_freq;
  table.vocab_size_ = vocab_size;
  for (const auto& [gram, count] : counts) {
    if (count < min_freq) continue;
    for (TokenId t : gram) {
      if (t < 0 || static_cast<size_t>(t) >= vocab_size) {
        throw Error(ErrorCode::kInvalidArgument, kModule,
                    "token id " + std::to_string(t) +
                        " outside vocabulary of size " +
                        std::to_string(vocab_size));
      }
    }
    std::vector<TokenId> context(gram.begin(), gram.end() - 1);
    table.context_map_[std::move(context)].push_back({gram.back(), count});
    ++table.total_ngrams_;
  }
  return table;
}

const std::vector<NGramTable::Successor>* NGramTable::Successors(
    std::span<const TokenId> context) const {
  auto it = context_map_.find(std::vector<TokenId>(context.begin(),
                                                   context.end()));
  return it == context_map_.end() ? nullptr : &it->second;
}

bool NGramTable::Contains(std::span<const TokenId> ngram) const {
  if (static_cast<int>(ngram.size()) != n_) return false;
  const auto* succ = Successors(ngram.first(n_ - 1));
  if (succ == nullptr) return false;
  return std::any_of(succ->begin(), succ->end(), [&](const Successor& s) {
    return s.token == ngram.back();
  });
}

std::vector<TokenId> NGramTable::ContextOf(
    std::span<const TokenId> history) const {
  const size_t width = n_ - 1;
  std::vector<TokenId> context(width, kStartId);
  const size_t take = std::min(width, history.size());
  std::copy(history.end() - take, history.end(), context.end() - take);
  return context;
}

MaskVector NGramTable::MaskFor(std::span<const TokenId> history) const {
  MaskVector mask = MaskVector::Zeros(vocab_size_);
  if (const auto* succ = Successors(ContextOf(history))) {
    for (const auto& s : *succ) mask.bits[s.token] = 1;
    mask.cardinality = static_cast<int>(succ->size());
  }
  return mask;
}

NGramPrior NGramPrior::Build(const std::vector<CaptionRecord>& corpus, int n,
                             int64_t min_freq, size_t vocab_size) {
  if (n < 2 || n > 6) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "n must be in [2, 6], got " + std::to_string(n));
  }
  NGramPrior prior;
  for (int k = n; k >= 1; --k) {
    prior.tables_.push_back(NGramTable::Build(corpus, k, min_freq, vocab_size));
  }
  if (prior.tables_.back().total_ngrams() == 0) {
    throw Error(ErrorCode::kEmptyCorpus, kModule,
                "no word reaches min_freq " + std::to_string(min_freq));
  }
  return prior;
}

const NGramTable& NGramPrior::table_of_order(int order) const {
  for (const auto& t : tables_) {
    if (t.order() == order) return t;
  }
  throw Error(ErrorCode::kInvalidArgument, kModule,
              "no table of order " + std::to_string(order));
}

MaskVector NGramPrior::FallbackMask(std::span<const TokenId> history,
                                    int64_t* counter) const {
  if (counter != nullptr) ++*counter;
  for (size_t i = 1; i < tables_.size(); ++i) {
    MaskVector mask = tables_[i].MaskFor(history);
    if (!mask.empty()) return mask;
  }
  // Unreachable for a built prior: the unigram table always has END.
  return tables_.back().MaskFor(history);
}

MaskVector NGramPrior::Mask(std::span<const TokenId> history,
                            int64_t* counter) const {
  MaskVector mask = MaskFor(history);
  if (!mask.empty()) return mask;
  if (!allow_fallback_) {
    throw Error(ErrorCode::kMaskEmpty, kModule,
                "context has no licensed continuation and fallback is off");
  }
  return FallbackMask(history, counter);
}

std::unique_ptr<PriorSession> NGramPrior::Begin() const {
  return std::make_unique<NGramSession>(*this);
}

std::string NGramPrior::Describe() const {
  return "ngram:" + std::to_string(order());
}

void NGramPrior::Save(const std::filesystem::path& path,
                      const Vocabulary& vocab) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, kModule, "cannot write " + path.string());
  for (const auto& table : tables_) {
    out << "#ngram v1 n=" << table.order() << " min_freq=" << table.min_freq()
        << '\n';
    for (const auto& [context, successors] : table.contexts()) {
      std::vector<NGramTable::Successor> sorted = successors;
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.token < b.token; });
      for (const auto& s : sorted) {
        for (TokenId t : context) out << vocab.WordOf(t) << ' ';
        out << vocab.WordOf(s.token) << '\t' << s.count << '\n';
      }
    }
  }
}

NGramPrior NGramPrior::Load(const std::filesystem::path& path,
                            const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, kModule, "cannot open " + path.string());
  NGramPrior prior;
  NGramTable* current = nullptr;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    return Error(ErrorCode::kMalformedInput, kModule,
                 path.filename().string() + " line " +
                     std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#ngram", 0) == 0) {
      int n = 0;
      long long min_freq = 0;
      if (std::sscanf(line.c_str(), "#ngram v1 n=%d min_freq=%lld", &n,
                      &min_freq) != 2 ||
          n < 1 || n > 6 || min_freq < 1) {
        throw fail("bad header '" + line + "'");
      }
      prior.tables_.emplace_back();
      current = &prior.tables_.back();
      current->n_ = n;
      current->min_freq_ = min_freq;
      current->vocab_size_ = vocab.size();
      continue;
    }
    if (current == nullptr) throw fail("n-gram line before header");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw fail("missing tab before count");
    std::istringstream words(line.substr(0, tab));
    std::vector<TokenId> gram;
    std::string w;
    while (words >> w) {
      if (!vocab.Contains(w)) throw fail("token '" + w + "' not in vocabulary");
      gram.push_back(vocab.IdOf(w));
    }
    if (static_cast<int>(gram.size()) != current->n_) {
      throw fail("expected " + std::to_string(current->n_) + " tokens");
    }
    int64_t count = 0;
    try {
      count = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw fail("bad count");
    }
    std::vector<TokenId> context(gram.begin(), gram.end() - 1);
    current->context_map_[std::move(context)].push_back({gram.back(), count});
    ++current->total_ngrams_;
  }
  if (prior.tables_.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule,
                "n-gram file " + path.string() + " has no tables");
  }
  for (size_t i = 1; i < prior.tables_.size(); ++i) {
    if (prior.tables_[i].order() != prior.tables_[i - 1].order() - 1) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "n-gram blocks must descend by one order");
    }
  }
  if (prior.tables_.back().order() != 1) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "n-gram file lacks the unigram block");
  }
  return prior;
}

}  // namespace priorseq
