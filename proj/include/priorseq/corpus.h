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

#ifndef PRIORSEQ_CORPUS_H_
#define PRIORSEQ_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "priorseq/tensor.h"

namespace priorseq {

using TokenId = int32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved ids occupy the front of every vocabulary.
inline constexpr TokenId kStartId = 0;
inline constexpr TokenId kEndId = 1;
inline constexpr TokenId kUnkId = 2;
inline constexpr int kNumReserved = 3;

inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kEndToken = "<end>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Lowercases ASCII, deletes punctuation (apostrophes survive only between
// two word characters) and splits on whitespace. Bytes >= 0x80 are kept
// verbatim so UTF-8 words pass through. Reserved tokens cannot be produced
// because '<' and '>' are punctuation.
std::vector<std::string> Tokenize(std::string_view text);

class Vocabulary {
 public:
  // Retains the words occurring at least `min_count` times. Word ids after
  // the reserved block are assigned by descending frequency, ties broken
  // lexicographically.
  static Vocabulary Build(const std::vector<std::vector<std::string>>& corpus,
                          int min_count);

  // `words` must start with the three reserved tokens in id order.
  static Vocabulary FromWords(std::vector<std::string> words);

  static Vocabulary Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  bool Contains(std::string_view word) const;
  // Unknown words map to kUnkId.
  TokenId IdOf(std::string_view word) const;
  const std::string& WordOf(TokenId id) const;

  TokenSeq Encode(const std::vector<std::string>& tokens) const;
  // Tokenizes, encodes and appends END.
  TokenSeq EncodeCaption(std::string_view text) const;
  // Surface words up to (not including) the first END; START is skipped.
  std::vector<std::string> Decode(const TokenSeq& ids) const;
  std::string ToText(const TokenSeq& ids) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class Split { kTrain, kVal, kTest };

const char* SplitName(Split split);
Split ParseSplit(std::string_view name);

// A captions-file row before encoding.
struct TextCaption {
  std::string item_id;
  Split split = Split::kTrain;
  std::vector<std::string> refs;

  bool operator==(const TextCaption&) const = default;
};

struct CaptionRecord {
  std::string item_id;
  Split split = Split::kTrain;
  // Each reference ends with kEndId.
  std::vector<TokenSeq> references;
};

struct FeatureGrid {
  std::string item_id;
  Matrix grid;  // L x D

  int locations() const { return static_cast<int>(grid.rows()); }
  int dim() const { return static_cast<int>(grid.cols()); }
};

struct Dataset {
  std::vector<TextCaption> captions;
  // features[i] belongs to captions[i].
  std::vector<FeatureGrid> features;
};

std::vector<std::vector<std::string>> TrainingSentences(
    const std::vector<TextCaption>& captions);

std::vector<CaptionRecord> EncodeCaptions(
    const std::vector<TextCaption>& captions, const Vocabulary& vocab);

// Records restricted to one split, with their aligned feature grids.
struct SplitView {
  std::vector<CaptionRecord> records;
  std::vector<FeatureGrid> features;
};
SplitView SelectSplit(const std::vector<CaptionRecord>& records,
                      const std::vector<FeatureGrid>& features, Split split);

std::vector<TextCaption> ReadCaptions(const std::filesystem::path& path);
void WriteCaptions(const std::filesystem::path& path,
                   const std::vector<TextCaption>& captions);

// Reads either the binary PSQF format or the JSON Lines fallback, chosen by
// the leading magic bytes.
std::vector<FeatureGrid> ReadFeatures(const std::filesystem::path& path);
void WriteFeatures(const std::filesystem::path& path,
                   const std::vector<FeatureGrid>& features);
void WriteFeaturesJsonl(const std::filesystem::path& path,
                        const std::vector<FeatureGrid>& features);

// Loads both files and aligns features to captions by item id.
Dataset LoadDataset(const std::filesystem::path& captions_path,
                    const std::filesystem::path& features_path);

}  // namespace priorseq

#endif  // PRIORSEQ_CORPUS_H_
