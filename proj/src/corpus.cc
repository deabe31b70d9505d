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

#include "priorseq/corpus.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "corpus";
constexpr char kFeatureMagic[4] = {'P', 'S', 'Q', 'F'};
constexpr uint32_t kFeatureVersion = 1;

bool IsWordByte(unsigned char ch) {
  return std::isalnum(ch) || ch >= 0x80;
}

template <typename T>
void WriteLe(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadLe(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "truncated features file while reading " + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::ifstream OpenIn(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) {
    throw Error(ErrorCode::kIo, kModule, "cannot open " + path.string());
  }
  return in;
}

std::ofstream OpenOut(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) {
    throw Error(ErrorCode::kIo, kModule, "cannot write " + path.string());
  }
  return out;
}

std::vector<FeatureGrid> ReadFeaturesJsonl(std::istream& in) {
  std::vector<FeatureGrid> out;
  std::string line;
  int line_no = 0;
  int expected_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "features line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.contains("id") || !row.contains("grid") ||
        !row["grid"].is_array() || row["grid"].empty()) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "features line " + std::to_string(line_no) +
                      ": expected {\"id\", \"grid\"}");
    }
    const auto& grid = row["grid"];
    const int rows = static_cast<int>(grid.size());
    const int cols = static_cast<int>(grid[0].size());
    if (expected_dim < 0) expected_dim = cols;
    FeatureGrid fg;
    fg.item_id = row["id"].get<std::string>();
    fg.grid.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
      if (static_cast<int>(grid[r].size()) != expected_dim) {
        throw Error(ErrorCode::kDimensionMismatch, kModule,
                    "features line " + std::to_string(line_no) + " (id " +
                        fg.item_id + "): row " + std::to_string(r) + " has " +
                        std::to_string(grid[r].size()) +
                        " values, expected " + std::to_string(expected_dim));
      }
      for (int c = 0; c < cols; ++c) {
        const double v = grid[r][c].get<double>();
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kMalformedInput, kModule,
                      "features line " + std::to_string(line_no) +
                          ": non-finite value");
        }
        fg.grid(r, c) = v;
      }
    }
    out.push_back(std::move(fg));
  }
  return out;
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const auto ch = static_cast<unsigned char>(text[i]);
    if (std::isspace(ch)) {
      flush();
    } else if (IsWordByte(ch)) {
      current.push_back(static_cast<char>(std::tolower(ch)));
    } else if (ch == '\'') {
      // Keep only when flanked by word characters ("man's", "don't").
      const bool before = !current.empty() && i > 0 &&
                          IsWordByte(static_cast<unsigned char>(text[i - 1]));
      const bool after = i + 1 < text.size() &&
                         IsWordByte(static_cast<unsigned char>(text[i + 1]));
      if (before && after) current.push_back('\'');
    }
    // Other punctuation is deleted in place.
  }
  flush();
  return tokens;
}

Vocabulary Vocabulary::Build(
    const std::vector<std::vector<std::string>>& corpus, int min_count) {
  if (min_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "min_count must be >= 1");
  }
  std::map<std::string, int64_t> counts;
  size_t total = 0;
  for (const auto& sentence : corpus) {
    for (const auto& w : sentence) {
      ++counts[w];
      ++total;
    }
  }
  if (total == 0) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no tokens in corpus");
  }
  std::vector<std::pair<std::string, int64_t>> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words = {std::string(kStartToken),
                                    std::string(kEndToken),
                                    std::string(kUnkToken)};
  for (auto& [w, c] : kept) words.push_back(w);
  return FromWords(std::move(words));
}

Vocabulary Vocabulary::FromWords(std::vector<std::string> words) {
  if (words.size() < kNumReserved || words[kStartId] != kStartToken ||
      words[kEndId] != kEndToken || words[kUnkId] != kUnkToken) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "vocabulary must begin with " + std::string(kStartToken) +
                    ", " + std::string(kEndToken) + ", " +
                    std::string(kUnkToken));
  }
  Vocabulary vocab;
  vocab.words_ = std::move(words);
  for (size_t i = 0; i < vocab.words_.size(); ++i) {
    auto [it, inserted] =
        vocab.index_.emplace(vocab.words_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "duplicate vocabulary word '" + vocab.words_[i] + "'");
    }
  }
  return vocab;
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    words.push_back(line);
  }
  return FromWords(std::move(words));
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  auto out = OpenOut(path);
  for (const auto& w : words_) out << w << '\n';
}

bool Vocabulary::Contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

TokenId Vocabulary::IdOf(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::WordOf(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= words_.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "token id " + std::to_string(id) + " out of range");
  }
  return words_[id];
}

TokenSeq Vocabulary::Encode(const std::vector<std::string>& tokens) const {
  TokenSeq ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(IdOf(t));
  return ids;
}

TokenSeq Vocabulary::EncodeCaption(std::string_view text) const {
  TokenSeq ids = Encode(Tokenize(text));
  ids.push_back(kEndId);
  return ids;
}

std::vector<std::string> Vocabulary::Decode(const TokenSeq& ids) const {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kEndId) break;
    if (id == kStartId) continue;
    out.push_back(WordOf(id));
  }
  return out;
}

std::string Vocabulary::ToText(const TokenSeq& ids) const {
  std::string text;
  for (const auto& w : Decode(ids)) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  return text;
}

const char* SplitName(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kMalformedInput, kModule,
              "unknown split '" + std::string(name) + "'");
}

std::vector<std::vector<std::string>> TrainingSentences(
    const std::vector<TextCaption>& captions) {
  std::vector<std::vector<std::string>> out;
  for (const auto& c : captions) {
    if (c.split != Split::kTrain) continue;
    for (const auto& r : c.refs) out.push_back(Tokenize(r));
  }
  return out;
}

std::vector<CaptionRecord> EncodeCaptions(
    const std::vector<TextCaption>& captions, const Vocabulary& vocab) {
  std::vector<CaptionRecord> out;
  out.reserve(captions.size());
  for (const auto& c : captions) {
    CaptionRecord rec;
    rec.item_id = c.item_id;
    rec.split = c.split;
    for (const auto& r : c.refs) rec.references.push_back(vocab.EncodeCaption(r));
    out.push_back(std::move(rec));
  }
  return out;
}

SplitView SelectSplit(const std::vector<CaptionRecord>& records,
                      const std::vector<FeatureGrid>& features, Split split) {
  if (records.size() != features.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "records and features are not aligned");
  }
  SplitView view;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != split) continue;
    view.records.push_back(records[i]);
    view.features.push_back(features[i]);
  }
  return view;
}

std::vector<TextCaption> ReadCaptions(const std::filesystem::path& path) {
  auto in = OpenIn(path);
  std::vector<TextCaption> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + " line " +
                              std::to_string(line_no);
    try {
      const auto row = nlohmann::json::parse(line);
      TextCaption c;
      c.item_id = row.at("id").get<std::string>();
      c.split = ParseSplit(row.at("split").get<std::string>());
      c.refs = row.at("refs").get<std::vector<std::string>>();
      if (c.refs.empty()) {
        throw Error(ErrorCode::kMalformedInput, kModule,
                    where + ": item '" + c.item_id + "' has no references");
      }
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, kModule, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kMalformedInput &&
          std::string(e.what()).find(where) == std::string::npos) {
        throw Error(ErrorCode::kMalformedInput, kModule,
                    where + ": " + e.what());
      }
      throw;
    }
  }
  if (out.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule,
                "captions file " + path.string() + " is empty");
  }
  return out;
}

void WriteCaptions(const std::filesystem::path& path,
                   const std::vector<TextCaption>& captions) {
  auto out = OpenOut(path);
  for (const auto& c : captions) {
    nlohmann::ordered_json row;
    row["id"] = c.item_id;
    row["split"] = SplitName(c.split);
    row["refs"] = c.refs;
    out << row.dump() << '\n';
  }
}

std::vector<FeatureGrid> ReadFeatures(const std::filesystem::path& path) {
  auto in = OpenIn(path, /*binary=*/true);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() < 4 || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    in.clear();
    in.seekg(0);
    return ReadFeaturesJsonl(in);
  }
  const auto version = ReadLe<uint32_t>(in, "version");
  if (version != kFeatureVersion) {
    throw Error(ErrorCode::kMalformedInput, kModule,
                "unsupported features version " + std::to_string(version));
  }
  const auto count = ReadLe<uint32_t>(in, "count");
  const auto locations = ReadLe<uint32_t>(in, "L");
  const auto dim = ReadLe<uint32_t>(in, "D");
  if (locations == 0 || dim == 0) {
    throw Error(ErrorCode::kMalformedInput, kModule, "L and D must be positive");
  }
  std::vector<FeatureGrid> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const auto id_len = ReadLe<uint16_t>(in, "id length of item " +
                                                 std::to_string(i));
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "truncated id of item " + std::to_string(i));
    }
    FeatureGrid fg;
    fg.item_id = std::move(id);
    fg.grid.resize(locations, dim);
    for (uint32_t r = 0; r < locations; ++r) {
      for (uint32_t c = 0; c < dim; ++c) {
        const float v = ReadLe<float>(in, "values of item " + fg.item_id);
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kMalformedInput, kModule,
                      "non-finite feature value in item " + fg.item_id);
        }
        fg.grid(r, c) = v;
      }
    }
    out.push_back(std::move(fg));
  }
  return out;
}

void WriteFeatures(const std::filesystem::path& path,
                   const std::vector<FeatureGrid>& features) {
  uint32_t locations = features.empty() ? 1 : features[0].locations();
  uint32_t dim = features.empty() ? 1 : features[0].dim();
  for (const auto& f : features) {
    if (static_cast<uint32_t>(f.locations()) != locations ||
        static_cast<uint32_t>(f.dim()) != dim) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  "feature grid of item " + f.item_id +
                      " differs in shape from the first item");
    }
  }
  auto out = OpenOut(path, /*binary=*/true);
  out.write(kFeatureMagic, 4);
  WriteLe<uint32_t>(out, kFeatureVersion);
  WriteLe<uint32_t>(out, static_cast<uint32_t>(features.size()));
  WriteLe<uint32_t>(out, locations);
  WriteLe<uint32_t>(out, dim);
  for (const auto& f : features) {
    WriteLe<uint16_t>(out, static_cast<uint16_t>(f.item_id.size()));
    out.write(f.item_id.data(), static_cast<std::streamsize>(f.item_id.size()));
    for (uint32_t r = 0; r < locations; ++r) {
      for (uint32_t c = 0; c < dim; ++c) {
        WriteLe<float>(out, static_cast<float>(f.grid(r, c)));
      }
    }
  }
}

void WriteFeaturesJsonl(const std::filesystem::path& path,
                        const std::vector<FeatureGrid>& features) {
  auto out = OpenOut(path);
  for (const auto& f : features) {
    nlohmann::ordered_json row;
    row["id"] = f.item_id;
    auto grid = nlohmann::json::array();
    for (int r = 0; r < f.locations(); ++r) {
      auto vals = nlohmann::json::array();
      for (int c = 0; c < f.dim(); ++c) vals.push_back(f.grid(r, c));
      grid.push_back(std::move(vals));
    }
    row["grid"] = std::move(grid);
    out << row.dump() << '\n';
  }
}

Dataset LoadDataset(const std::filesystem::path& captions_path,
                    const std::filesystem::path& features_path) {
  Dataset ds;
  ds.captions = ReadCaptions(captions_path);
  auto features = ReadFeatures(features_path);
  std::unordered_map<std::string, size_t> by_id;
  for (size_t i = 0; i < features.size(); ++i) {
    by_id.emplace(features[i].item_id, i);
  }
  ds.features.reserve(ds.captions.size());
  for (const auto& c : ds.captions) {
    auto it = by_id.find(c.item_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMissingFeature, kModule,
                  "no feature grid for item '" + c.item_id + "'");
    }
    ds.features.push_back(features[it->second]);
  }
  return ds;
}

}  // namespace priorseq
