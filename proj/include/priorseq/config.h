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


#ifndef PRIORSEQ_CONFIG_H_
#define PRIORSEQ_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace priorseq {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default. Keys are flat and dotted
// ("rl.lr", "paths.out").
const std::vector<ConfigKey>& KnownConfigKeys();

// Flat key=value configuration. Files hold one "key = value" per line;
// '#' starts a comment. Unknown keys and malformed values raise kConfig
// errors that name the key.
class Config {
 public:
  // All known keys at their defaults.
  static Config Defaults();

  void LoadFile(const std::filesystem::path& path);
  void Set(const std::string& key, const std::string& value);

  const std::string& GetString(const std::string& key) const;
  int64_t GetInt(const std::string& key) const;
  uint64_t GetUint(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  bool GetBool(const std::string& key) const;
  // Comma-separated list; empty string gives an empty list.
  std::vector<std::string> GetList(const std::string& key) const;

  // Sorted "key = value" lines; the config hash is taken over this text.
  std::string Canonical() const;
  uint64_t Hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// 64-bit FNV-1a.
uint64_t Fnv1a(std::string_view data, uint64_t seed = 14695981039346656037ULL);
std::string HexDigest(uint64_t value);
// FNV-1a of a file's bytes, hex encoded.
std::string FileDigest(const std::filesystem::path& path);

}  // namespace priorseq

#endif  // PRIORSEQ_CONFIG_H_
