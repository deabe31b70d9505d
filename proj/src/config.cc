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

#include "priorseq/config.h"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "config";

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void Bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::kConfig, kModule, key + ": " + why);
}

}  // namespace

const std::vector<ConfigKey>& KnownConfigKeys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "1", "root seed for every random stream"},
      {"threads", "1", "worker threads for rollouts and evaluation"},
      {"deterministic", "true", "write 0 in the seconds column of curves"},
      {"constraint", "none", "none | ngram:<n> | lm"},
      {"paths.out", "out", "output directory"},
      {"paths.captions", "", "captions JSONL"},
      {"paths.features", "", "features file (PSQF or JSONL)"},
      {"paths.vocab", "", "vocabulary file"},
      {"paths.ngrams", "", "n-gram table"},
      {"paths.lm", "", "language-model checkpoint"},
      {"paths.checkpoint", "", "policy checkpoint to start from"},
      {"paths.predictions", "", "predictions JSONL"},
      {"paths.curves", "", "comma-separated learning-curve CSVs"},
      {"analyze.labels", "", "comma-separated labels for paths.curves"},
      {"analyze.target", "0.9", "fraction of the best final reward to reach"},
      {"synth.items", "1000", "number of synthetic items"},
      {"synth.objects", "40", "object vocabulary size"},
      {"synth.colors", "12", "color vocabulary size"},
      {"synth.relations", "10", "relation vocabulary size"},
      {"synth.grounds", "30", "ground vocabulary size"},
      {"synth.locations", "1", "feature grid locations"},
      {"synth.noise", "0.1", "feature noise standard deviation"},
      {"synth.palette", "2", "colors per object (0 = any)"},
      {"synth.relations_per_object", "1", "relations per object (0 = any)"},
      {"synth.grounds_per_object", "3", "grounds per object (0 = any)"},
      {"synth.min_refs", "5", "fewest references per item"},
      {"synth.max_refs", "5", "most references per item"},
      {"vocab.min_count", "5", "minimum word count"},
      {"ngram.n", "4", "n-gram order"},
      {"ngram.min_freq", "5", "minimum n-gram count"},
      {"ngram.fallback", "true", "back off to lower orders on empty masks"},
      {"lm.embed", "64", "LM embedding size"},
      {"lm.hidden", "64", "LM hidden size"},
      {"lm.epochs", "10", "LM training epochs"},
      {"lm.batch", "20", "LM batch size in sentences"},
      {"lm.lr", "0.001", "LM learning rate"},
      {"lm.eta0", "0.00005", "LM mask threshold at step 0"},
      {"lm.growth", "2", "LM mask threshold growth per step"},
      {"model.arch", "attention", "plain | attention"},
      {"model.embed", "128", "decoder embedding size"},
      {"model.hidden", "128", "decoder hidden size"},
      {"model.attention_dim", "64", "attention projection size"},
      {"mle.epochs", "10", "cross-entropy epochs"},
      {"mle.batch", "20", "cross-entropy batch size in items"},
      {"mle.lr", "0.0005", "cross-entropy learning rate"},
      {"rl.reward", "cider-d", "cider-d | cider | bleu4 | rouge-l"},
      {"rl.k", "10", "samples per item"},
      {"rl.batch", "20", "items per update"},
      {"rl.lr", "0.00005", "RL learning rate"},
      {"rl.anneal", "0.2", "learning-rate anneal factor"},
      {"rl.patience", "10", "epochs without improvement before annealing"},
      {"rl.clip", "5", "global gradient-norm clip"},
      {"rl.epochs", "30", "RL epochs"},
      {"rl.max_len", "16", "maximum caption length"},
      {"rl.temperature", "1", "sampling temperature"},
      {"rl.average_all", "false", "use all k samples in the gradient"},
      {"rl.constrain_at_inference", "true", "validation decodes use the prior"},
      {"rl.strip_for_validation", "false", "strip bad endings before val CIDEr"},
      {"decode.split", "test", "split to decode"},
      {"decode.max_len", "16", "maximum caption length"},
      {"decode.mode", "greedy", "greedy | sample"},
      {"decode.constrain", "true", "apply the constraint while decoding"},
      {"score.lexicon", "with a,on a,of a,in a,and a", "bad-ending phrases"},
      {"score.single_pass_strip", "false", "strip one bad ending only"},
      {"score.format", "json", "json | table"},
      {"score.items", "true", "include per-item rows in the JSON report"},
      {"score.label", "model", "row label in the table format"},
  };
  return keys;
}

Config Config::Defaults() {
  Config c;
  for (const auto& k : KnownConfigKeys()) c.values_[k.name] = k.default_value;
  return c;
}

void Config::Set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) Bad(key, "unknown configuration key");
  it->second = value;
}

void Config::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, kModule, "cannot read " + path.string());
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = Trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig, kModule,
                  path.string() + " line " + std::to_string(line_no) +
                      ": expected key = value");
    }
    const std::string key = Trim(std::string_view(body).substr(0, eq));
    if (values_.count(key) == 0) {
      throw Error(ErrorCode::kConfig, kModule,
                  key + ": unknown configuration key (" + path.string() +
                      " line " + std::to_string(line_no) + ")");
    }
    Set(key, Trim(std::string_view(body).substr(eq + 1)));
  }
}

const std::string& Config::GetString(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) Bad(key, "unknown configuration key");
  return it->second;
}

int64_t Config::GetInt(const std::string& key) const {
  const std::string& s = GetString(key);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0) {
    Bad(key, "expected an integer, got '" + s + "'");
  }
  return v;
}

uint64_t Config::GetUint(const std::string& key) const {
  const std::string& s = GetString(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || s[0] == '-' || *end != '\0' || errno != 0) {
    Bad(key, "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

double Config::GetDouble(const std::string& key) const {
  const std::string& s = GetString(key);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || errno != 0) {
    Bad(key, "expected a number, got '" + s + "'");
  }
  return v;
}

bool Config::GetBool(const std::string& key) const {
  const std::string& s = GetString(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  Bad(key, "expected true or false, got '" + s + "'");
}

std::vector<std::string> Config::GetList(const std::string& key) const {
  std::vector<std::string> out;
  const std::string& s = GetString(key);
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(Trim(item));
  return out;
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

uint64_t Config::Hash() const { return Fnv1a(Canonical()); }

uint64_t Fnv1a(std::string_view data, uint64_t seed) {
  uint64_t h = seed;
  for (char ch : data) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

std::string HexDigest(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::string FileDigest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, kModule, "cannot read " + path.string());
  uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = Fnv1a(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
  }
  return HexDigest(h);
}

}  // namespace priorseq
