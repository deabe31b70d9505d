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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "metrics";
constexpr int kMaxOrder = 4;

// N-gram key: the raw bytes of the token ids.
std::string NgramKey(const TokenSeq& seq, size_t start, int n) {
  std::string key(static_cast<size_t>(n) * sizeof(TokenId), '\0');
  std::memcpy(key.data(), seq.data() + start, key.size());
  return key;
}

std::unordered_map<std::string, int64_t> CountNgrams(const TokenSeq& seq,
                                                     int n) {
  std::unordered_map<std::string, int64_t> counts;
  for (size_t i = 0; i + n <= seq.size(); ++i) ++counts[NgramKey(seq, i, n)];
  return counts;
}

void RequireReferences(const std::vector<TokenSeq>& references) {
  if (references.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "empty reference set");
  }
}

double Round6(double x) { return std::round(x * 1e6) / 1e6; }

// Shortest round-trip digits laid out the way Python's float repr does:
// positional for decimal exponents in [-4, 16), scientific otherwise, and
// always with a fraction or exponent.
std::string FloatRepr(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x,
                           std::chars_format::scientific);
  std::string sci(buf, res.ptr);
  const auto e_pos = sci.find('e');
  std::string mantissa = sci.substr(0, e_pos);
  const int exp = std::stoi(sci.substr(e_pos + 1));
  const bool negative = mantissa[0] == '-';
  if (negative) mantissa.erase(0, 1);
  std::string digits;
  for (char ch : mantissa) {
    if (ch != '.') digits += ch;
  }
  std::string out;
  if (exp >= -4 && exp < 16) {
    if (exp < 0) {
      out = "0." + std::string(-exp - 1, '0') + digits;
    } else if (static_cast<int>(digits.size()) <= exp + 1) {
      out = digits + std::string(exp + 1 - digits.size(), '0') + ".0";
    } else {
      out = digits.substr(0, exp + 1) + "." + digits.substr(exp + 1);
    }
  } else {
    out = digits.substr(0, 1);
    if (digits.size() > 1) out += "." + digits.substr(1);
    char e[16];
    std::snprintf(e, sizeof(e), "e%c%02d", exp < 0 ? '-' : '+', std::abs(exp));
    out += e;
  }
  return negative ? "-" + out : out;
}

// Indented dump matching Python's json.dumps(indent=2, ensure_ascii=False)
// so reports compare byte for byte with other tooling.
void DumpJson(const nlohmann::ordered_json& j, int depth, std::string* out) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      *out += "{}";
      return;
    }
    *out += "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      if (!first) *out += ",\n";
      first = false;
      *out += pad + nlohmann::ordered_json(key).dump() + ": ";
      DumpJson(value, depth + 1, out);
    }
    *out += "\n" + close_pad + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      *out += "[]";
      return;
    }
    *out += "[\n";
    for (size_t i = 0; i < j.size(); ++i) {
      if (i > 0) *out += ",\n";
      *out += pad;
      DumpJson(j[i], depth + 1, out);
    }
    *out += "\n" + close_pad + "]";
  } else if (j.is_number_float()) {
    *out += FloatRepr(j.get<double>());
  } else {
    *out += j.dump();
  }
}

}  // namespace

TokenSeq Interner::Intern(const std::vector<std::string>& words) {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) {
    auto [it, inserted] =
        ids_.emplace(w, static_cast<TokenId>(ids_.size()) + kNumReserved);
    out.push_back(it->second);
  }
  return out;
}

TokenSeq StripEnd(const TokenSeq& seq) {
  TokenSeq out;
  for (TokenId t : seq) {
    if (t == kEndId) break;
    if (t != kStartId) out.push_back(t);
  }
  return out;
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < kMaxOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

BleuStats ComputeBleuStats(const TokenSeq& candidate,
                           const std::vector<TokenSeq>& references) {
  RequireReferences(references);
  BleuStats stats;
  stats.candidate_length = static_cast<int64_t>(candidate.size());
  int64_t best = -1;
  for (const auto& ref : references) {
    const auto len = static_cast<int64_t>(ref.size());
    if (best < 0 || std::abs(len - stats.candidate_length) <
                        std::abs(best - stats.candidate_length) ||
        (std::abs(len - stats.candidate_length) ==
             std::abs(best - stats.candidate_length) &&
         len < best)) {
      best = len;
    }
  }
  stats.reference_length = best;
  for (int n = 1; n <= kMaxOrder; ++n) {
    const auto cand_counts = CountNgrams(candidate, n);
    std::unordered_map<std::string, int64_t> max_ref;
    for (const auto& ref : references) {
      for (const auto& [key, c] : CountNgrams(ref, n)) {
        auto& slot = max_ref[key];
        slot = std::max(slot, c);
      }
    }
    for (const auto& [key, c] : cand_counts) {
      auto it = max_ref.find(key);
      if (it != max_ref.end()) stats.matches[n - 1] += std::min(c, it->second);
    }
    // A sentence too short for order n still counts one n-gram slot, so
    // short candidates are penalized rather than skipped at that order.
    stats.totals[n - 1] =
        std::max<int64_t>(1, stats.candidate_length - n + 1);
  }
  return stats;
}

double BleuFromStats(const BleuStats& stats, bool smooth) {
  if (stats.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    double num = static_cast<double>(stats.matches[n]);
    double den = static_cast<double>(stats.totals[n]);
    if (smooth && n > 0) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  const double c = static_cast<double>(stats.candidate_length);
  const double r = static_cast<double>(stats.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / kMaxOrder);
}

double SentenceBleu(const TokenSeq& candidate,
                    const std::vector<TokenSeq>& references, bool smooth) {
  return BleuFromStats(ComputeBleuStats(candidate, references), smooth);
}

double CorpusBleu(const std::vector<TokenSeq>& candidates,
                  const std::vector<std::vector<TokenSeq>>& references,
                  bool smooth) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "candidate and reference corpora differ in size");
  }
  BleuStats total;
  for (size_t i = 0; i < candidates.size(); ++i) {
    total += ComputeBleuStats(candidates[i], references[i]);
  }
  return BleuFromStats(total, smooth);
}

size_t LcsLength(const TokenSeq& a, const TokenSeq& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double RougeL(const TokenSeq& candidate,
              const std::vector<TokenSeq>& references, double beta) {
  RequireReferences(references);
  if (candidate.empty()) return 0.0;
  double best_p = 0.0, best_r = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const double lcs = static_cast<double>(LcsLength(candidate, ref));
    best_p = std::max(best_p, lcs / static_cast<double>(candidate.size()));
    best_r = std::max(best_r, lcs / static_cast<double>(ref.size()));
  }
  if (best_p == 0.0 || best_r == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * best_p * best_r / (best_r + b2 * best_p);
}

const char* CiderVariantName(CiderVariant variant) {
  return variant == CiderVariant::kD ? "CIDEr-D" : "CIDEr";
}

struct CiderScorer::Cooked {
  std::unordered_map<std::string, double> vec[kMaxOrder];
  double norm[kMaxOrder] = {0, 0, 0, 0};
  // Bigram count, the length measure of the reference CIDEr-D scorer.
  double length = 0.0;
};

CiderScorer::CiderScorer(const std::vector<std::vector<TokenSeq>>& ref_corpus,
                         CiderVariant variant, double sigma)
    : variant_(variant), sigma_(sigma) {
  if (ref_corpus.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "empty reference corpus");
  }
  for (const auto& refs : ref_corpus) {
    std::set<std::string> seen;
    for (const auto& ref : refs) {
      for (int n = 1; n <= kMaxOrder; ++n) {
        for (size_t i = 0; i + n <= ref.size(); ++i) {
          seen.insert(NgramKey(ref, i, n));
        }
      }
    }
    for (const auto& key : seen) document_frequency_[key] += 1.0;
  }
  if (ref_corpus.size() == 1) {
    // log(1) = 0 would zero every tf-idf weight.
    idf_floored_ = true;
    log_corpus_size_ = 1.0;
    std::cerr << "warning: " << CiderVariantName(variant)
              << " over a single-item corpus; idf floored to 1\n";
  } else {
    log_corpus_size_ = std::log(static_cast<double>(ref_corpus.size()));
  }
}

CiderScorer::Cooked CiderScorer::Cook(const TokenSeq& seq) const {
  Cooked cooked;
  for (int n = 1; n <= kMaxOrder; ++n) {
    for (const auto& [key, tf] : CountNgrams(seq, n)) {
      auto it = document_frequency_.find(key);
      const double df =
          std::log(std::max(1.0, it == document_frequency_.end() ? 0.0
                                                                 : it->second));
      const double w = static_cast<double>(tf) * (log_corpus_size_ - df);
      cooked.vec[n - 1][key] = w;
      cooked.norm[n - 1] += w * w;
      if (n == 2) cooked.length += static_cast<double>(tf);
    }
  }
  for (double& v : cooked.norm) v = std::sqrt(v);
  return cooked;
}

double CiderScorer::Score(const TokenSeq& candidate,
                          const std::vector<TokenSeq>& references) const {
  RequireReferences(references);
  const Cooked hyp = Cook(candidate);
  double total = 0.0;
  for (const auto& ref_seq : references) {
    const Cooked ref = Cook(ref_seq);
    const double delta = hyp.length - ref.length;
    const double penalty =
        variant_ == CiderVariant::kD
            ? std::exp(-(delta * delta) / (2.0 * sigma_ * sigma_))
            : 1.0;
    double sum = 0.0;
    for (int n = 0; n < kMaxOrder; ++n) {
      double val = 0.0;
      for (const auto& [key, w] : hyp.vec[n]) {
        auto it = ref.vec[n].find(key);
        if (it == ref.vec[n].end()) continue;
        const double clipped =
            variant_ == CiderVariant::kD ? std::min(w, it->second) : w;
        val += clipped * it->second;
      }
      if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) {
        val /= hyp.norm[n] * ref.norm[n];
      }
      sum += val * penalty;
    }
    total += sum / kMaxOrder;
  }
  return 10.0 * total / static_cast<double>(references.size());
}

CorpusScores CiderCorpus(const std::vector<TokenSeq>& candidates,
                         const std::vector<std::vector<TokenSeq>>& references,
                         CiderVariant variant) {
  if (candidates.size() != references.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "candidate and reference corpora differ in size");
  }
  const CiderScorer scorer(references, variant);
  CorpusScores out;
  for (size_t i = 0; i < candidates.size(); ++i) {
    out.per_item.push_back(scorer.Score(candidates[i], references[i]));
    out.mean += out.per_item.back();
  }
  if (!candidates.empty()) out.mean /= static_cast<double>(candidates.size());
  return out;
}

BadEndingLexicon BadEndingLexicon::Default() {
  return FromPhrases({"with a", "on a", "of a", "in a", "and a"});
}

BadEndingLexicon BadEndingLexicon::FromPhrases(
    const std::vector<std::string>& phrases) {
  BadEndingLexicon lex;
  for (const auto& p : phrases) {
    Words words = Tokenize(p);
    if (words.empty()) continue;
    lex.max_length_ = std::max(lex.max_length_, words.size());
    lex.phrases_.push_back(std::move(words));
  }
  if (lex.phrases_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "bad-ending lexicon is empty");
  }
  return lex;
}

std::optional<std::string> BadEndingLexicon::Match(
    const Words& candidate) const {
  const Words* best = nullptr;
  for (const auto& phrase : phrases_) {
    if (phrase.size() > candidate.size()) continue;
    if (!std::equal(phrase.begin(), phrase.end(),
                    candidate.end() - static_cast<long>(phrase.size()))) {
      continue;
    }
    if (best == nullptr || phrase.size() > best->size()) best = &phrase;
  }
  if (best == nullptr) return std::nullopt;
  std::string text;
  for (const auto& w : *best) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  return text;
}

BadEndingReport BadEndingRate(const std::vector<Words>& candidates,
                              const BadEndingLexicon& lexicon) {
  BadEndingReport report;
  report.total = static_cast<int64_t>(candidates.size());
  for (const auto& c : candidates) {
    if (auto phrase = lexicon.Match(c)) {
      ++report.flagged;
      ++report.histogram[*phrase];
    }
  }
  report.rate = report.total == 0 ? 0.0
                                  : static_cast<double>(report.flagged) /
                                        static_cast<double>(report.total);
  return report;
}

Words StripBadEnding(const Words& candidate, const BadEndingLexicon& lexicon,
                     bool single_pass) {
  Words out = candidate;
  while (auto phrase = lexicon.Match(out)) {
    out.resize(out.size() - Tokenize(*phrase).size());
    if (single_pass) break;
  }
  return out;
}

double NoveltyScore(const std::vector<Words>& candidates,
                    const std::vector<Words>& training_refs) {
  if (candidates.empty()) return 0.0;
  const std::set<Words> seen(training_refs.begin(), training_refs.end());
  int64_t novel = 0;
  for (const auto& c : candidates) {
    if (!seen.count(c)) ++novel;
  }
  return static_cast<double>(novel) / static_cast<double>(candidates.size());
}

ActionSpaceStats ComputeActionSpaceStats(
    const std::vector<std::vector<int>>& mask_sizes) {
  ActionSpaceStats stats;
  double total = 0.0;
  for (const auto& trace : mask_sizes) {
    for (int s : trace) {
      total += s;
      ++stats.steps;
      ++stats.histogram[s];
    }
  }
  stats.mean = stats.steps == 0 ? 0.0 : total / static_cast<double>(stats.steps);
  return stats;
}

ScoreReport ComputeScoreReport(const std::vector<ScoreInput>& inputs,
                               const BadEndingLexicon& lexicon,
                               bool single_pass_strip) {
  if (inputs.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no predictions to score");
  }
  Interner interner;
  std::vector<std::vector<TokenSeq>> refs;
  std::vector<TokenSeq> cands, stripped;
  std::vector<Words> cand_words, stripped_words;
  ScoreReport report;
  report.items = static_cast<int64_t>(inputs.size());
  for (const auto& in : inputs) {
    std::vector<TokenSeq> r;
    for (const auto& ref : in.references) r.push_back(interner.Intern(ref));
    report.references += static_cast<int64_t>(r.size());
    refs.push_back(std::move(r));
    cands.push_back(interner.Intern(in.candidate));
    stripped_words.push_back(
        StripBadEnding(in.candidate, lexicon, single_pass_strip));
    stripped.push_back(interner.Intern(stripped_words.back()));
    cand_words.push_back(in.candidate);
  }
  const CiderScorer cider(refs, CiderVariant::kPlain);
  const CiderScorer cider_d(refs, CiderVariant::kD);
  report.bleu4 = CorpusBleu(cands, refs);
  report.adjusted_bleu4 = CorpusBleu(stripped, refs);
  for (size_t i = 0; i < inputs.size(); ++i) {
    ScoreReport::Item item;
    item.id = inputs[i].id;
    for (const auto& w : inputs[i].candidate) {
      if (!item.caption.empty()) item.caption += ' ';
      item.caption += w;
    }
    item.bleu4 = SentenceBleu(cands[i], refs[i]);
    item.rouge_l = RougeL(cands[i], refs[i]);
    item.cider = cider.Score(cands[i], refs[i]);
    item.cider_d = cider_d.Score(cands[i], refs[i]);
    item.bad_ending = lexicon.Match(cand_words[i]).value_or("");
    report.rouge_l += item.rouge_l;
    report.cider += item.cider;
    report.cider_d += item.cider_d;
    report.adjusted_rouge_l += RougeL(stripped[i], refs[i]);
    report.adjusted_cider += cider.Score(stripped[i], refs[i]);
    report.adjusted_cider_d += cider_d.Score(stripped[i], refs[i]);
    report.per_item.push_back(std::move(item));
  }
  const double n = static_cast<double>(inputs.size());
  report.rouge_l /= n;
  report.cider /= n;
  report.cider_d /= n;
  report.adjusted_rouge_l /= n;
  report.adjusted_cider /= n;
  report.adjusted_cider_d /= n;
  report.bad_endings = BadEndingRate(cand_words, lexicon);
  report.adjusted_bad_end_rate = BadEndingRate(stripped_words, lexicon).rate;
  return report;
}

std::string ScoreReportJson(const ScoreReport& report, bool include_items) {
  nlohmann::ordered_json j;
  j["metric_version"] = "priorseq-metrics/1";
  j["rouge_beta"] = kRougeBeta;
  j["cider_d_sigma"] = 6.0;
  j["bleu"] = "corpus BLEU-4, closest reference length, unsmoothed";
  j["items"] = report.items;
  j["references"] = report.references;
  j["bleu4"] = Round6(report.bleu4);
  j["rouge_l"] = Round6(report.rouge_l);
  j["cider"] = Round6(report.cider);
  j["cider_d"] = Round6(report.cider_d);
  j["bad_end_rate"] = Round6(report.bad_endings.rate);
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [phrase, count] : report.bad_endings.histogram) {
    hist[phrase] = count;
  }
  j["bad_end_histogram"] = hist;
  nlohmann::ordered_json adj;
  adj["bleu4"] = Round6(report.adjusted_bleu4);
  adj["rouge_l"] = Round6(report.adjusted_rouge_l);
  adj["cider"] = Round6(report.adjusted_cider);
  adj["cider_d"] = Round6(report.adjusted_cider_d);
  adj["bad_end_rate"] = Round6(report.adjusted_bad_end_rate);
  j["adjusted"] = adj;
  if (include_items) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& item : report.per_item) {
      nlohmann::ordered_json row;
      row["id"] = item.id;
      row["caption"] = item.caption;
      row["bleu4"] = Round6(item.bleu4);
      row["rouge_l"] = Round6(item.rouge_l);
      row["cider"] = Round6(item.cider);
      row["cider_d"] = Round6(item.cider_d);
      row["bad_ending"] = item.bad_ending;
      rows.push_back(std::move(row));
    }
    j["per_item"] = rows;
  }
  std::string out;
  DumpJson(j, 0, &out);
  return out + "\n";
}

std::string ScoreReportTable(const ScoreReport& report,
                             const std::string& label) {
  char line[256];
  std::ostringstream out;
  std::snprintf(line, sizeof(line), "%-20s %10s %10s %10s %10s %12s\n",
                "Method", "CIDEr", "CIDEr-D", "BLEU4", "ROUGE-L",
                "BadEnd-Rate");
  out << line;
  std::snprintf(line, sizeof(line),
                "%-20s %10.1f %10.1f %10.1f %10.1f %11.1f%%\n", label.c_str(),
                100.0 * report.cider, 100.0 * report.cider_d,
                100.0 * report.bleu4, 100.0 * report.rouge_l,
                100.0 * report.bad_endings.rate);
  out << line;
  std::snprintf(line, sizeof(line),
                "%-20s %10.1f %10.1f %10.1f %10.1f %11.1f%%\n",
                (label + " (adj)").c_str(), 100.0 * report.adjusted_cider,
                100.0 * report.adjusted_cider_d, 100.0 * report.adjusted_bleu4,
                100.0 * report.adjusted_rouge_l,
                100.0 * report.adjusted_bad_end_rate);
  out << line;
  return out.str();
}

}  // namespace priorseq
