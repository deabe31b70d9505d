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

#include "priorseq/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "priorseq/checkpoint.h"
#include "priorseq/error.h"
#include "priorseq/learning_curve.h"
#include "priorseq/metrics.h"
#include "priorseq/policy.h"
#include "priorseq/rl_trainer.h"
#include "priorseq/rng.h"
#include "priorseq/synthetic.h"

namespace priorseq {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr char kModule[] = "cli";

// Tracks what a command read and wrote for its manifest.
class Run {
 public:
  Run(std::string command, const Config& config)
      : command_(std::move(command)), config_(config) {
    out_dir_ = config.GetString("paths.out");
    if (out_dir_.empty()) {
      throw Error(ErrorCode::kConfig, kModule, "paths.out: must be set");
    }
    fs::create_directories(out_dir_);
  }

  const Config& config() const { return config_; }

  // Value of a path key, which must be set and exist.
  fs::path Input(const std::string& key) {
    const std::string& p = config_.GetString(key);
    if (p.empty()) {
      throw Error(ErrorCode::kConfig, kModule, key + ": must be set");
    }
    if (!fs::exists(p)) {
      throw Error(ErrorCode::kConfig, kModule, key + ": no such file " + p);
    }
    inputs_[key] = p;
    return p;
  }

  fs::path Output(const std::string& name) {
    const fs::path p = out_dir_ / name;
    outputs_.push_back(p);
    return p;
  }

  void WriteManifest() const {
    ordered_json j;
    j["command"] = command_;
    j["config_hash"] = HexDigest(config_.Hash());
    j["seed"] = config_.GetUint("seed");
    ordered_json inputs = ordered_json::object();
    for (const auto& [key, path] : inputs_) {
      inputs[key] = {{"path", path.string()}, {"fnv1a", FileDigest(path)}};
    }
    j["inputs"] = inputs;
    ordered_json outputs = ordered_json::object();
    for (const auto& p : outputs_) {
      if (fs::exists(p)) outputs[p.filename().string()] = FileDigest(p);
    }
    j["outputs"] = outputs;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : config_.values()) cfg[k] = v;
    j["config"] = cfg;
    std::ofstream out(out_dir_ / (command_ + ".manifest.json"));
    out << j.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::kIo, kModule, "cannot write manifest");
  }

 private:
  std::string command_;
  const Config& config_;
  fs::path out_dir_;
  std::map<std::string, fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

int Threads(const Config& c) {
  const int64_t t = c.GetInt("threads");
  if (t < 1) throw Error(ErrorCode::kConfig, kModule, "threads: must be >= 1");
  return static_cast<int>(t);
}

int PositiveInt(const Config& c, const std::string& key) {
  const int64_t v = c.GetInt(key);
  if (v < 1) throw Error(ErrorCode::kConfig, kModule, key + ": must be >= 1");
  return static_cast<int>(v);
}

struct Loaded {
  Vocabulary vocab;
  Dataset data;
  std::vector<CaptionRecord> records;
};

Loaded LoadAll(Run* run) {
  const fs::path captions = run->Input("paths.captions");
  const fs::path features = run->Input("paths.features");
  const fs::path vocab = run->Input("paths.vocab");
  Loaded l{Vocabulary::Load(vocab), LoadDataset(captions, features), {}};
  l.records = EncodeCaptions(l.data.captions, l.vocab);
  return l;
}

// Registers the constraint's file, if any, as a manifest input.
ConstraintBundle Constraint(Run* run, const Loaded& l) {
  const Config& c = run->config();
  const std::string& spec = c.GetString("constraint");
  if (spec == "lm") {
    run->Input("paths.lm");
  } else if (spec.rfind("ngram:", 0) == 0 &&
             !c.GetString("paths.ngrams").empty()) {
    run->Input("paths.ngrams");
  }
  return LoadConstraint(c, l.vocab, l.records);
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, kModule, "cannot write " + path.string());
}

Decoder LoadOrCreatePolicy(Run* run, const Loaded& l) {
  const Config& c = run->config();
  if (!c.GetString("paths.checkpoint").empty()) {
    Decoder d =
        Decoder::FromCheckpoint(Checkpoint::Load(run->Input("paths.checkpoint")));
    if (d.dims().vocab != static_cast<int>(l.vocab.size())) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  "paths.checkpoint: vocabulary size differs from paths.vocab");
    }
    return d;
  }
  if (l.data.features.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, kModule, "no feature grids");
  }
  ModelDims dims;
  dims.arch = ParseArch(c.GetString("model.arch"));
  if (dims.arch == Arch::kLanguageModel) {
    throw Error(ErrorCode::kConfig, kModule,
                "model.arch: must be plain or attention");
  }
  dims.vocab = static_cast<int>(l.vocab.size());
  dims.embed = PositiveInt(c, "model.embed");
  dims.hidden = PositiveInt(c, "model.hidden");
  dims.attention_dim = PositiveInt(c, "model.attention_dim");
  dims.feature_dim = l.data.features.front().dim();
  Rng init = Rng::Stream(c.GetUint("seed"), "init");
  return Decoder::Create(dims, &init);
}

TrainConfig RlConfig(const Config& c) {
  TrainConfig t;
  t.reward = c.GetString("rl.reward");
  t.k = static_cast<int>(c.GetInt("rl.k"));
  t.batch = static_cast<int>(c.GetInt("rl.batch"));
  t.lr = c.GetDouble("rl.lr");
  t.anneal = c.GetDouble("rl.anneal");
  t.patience = static_cast<int>(c.GetInt("rl.patience"));
  t.clip = c.GetDouble("rl.clip");
  t.epochs = static_cast<int>(c.GetInt("rl.epochs"));
  t.max_len = static_cast<int>(c.GetInt("rl.max_len"));
  t.temperature = c.GetDouble("rl.temperature");
  t.average_all = c.GetBool("rl.average_all");
  t.constrain_at_inference = c.GetBool("rl.constrain_at_inference");
  t.strip_for_validation = c.GetBool("rl.strip_for_validation");
  t.seed = c.GetUint("seed");
  t.threads = Threads(c);
  t.deterministic = c.GetBool("deterministic");
  t.Validate();
  return t;
}

void CmdSynth(Run* run, std::ostream& out) {
  const Config& c = run->config();
  SyntheticConfig s;
  s.objects = PositiveInt(c, "synth.objects");
  s.colors = PositiveInt(c, "synth.colors");
  s.relations = PositiveInt(c, "synth.relations");
  s.grounds = PositiveInt(c, "synth.grounds");
  s.locations = PositiveInt(c, "synth.locations");
  s.noise = c.GetDouble("synth.noise");
  s.palette = static_cast<int>(c.GetInt("synth.palette"));
  s.relations_per_object =
      static_cast<int>(c.GetInt("synth.relations_per_object"));
  s.grounds_per_object = static_cast<int>(c.GetInt("synth.grounds_per_object"));
  s.min_refs = PositiveInt(c, "synth.min_refs");
  s.max_refs = PositiveInt(c, "synth.max_refs");
  const SyntheticTask task = GenerateSyntheticTask(
      c.GetUint("seed"), PositiveInt(c, "synth.items"), s);
  WriteCaptions(run->Output("captions.jsonl"), task.captions);
  WriteFeatures(run->Output("features.psqf"), task.features);
  out << "wrote " << task.captions.size() << " items\n";
}

void CmdBuildVocab(Run* run, std::ostream& out) {
  const auto captions = ReadCaptions(run->Input("paths.captions"));
  const Vocabulary vocab = Vocabulary::Build(
      TrainingSentences(captions),
      static_cast<int>(run->config().GetInt("vocab.min_count")));
  vocab.Save(run->Output("vocab.txt"));
  out << "vocabulary size " << vocab.size() << "\n";
}

void CmdBuildNgrams(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const Vocabulary vocab = Vocabulary::Load(run->Input("paths.vocab"));
  const auto records =
      EncodeCaptions(ReadCaptions(run->Input("paths.captions")), vocab);
  const NGramPrior prior =
      NGramPrior::Build(records, static_cast<int>(c.GetInt("ngram.n")),
                        c.GetInt("ngram.min_freq"), vocab.size());
  prior.Save(run->Output("ngrams.txt"), vocab);
  out << prior.table().total_ngrams() << " " << prior.order() << "-grams over "
      << prior.table().num_contexts() << " contexts\n";
}

void CmdTrainLm(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const Vocabulary vocab = Vocabulary::Load(run->Input("paths.vocab"));
  const auto records =
      EncodeCaptions(ReadCaptions(run->Input("paths.captions")), vocab);
  LmTrainConfig lc;
  lc.embed = PositiveInt(c, "lm.embed");
  lc.hidden = PositiveInt(c, "lm.hidden");
  lc.epochs = static_cast<int>(c.GetInt("lm.epochs"));
  lc.batch = PositiveInt(c, "lm.batch");
  lc.lr = c.GetDouble("lm.lr");
  lc.seed = c.GetUint("seed");
  LmTrainReport report;
  const LanguageModel lm =
      TrainLanguageModel(records, static_cast<int>(vocab.size()), lc, &report);
  Checkpoint ckpt;
  lm.Save(&ckpt);
  ckpt.Save(run->Output("lm.ckpt"));
  std::string csv = "epoch,cross_entropy\n";
  char buf[64];
  for (size_t i = 0; i < report.epoch_cross_entropy.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i + 1,
                  report.epoch_cross_entropy[i]);
    csv += buf;
  }
  WriteText(run->Output("lm_curve.csv"), csv);
  if (!report.epoch_cross_entropy.empty()) {
    out << "final cross-entropy " << report.epoch_cross_entropy.back() << "\n";
  }
}

void CmdTrainMle(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const Loaded l = LoadAll(run);
  Decoder policy = LoadOrCreatePolicy(run, l);
  const SplitView train =
      SelectSplit(l.records, l.data.features, Split::kTrain);
  const SplitView val = SelectSplit(l.records, l.data.features, Split::kVal);
  MleConfig mc;
  mc.epochs = static_cast<int>(c.GetInt("mle.epochs"));
  mc.batch = PositiveInt(c, "mle.batch");
  mc.lr = c.GetDouble("mle.lr");
  mc.max_len = PositiveInt(c, "rl.max_len");
  mc.seed = c.GetUint("seed");
  mc.threads = Threads(c);
  const MleReport report = TrainMle(&policy, {train.records, train.features},
                                    {val.records, val.features}, mc, l.vocab);
  Checkpoint ckpt;
  policy.Save(&ckpt);
  ckpt.Save(run->Output("mle.ckpt"));
  std::string csv = "epoch,train_loss,val_cider\n";
  char buf[96];
  for (size_t i = 0; i < report.train_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", i + 1,
                  report.train_loss[i],
                  i < report.val_cider.size() ? report.val_cider[i] : 0.0);
    csv += buf;
  }
  WriteText(run->Output("mle_log.csv"), csv);
  out << "kept epoch " << report.best_epoch << "\n";
}

void CmdTrainRl(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const Loaded l = LoadAll(run);
  Decoder policy = LoadOrCreatePolicy(run, l);
  const TrainConfig tc = RlConfig(c);
  const ConstraintBundle constraint = Constraint(run, l);
  const SplitView train =
      SelectSplit(l.records, l.data.features, Split::kTrain);
  const SplitView val = SelectSplit(l.records, l.data.features, Split::kVal);
  const RlResult result =
      TrainRl(&policy, {train.records, train.features},
              {val.records, val.features}, tc, constraint.prior(), l.vocab);
  Checkpoint ckpt;
  policy.Save(&ckpt);
  ckpt.Save(run->Output("rl.ckpt"));
  result.curve.Save(run->Output("curve.csv"));
  WriteText(run->Output("curve.svg"),
            result.curve.ToSvg("self-critical, constraint " + constraint.label));
  // Wall clock lives outside the manifest so deterministic runs compare.
  std::string timing = "epoch,seconds\n";
  char buf[64];
  for (size_t i = 0; i < result.wall_seconds.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.3f\n", i + 1,
                  result.wall_seconds[i]);
    timing += buf;
  }
  WriteText(fs::path(c.GetString("paths.out")) / "timing.csv", timing);
  if (!result.curve.rows.empty()) {
    const CurveRow& last = result.curve.rows.back();
    out << "epoch " << last.epoch << " val_cider " << last.val_cider
        << " bad_end_rate " << last.bad_end_rate << " mask "
        << last.mean_mask_size << "\n";
  }
}

void CmdDecode(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const Loaded l = LoadAll(run);
  if (c.GetString("paths.checkpoint").empty()) {
    throw Error(ErrorCode::kConfig, kModule, "paths.checkpoint: must be set");
  }
  const Decoder policy = LoadOrCreatePolicy(run, l);
  const ConstraintBundle constraint = Constraint(run, l);
  const SplitView view = SelectSplit(l.records, l.data.features,
                                     ParseSplit(c.GetString("decode.split")));
  DecodeConfig dc;
  dc.max_len = PositiveInt(c, "decode.max_len");
  const std::string& mode = c.GetString("decode.mode");
  if (mode == "greedy") {
    dc.mode = DecodeMode::kGreedy;
  } else if (mode == "sample") {
    dc.mode = DecodeMode::kSample;
  } else {
    throw Error(ErrorCode::kConfig, kModule,
                "decode.mode: expected greedy or sample");
  }
  const ActionPrior* prior =
      c.GetBool("decode.constrain") ? constraint.prior() : nullptr;
  std::vector<DecodeResult> results(view.records.size());
  ParallelFor(results.size(), Threads(c), [&](size_t i) {
    Rng rng = Rng::Stream(c.GetUint("seed"), "gumbel", i);
    results[i] = Decode(policy, &view.features[i], dc, prior, &rng);
  });
  std::ofstream file(run->Output("predictions.jsonl"));
  for (size_t i = 0; i < results.size(); ++i) {
    ordered_json j;
    j["id"] = view.records[i].item_id;
    j["caption"] = l.vocab.ToText(results[i].tokens);
    j["log_prob"] = results[i].log_prob();
    j["ended"] = results[i].ended;
    j["fallbacks"] = results[i].fallbacks;
    j["mask_sizes"] = results[i].mask_sizes;
    file << j.dump() << "\n";
  }
  if (!file) throw Error(ErrorCode::kIo, kModule, "cannot write predictions");
  out << "decoded " << results.size() << " items\n";
}

struct Prediction {
  std::string id;
  std::string caption;
  std::vector<int> mask_sizes;
};

std::vector<Prediction> ReadPredictions(const fs::path& path) {
  std::ifstream in(path);
  std::vector<Prediction> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Prediction p;
      p.id = j.at("id").get<std::string>();
      p.caption = j.at("caption").get<std::string>();
      if (j.contains("mask_sizes")) {
        p.mask_sizes = j.at("mask_sizes").get<std::vector<int>>();
      }
      preds.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  path.string() + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return preds;
}

std::vector<ScoreInput> JoinPredictions(
    const std::vector<Prediction>& preds,
    const std::vector<TextCaption>& captions) {
  std::map<std::string, const TextCaption*> by_id;
  for (const auto& c : captions) by_id[c.item_id] = &c;
  std::vector<ScoreInput> inputs;
  for (const auto& p : preds) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMalformedInput, kModule,
                  "prediction for unknown item " + p.id);
    }
    ScoreInput in;
    in.id = p.id;
    in.candidate = Tokenize(p.caption);
    for (const auto& r : it->second->refs) in.references.push_back(Tokenize(r));
    inputs.push_back(std::move(in));
  }
  return inputs;
}

void CmdScore(Run* run, std::ostream& out) {
  const Config& c = run->config();
  const auto preds = ReadPredictions(run->Input("paths.predictions"));
  const auto captions = ReadCaptions(run->Input("paths.captions"));
  const auto lexicon =
      BadEndingLexicon::FromPhrases(c.GetList("score.lexicon"));
  const ScoreReport report =
      ComputeScoreReport(JoinPredictions(preds, captions), lexicon,
                         c.GetBool("score.single_pass_strip"));
  WriteText(run->Output("score.json"),
            ScoreReportJson(report, c.GetBool("score.items")));
  const std::string table = ScoreReportTable(report, c.GetString("score.label"));
  WriteText(run->Output("score.txt"), table);
  const std::string& format = c.GetString("score.format");
  if (format == "table") {
    out << table;
  } else if (format == "json") {
    out << ScoreReportJson(report, false);
  } else {
    throw Error(ErrorCode::kConfig, kModule,
                "score.format: expected json or table");
  }
}

void CmdAnalyze(Run* run, std::ostream& out) {
  const Config& c = run->config();
  ordered_json j;
  const auto curve_paths = c.GetList("paths.curves");
  if (!curve_paths.empty()) {
    auto labels = c.GetList("analyze.labels");
    std::vector<LearningCurve> curves;
    for (size_t i = 0; i < curve_paths.size(); ++i) {
      if (!fs::exists(curve_paths[i])) {
        throw Error(ErrorCode::kConfig, kModule,
                    "paths.curves: no such file " + curve_paths[i]);
      }
      curves.push_back(LearningCurve::Load(curve_paths[i]));
      if (labels.size() <= i) labels.push_back(fs::path(curve_paths[i]).stem());
    }
    // The first curve is the reference whose final reward sets the target.
    const double fraction = c.GetDouble("analyze.target");
    const double target = curves[0].rows.empty()
                              ? 0.0
                              : fraction * curves[0].rows.back().val_cider;
    j["target_val_cider"] = target;
    auto rows = ordered_json::array();
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %7s %10s %10s %9s %9s %10s\n",
                  "run", "epochs", "final", "best", "to-target", "mask",
                  "max-badend");
    out << line;
    for (size_t i = 0; i < curves.size(); ++i) {
      const auto& r = curves[i].rows;
      double best = 0.0, max_bad = 0.0, mask = 0.0;
      int64_t fallbacks = 0;
      for (const auto& row : r) {
        best = std::max(best, row.val_cider);
        max_bad = std::max(max_bad, row.bad_end_rate);
        mask += row.mean_mask_size;
        fallbacks += row.fallbacks;
      }
      if (!r.empty()) mask /= static_cast<double>(r.size());
      ordered_json row;
      row["label"] = labels[i];
      row["epochs"] = r.size();
      row["final_val_cider"] = r.empty() ? 0.0 : r.back().val_cider;
      row["best_val_cider"] = best;
      row["epochs_to_target"] = curves[i].EpochsToReach(target);
      row["mean_mask_size"] = mask;
      row["max_bad_end_rate"] = max_bad;
      row["fallbacks"] = fallbacks;
      rows.push_back(row);
      std::snprintf(line, sizeof(line),
                    "%-16s %7zu %10.4f %10.4f %9d %9.2f %10.4f\n",
                    labels[i].c_str(), r.size(),
                    r.empty() ? 0.0 : r.back().val_cider, best,
                    curves[i].EpochsToReach(target), mask, max_bad);
      out << line;
    }
    j["runs"] = rows;
    WriteText(run->Output("compare.svg"), CompareSvg(labels, curves));
  }
  if (!c.GetString("paths.predictions").empty()) {
    const auto preds = ReadPredictions(run->Input("paths.predictions"));
    const auto captions = ReadCaptions(run->Input("paths.captions"));
    const auto inputs = JoinPredictions(preds, captions);
    std::vector<Words> candidates;
    std::vector<std::vector<int>> masks;
    for (size_t i = 0; i < inputs.size(); ++i) {
      candidates.push_back(inputs[i].candidate);
      masks.push_back(preds[i].mask_sizes);
    }
    std::vector<Words> training;
    for (const auto& s : TrainingSentences(captions)) training.push_back(s);
    const auto lexicon =
        BadEndingLexicon::FromPhrases(c.GetList("score.lexicon"));
    const BadEndingReport bad = BadEndingRate(candidates, lexicon);
    const ActionSpaceStats space = ComputeActionSpaceStats(masks);
    ordered_json p;
    p["items"] = inputs.size();
    p["novelty"] = NoveltyScore(candidates, training);
    p["bad_end_rate"] = bad.rate;
    ordered_json hist = ordered_json::object();
    for (const auto& [phrase, n] : bad.histogram) hist[phrase] = n;
    p["bad_end_histogram"] = hist;
    p["mean_mask_size"] = space.mean;
    p["mask_steps"] = space.steps;
    j["predictions"] = p;
    out << "novelty " << p["novelty"].get<double>() << " bad_end_rate "
        << bad.rate << " mean_mask_size " << space.mean << "\n";
  }
  if (j.empty()) {
    throw Error(ErrorCode::kConfig, kModule,
                "paths.curves: set it or paths.predictions to analyze");
  }
  WriteText(run->Output("analysis.json"), j.dump(2) + "\n");
}

using Handler = void (*)(Run*, std::ostream&);

const std::map<std::string, Handler>& Handlers() {
  static const std::map<std::string, Handler> handlers = {
      {"synth", CmdSynth},         {"build-vocab", CmdBuildVocab},
      {"build-ngrams", CmdBuildNgrams}, {"train-lm", CmdTrainLm},
      {"train-mle", CmdTrainMle},  {"train-rl", CmdTrainRl},
      {"decode", CmdDecode},       {"score", CmdScore},
      {"analyze", CmdAnalyze},
  };
  return handlers;
}

}  // namespace

const ActionPrior* ConstraintBundle::prior() const {
  if (ngram) return ngram.get();
  if (lm_prior) return lm_prior.get();
  return nullptr;
}

ConstraintBundle LoadConstraint(const Config& config, const Vocabulary& vocab,
                                const std::vector<CaptionRecord>& records) {
  ConstraintBundle b;
  const std::string& spec = config.GetString("constraint");
  b.label = spec;
  if (spec == "none") return b;
  if (spec.rfind("ngram:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(spec.substr(6));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kConfig, kModule,
                  "constraint: expected ngram:<n>, got '" + spec + "'");
    }
    const std::string& path = config.GetString("paths.ngrams");
    if (!path.empty()) {
      b.ngram = std::make_unique<NGramPrior>(NGramPrior::Load(path, vocab));
      if (b.ngram->order() != n) {
        throw Error(ErrorCode::kConfig, kModule,
                    "constraint: paths.ngrams holds order " +
                        std::to_string(b.ngram->order()) + ", not " +
                        std::to_string(n));
      }
    } else {
      b.ngram = std::make_unique<NGramPrior>(NGramPrior::Build(
          records, n, config.GetInt("ngram.min_freq"), vocab.size()));
    }
    b.ngram->set_allow_fallback(config.GetBool("ngram.fallback"));
    return b;
  }
  if (spec == "lm") {
    const std::string& path = config.GetString("paths.lm");
    if (path.empty()) {
      throw Error(ErrorCode::kConfig, kModule,
                  "paths.lm: must be set for constraint lm");
    }
    b.lm = std::make_unique<LanguageModel>(
        LanguageModel::FromCheckpoint(Checkpoint::Load(path)));
    if (b.lm->vocab_size() != static_cast<int>(vocab.size())) {
      throw Error(ErrorCode::kDimensionMismatch, kModule,
                  "paths.lm: vocabulary size differs from paths.vocab");
    }
    ThresholdSchedule s;
    s.eta0 = config.GetDouble("lm.eta0");
    s.growth = config.GetDouble("lm.growth");
    b.lm_prior = std::make_unique<LmPrior>(*b.lm, s);
    return b;
  }
  throw Error(ErrorCode::kConfig, kModule,
              "constraint: expected none, ngram:<n> or lm, got '" + spec + "'");
}

const std::vector<std::string>& CommandNames() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, h] : Handlers()) n.push_back(name);
    return n;
  }();
  return names;
}

void RunCommand(const std::string& command, const Config& config,
                std::ostream& out) {
  auto it = Handlers().find(command);
  if (it == Handlers().end()) {
    throw Error(ErrorCode::kConfig, kModule, "unknown command " + command);
  }
  Threads(config);
  Run run(command, config);
  it->second(&run, out);
  run.WriteManifest();
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"priorseq: prior-constrained self-critical sequence training"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_paths;
  for (const auto& name : CommandNames()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_paths[name], "key = value file");
    for (const auto& key : KnownConfigKeys()) {
      sub->add_option("--" + key.name, flags[name][key.name], key.help);
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  CLI::App* sub = app.get_subcommand(command);
  try {
    Config config = Config::Defaults();
    if (const char* env = std::getenv("PRIORSEQ_THREADS")) {
      config.Set("threads", env);
    }
    if (!config_paths[command].empty()) {
      config.LoadFile(config_paths[command]);
    }
    for (const auto& key : KnownConfigKeys()) {
      if (sub->count("--" + key.name) > 0) {
        config.Set(key.name, flags[command][key.name]);
      }
    }
    RunCommand(command, config, out);
    return 0;
  } catch (const Error& e) {
    err << "priorseq " << command << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "priorseq " << command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace priorseq
