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


#ifndef PRIORSEQ_LEARNING_CURVE_H_
#define PRIORSEQ_LEARNING_CURVE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace priorseq {

struct CurveRow {
  int epoch = 0;
  double seconds = 0.0;
  double mean_reward = 0.0;
  double mean_baseline = 0.0;
  double val_cider = 0.0;
  double val_bleu4 = 0.0;
  double val_rouge_l = 0.0;
  double bad_end_rate = 0.0;
  double mean_mask_size = 0.0;
  int64_t fallbacks = 0;
  double lr = 0.0;

  bool operator==(const CurveRow&) const = default;
};

inline constexpr char kCurveHeader[] =
    "epoch,seconds,mean_reward,mean_baseline,val_cider,val_bleu4,val_rougeL,"
    "bad_end_rate,mean_mask_size,fallbacks,lr";

struct LearningCurve {
  std::vector<CurveRow> rows;

  std::string ToCsv() const;
  static LearningCurve FromCsv(const std::string& text);
  void Save(const std::filesystem::path& path) const;
  static LearningCurve Load(const std::filesystem::path& path);

  // Line chart of mean_reward and val_cider against epoch.
  std::string ToSvg(const std::string& title) const;

  // First epoch whose val_cider reaches `target`, or -1.
  int EpochsToReach(double target) const;
};

// Several curves on one chart, one polyline per curve, val_cider only.
std::string CompareSvg(const std::vector<std::string>& labels,
                       const std::vector<LearningCurve>& curves);

}  // namespace priorseq

#endif  // PRIORSEQ_LEARNING_CURVE_H_
