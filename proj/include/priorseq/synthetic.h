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

#ifndef PRIORSEQ_SYNTHETIC_H_
#define PRIORSEQ_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "priorseq/corpus.h"

namespace priorseq {

// Sizes of the attribute sets a synthetic scene is drawn from. Each size is
// bounded by the built-in word pool for that attribute.
struct SyntheticConfig {
  int objects = 40;
  int colors = 12;
  int relations = 10;
  int grounds = 30;
  // Feature grid locations. L = 1 packs every attribute block into one
  // vector; otherwise attribute a lights every location loc with
  // loc % min(L, 4) == a % min(L, 4).
  int locations = 1;
  double noise = 0.1;
  int min_refs = 5;
  int max_refs = 5;
  // Scenes are correlated: each object comes in `palette` colors, takes
  // `relations_per_object` relations and `grounds_per_object` grounds,
  // fixed per object. 0 lifts the restriction for that attribute.
  int palette = 2;
  int relations_per_object = 1;
  int grounds_per_object = 3;
};

// Attribute index for choice `j` of object `object` among `per_object`
// options out of `size`; `salt` spreads objects over the attribute set.
int ObjectAttribute(int object, int j, int per_object, int size, int salt);

struct SyntheticScene {
  int object = 0;
  int color = 0;
  int relation = 0;
  int ground = 0;
};

struct SyntheticTask {
  std::vector<TextCaption> captions;
  std::vector<FeatureGrid> features;
  std::vector<SyntheticScene> scenes;
};

// Built-in attribute word pools.
const std::vector<std::string>& SyntheticObjects();
const std::vector<std::string>& SyntheticColors();
const std::vector<std::string>& SyntheticRelations();
const std::vector<std::string>& SyntheticGrounds();

inline constexpr int kNumCaptionTemplates = 6;

// Instantiates caption template `index` for a scene.
std::string RenderCaption(const SyntheticScene& scene, int index);

// Feature dimension D for a config: one one-hot block per attribute.
int SyntheticFeatureDim(const SyntheticConfig& config);

// Deterministic given `seed`. Items are split 80/10/10 into train, val and
// test in generation order.
SyntheticTask GenerateSyntheticTask(uint64_t seed, int n_items,
                                    const SyntheticConfig& config);

}  // namespace priorseq

#endif  // PRIORSEQ_SYNTHETIC_H_
