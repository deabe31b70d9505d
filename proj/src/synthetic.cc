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

#include "priorseq/synthetic.h"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "priorseq/error.h"
#include "priorseq/rng.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "corpus";

void CheckSize(int size, const std::vector<std::string>& pool,
               const char* name) {
  if (size < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                std::string("attribute set '") + name + "' is empty");
  }
  if (static_cast<size_t>(size) > pool.size()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                std::string("attribute set '") + name + "' exceeds pool of " +
                    std::to_string(pool.size()));
  }
}

}  // namespace

const std::vector<std::string>& SyntheticObjects() {
  static const std::vector<std::string> pool = {
      "cat",    "dog",     "bird",     "horse",    "cow",     "sheep",
      "bear",   "zebra",   "giraffe",  "elephant", "car",     "truck",
      "bus",    "bicycle", "motorcycle", "train",  "boat",    "airplane",
      "kite",   "umbrella", "ball",    "bottle",   "cup",     "bowl",
      "vase",   "clock",   "lamp",     "chair",    "laptop",  "phone",
      "book",   "teddy",   "pizza",    "cake",     "donut",   "banana",
      "apple",  "sandwich", "backpack", "suitcase"};
  return pool;
}

const std::vector<std::string>& SyntheticColors() {
  static const std::vector<std::string> pool = {
      "red",  "blue",   "green", "yellow", "black", "white",
      "brown", "purple", "pink", "gray",   "silver", "golden"};
  return pool;
}

const std::vector<std::string>& SyntheticRelations() {
  static const std::vector<std::string> pool = {
      "on",    "under",  "near",    "beside",  "behind",
      "above", "below",  "next to", "on top of", "in front of"};
  return pool;
}

const std::vector<std::string>& SyntheticGrounds() {
  static const std::vector<std::string> pool = {
      "table",  "mat",   "floor",    "grass",  "road",   "field",
      "beach",  "bed",   "desk",     "shelf",  "counter", "sidewalk",
      "street", "rug",   "carpet",   "sand",   "snow",   "dock",
      "fence",  "wall",  "tree",     "rock",   "box",    "tray",
      "plate",  "blanket", "bench",  "couch",  "stool",  "cart"};
  return pool;
}

std::string RenderCaption(const SyntheticScene& scene, int index) {
  const auto& o = SyntheticObjects().at(scene.object);
  const auto& c = SyntheticColors().at(scene.color);
  const auto& r = SyntheticRelations().at(scene.relation);
  const auto& g = SyntheticGrounds().at(scene.ground);
  switch (index) {
    case 0: return "a " + c + " " + o + " " + r + " the " + g;
    case 1: return "a " + c + " " + o + " sitting " + r + " a " + g;
    case 2: return "there is a " + c + " " + o + " " + r + " the " + g;
    case 3: return "the " + o + " " + r + " the " + g + " is " + c;
    case 4: return "a " + o + " that is " + c + " " + r + " a " + g;
    case 5: return "a photo of a " + c + " " + o + " " + r + " the " + g;
  }
  throw Error(ErrorCode::kInvalidArgument, kModule,
              "caption template index " + std::to_string(index));
}

int ObjectAttribute(int object, int j, int per_object, int size, int salt) {
  if (per_object <= 0 || per_object >= size) return j;
  const int step = size / per_object;
  return (object * salt + j * step) % size;
}

int SyntheticFeatureDim(const SyntheticConfig& config) {
  return config.objects + config.colors + config.relations + config.grounds;
}

SyntheticTask GenerateSyntheticTask(uint64_t seed, int n_items,
                                    const SyntheticConfig& config) {
  if (n_items < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "n_items must be >= 1");
  }
  CheckSize(config.objects, SyntheticObjects(), "objects");
  CheckSize(config.colors, SyntheticColors(), "colors");
  CheckSize(config.relations, SyntheticRelations(), "relations");
  CheckSize(config.grounds, SyntheticGrounds(), "grounds");
  if (config.locations < 1 || config.min_refs < 1 ||
      config.max_refs < config.min_refs ||
      config.max_refs > kNumCaptionTemplates) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "invalid locations or reference-count range");
  }

  Rng rng = Rng::Stream(seed, "taskgen");
  const int dim = SyntheticFeatureDim(config);
  const int offsets[4] = {0, config.objects, config.objects + config.colors,
                          config.objects + config.colors + config.relations};
  const int n_train = n_items * 8 / 10;
  const int n_val = n_items / 10;

  SyntheticTask task;
  task.captions.reserve(n_items);
  task.features.reserve(n_items);
  task.scenes.reserve(n_items);
  for (int i = 0; i < n_items; ++i) {
    SyntheticScene scene;
    scene.object = static_cast<int>(rng.UniformInt(config.objects));
    auto pick = [&](int per_object, int size, int salt) {
      const int n = per_object <= 0 ? size : std::min(per_object, size);
      const int j = static_cast<int>(rng.UniformInt(n));
      return ObjectAttribute(scene.object, j, per_object, size, salt);
    };
    scene.color = pick(config.palette, config.colors, 7);
    scene.relation = pick(config.relations_per_object, config.relations, 3);
    scene.ground = pick(config.grounds_per_object, config.grounds, 11);

    char id[32];
    std::snprintf(id, sizeof(id), "syn%06d", i);

    TextCaption caption;
    caption.item_id = id;
    caption.split = i < n_train           ? Split::kTrain
                    : i < n_train + n_val ? Split::kVal
                                          : Split::kTest;
    const int n_refs =
        config.min_refs +
        static_cast<int>(rng.UniformInt(config.max_refs - config.min_refs + 1));
    std::vector<int> templates(kNumCaptionTemplates);
    std::iota(templates.begin(), templates.end(), 0);
    rng.Shuffle(templates.begin(), templates.end());
    for (int k = 0; k < n_refs; ++k) {
      caption.refs.push_back(RenderCaption(scene, templates[k]));
    }

    const int active[4] = {offsets[0] + scene.object, offsets[1] + scene.color,
                           offsets[2] + scene.relation,
                           offsets[3] + scene.ground};
    FeatureGrid fg;
    fg.item_id = id;
    fg.grid = Matrix::Zero(config.locations, dim);
    for (int a = 0; a < 4; ++a) {
      const int period = std::min(config.locations, 4);
      for (int loc = 0; loc < config.locations; ++loc) {
        if (loc % period == a % period) fg.grid(loc, active[a]) = 1.0;
      }
    }
    for (int r = 0; r < config.locations; ++r) {
      for (int c = 0; c < dim; ++c) {
        // Stored as f32 on disk; round now so in-memory and loaded grids agree.
        fg.grid(r, c) = static_cast<float>(fg.grid(r, c) +
                                           config.noise * rng.Normal());
      }
    }

    task.captions.push_back(std::move(caption));
    task.features.push_back(std::move(fg));
    task.scenes.push_back(scene);
  }
  return task;
}

}  // namespace priorseq
