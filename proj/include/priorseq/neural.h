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

#ifndef PRIORSEQ_NEURAL_H_
#define PRIORSEQ_NEURAL_H_

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "priorseq/action_prior.h"
#include "priorseq/rng.h"
#include "priorseq/tensor.h"

namespace priorseq {

// Insertion-ordered collection of named tensors. Vectors are stored as
// n x 1 matrices. Gradients use a ParamSet with the same layout.
class ParamSet {
 public:
  Matrix& Add(const std::string& name, int rows, int cols);
  Matrix& Add(const std::string& name, Matrix value);

  bool Contains(const std::string& name) const;
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  size_t size() const { return entries_.size(); }
  const std::string& name(size_t i) const { return entries_[i].first; }
  Matrix& value(size_t i) { return entries_[i].second; }
  const Matrix& value(size_t i) const { return entries_[i].second; }

  ParamSet ZerosLike() const;
  void SetZero();
  void AddScaled(const ParamSet& other, double scale);
  void Scale(double factor);
  double SquaredNorm() const;
  bool AllFinite() const;
  bool SameLayout(const ParamSet& other) const;
  size_t num_values() const;

  bool operator==(const ParamSet& other) const;

 private:
  std::vector<std::pair<std::string, Matrix>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Uniform(-scale, scale) in row-major order.
void InitUniform(Matrix* m, double scale, Rng* rng);

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate rows of the stacked LSTM weights: [input; forget; output; candidate].
struct LstmWeights {
  const Matrix* w_x = nullptr;  // 4H x I
  const Matrix* w_h = nullptr;  // 4H x H
  const Matrix* b = nullptr;    // 4H x 1

  int hidden() const { return static_cast<int>(w_h->cols()); }
  int input() const { return static_cast<int>(w_x->cols()); }
};

struct LstmGrads {
  Matrix* w_x = nullptr;
  Matrix* w_h = nullptr;
  Matrix* b = nullptr;
};

LstmWeights LstmWeightsIn(const ParamSet& params, const std::string& prefix);
LstmGrads LstmGradsIn(ParamSet* grads, const std::string& prefix);

// Registers "<prefix>/w_x", "<prefix>/w_h", "<prefix>/b" with uniform(-0.08,
// 0.08) weights, zero biases and forget-gate bias +1.
void AddLstmParams(ParamSet* params, const std::string& prefix, int input,
                   int hidden, Rng* rng);

struct LstmCache {
  Vector x, h_prev, c_prev;
  Vector i, f, o, g;  // gate activations
  Vector c, tanh_c, h;

  bool valid() const { return h.size() > 0; }
};

// c = f*c_prev + i*g, h = o*tanh(c) with sigmoid i, f, o and tanh g.
LstmCache LstmForward(const LstmWeights& w, const Vector& x,
                      const Vector& h_prev, const Vector& c_prev);

// Accumulates parameter gradients into `grads` and writes the gradients
// with respect to x, h_prev and c_prev. Any output pointer may be null.
void LstmBackward(const LstmWeights& w, const LstmCache& cache,
                  const Vector& dh, const Vector& dc, const LstmGrads& grads,
                  Vector* dx, Vector* dh_prev, Vector* dc_prev);

// Softmax of logits / temperature restricted to the mask (null = all ones).
// Off-mask entries are exactly zero. Throws kMaskEmpty for an empty mask.
Vector MaskedSoftmax(const Vector& logits, const MaskVector* mask,
                     double temperature = 1.0);

// Log of MaskedSoftmax; off-mask entries are -inf.
Vector MaskedLogSoftmax(const Vector& logits, const MaskVector* mask,
                        double temperature = 1.0);

// Gumbel-max draw: argmax over on-mask ids of scores_i + G_i. `scores` may
// be logits or log-probabilities. Throws kMaskEmpty for an empty mask.
TokenId GumbelSample(const Vector& scores, const MaskVector* mask, Rng* rng);

// Argmax over on-mask ids, ties to the lowest id.
TokenId MaskedArgmax(const Vector& scores, const MaskVector* mask);

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet m;
  ParamSet v;
  int64_t step = 0;
  AdamConfig config;
};

AdamState InitAdam(const ParamSet& params, const AdamConfig& config);

// Bias-corrected Adam step. Throws kNonFiniteGradient before touching
// anything if a gradient value is NaN or infinite.
void AdamUpdate(AdamState* state, ParamSet* params, const ParamSet& grads);

// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns
// the norm before clipping.
double ClipGlobalNorm(ParamSet* grads, double max_norm);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  size_t checked = 0;
};

// Compares `analytic` with central differences of `loss` at every
// coordinate. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult CheckGradients(
    ParamSet* params, const ParamSet& analytic,
    const std::function<double(const ParamSet&)>& loss, double step = 1e-5,
    double floor = 1e-4);

}  // namespace priorseq

#endif  // PRIORSEQ_NEURAL_H_
