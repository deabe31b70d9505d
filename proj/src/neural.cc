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

#include "priorseq/neural.h"

#include <cmath>
#include <limits>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "neural";

void RequireShape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                what + " is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void RequireSize(const Vector& v, Eigen::Index n, const std::string& what) {
  if (v.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                what + " has size " + std::to_string(v.size()) +
                    ", expected " + std::to_string(n));
  }
}

void CheckMask(const Vector& logits, const MaskVector* mask) {
  if (mask == nullptr) return;
  if (mask->size() != static_cast<size_t>(logits.size())) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "mask length " + std::to_string(mask->size()) +
                    " differs from logits length " +
                    std::to_string(logits.size()));
  }
  if (mask->empty()) {
    throw Error(ErrorCode::kMaskEmpty, kModule, "mask has no allowed token");
  }
}

}  // namespace

Matrix& ParamSet::Add(const std::string& name, int rows, int cols) {
  return Add(name, Matrix::Zero(rows, cols));
}

Matrix& ParamSet::Add(const std::string& name, Matrix value) {
  if (index_.count(name)) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "duplicate parameter '" + name + "'");
  }
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

bool ParamSet::Contains(const std::string& name) const {
  return index_.count(name) > 0;
}

Matrix& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "unknown parameter '" + name + "'");
  }
  return entries_[it->second].second;
}

const Matrix& ParamSet::at(const std::string& name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

ParamSet ParamSet::ZerosLike() const {
  ParamSet out;
  for (const auto& [name, m] : entries_) {
    out.Add(name, static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  }
  return out;
}

void ParamSet::SetZero() {
  for (auto& e : entries_) e.second.setZero();
}

void ParamSet::AddScaled(const ParamSet& other, double scale) {
  if (!SameLayout(other)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "parameter sets differ in layout");
  }
  for (size_t i = 0; i < entries_.size(); ++i) {
    entries_[i].second += scale * other.entries_[i].second;
  }
}

void ParamSet::Scale(double factor) {
  for (auto& e : entries_) e.second *= factor;
}

double ParamSet::SquaredNorm() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.second.squaredNorm();
  return total;
}

bool ParamSet::AllFinite() const {
  for (const auto& e : entries_) {
    if (!e.second.allFinite()) return false;
  }
  return true;
}

bool ParamSet::SameLayout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.rows() != other.entries_[i].second.rows() ||
        entries_[i].second.cols() != other.entries_[i].second.cols()) {
      return false;
    }
  }
  return true;
}

size_t ParamSet::num_values() const {
  size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

bool ParamSet::operator==(const ParamSet& other) const {
  if (!SameLayout(other)) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].second != other.entries_[i].second) return false;
  }
  return true;
}

void InitUniform(Matrix* m, double scale, Rng* rng) {
  for (Eigen::Index r = 0; r < m->rows(); ++r) {
    for (Eigen::Index c = 0; c < m->cols(); ++c) {
      (*m)(r, c) = rng->Uniform(-scale, scale);
    }
  }
}

LstmWeights LstmWeightsIn(const ParamSet& params, const std::string& prefix) {
  return {&params.at(prefix + "/w_x"), &params.at(prefix + "/w_h"),
          &params.at(prefix + "/b")};
}

LstmGrads LstmGradsIn(ParamSet* grads, const std::string& prefix) {
  return {&grads->at(prefix + "/w_x"), &grads->at(prefix + "/w_h"),
          &grads->at(prefix + "/b")};
}

void AddLstmParams(ParamSet* params, const std::string& prefix, int input,
                   int hidden, Rng* rng) {
  InitUniform(&params->Add(prefix + "/w_x", 4 * hidden, input), 0.08, rng);
  InitUniform(&params->Add(prefix + "/w_h", 4 * hidden, hidden), 0.08, rng);
  Matrix& b = params->Add(prefix + "/b", 4 * hidden, 1);
  b.block(hidden, 0, hidden, 1).setOnes();
}

LstmCache LstmForward(const LstmWeights& w, const Vector& x,
                      const Vector& h_prev, const Vector& c_prev) {
  const int hidden = w.hidden();
  RequireShape(*w.w_h, 4 * hidden, hidden, "lstm w_h");
  RequireShape(*w.b, 4 * hidden, 1, "lstm b");
  RequireShape(*w.w_x, 4 * hidden, x.size(), "lstm w_x");
  RequireSize(h_prev, hidden, "h_prev");
  RequireSize(c_prev, hidden, "c_prev");

  LstmCache cache;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  Vector a = (*w.w_x) * x + (*w.w_h) * h_prev + w.b->col(0);
  auto sigmoid = [](double v) { return Sigmoid(v); };
  cache.i = a.segment(0, hidden).unaryExpr(sigmoid);
  cache.f = a.segment(hidden, hidden).unaryExpr(sigmoid);
  cache.o = a.segment(2 * hidden, hidden).unaryExpr(sigmoid);
  cache.g = a.segment(3 * hidden, hidden).array().tanh();
  cache.c = cache.f.cwiseProduct(c_prev) + cache.i.cwiseProduct(cache.g);
  cache.tanh_c = cache.c.array().tanh();
  cache.h = cache.o.cwiseProduct(cache.tanh_c);
  return cache;
}

void LstmBackward(const LstmWeights& w, const LstmCache& cache,
                  const Vector& dh, const Vector& dc, const LstmGrads& grads,
                  Vector* dx, Vector* dh_prev, Vector* dc_prev) {
  if (!cache.valid()) {
    throw Error(ErrorCode::kMissingCache, kModule,
                "lstm backward called without a forward cache");
  }
  const int hidden = w.hidden();
  RequireSize(dh, hidden, "dh");
  RequireSize(dc, hidden, "dc");

  const Vector dc_total =
      dc + dh.cwiseProduct(cache.o).cwiseProduct(
               (1.0 - cache.tanh_c.array().square()).matrix());
  Vector da(4 * hidden);
  da.segment(0, hidden) =
      dc_total.cwiseProduct(cache.g).cwiseProduct(
          cache.i.cwiseProduct((1.0 - cache.i.array()).matrix()));
  da.segment(hidden, hidden) =
      dc_total.cwiseProduct(cache.c_prev)
          .cwiseProduct(cache.f.cwiseProduct((1.0 - cache.f.array()).matrix()));
  da.segment(2 * hidden, hidden) =
      dh.cwiseProduct(cache.tanh_c)
          .cwiseProduct(cache.o.cwiseProduct((1.0 - cache.o.array()).matrix()));
  da.segment(3 * hidden, hidden) =
      dc_total.cwiseProduct(cache.i).cwiseProduct(
          (1.0 - cache.g.array().square()).matrix());

  if (grads.w_x) grads.w_x->noalias() += da * cache.x.transpose();
  if (grads.w_h) grads.w_h->noalias() += da * cache.h_prev.transpose();
  if (grads.b) grads.b->col(0) += da;
  if (dx) *dx = w.w_x->transpose() * da;
  if (dh_prev) *dh_prev = w.w_h->transpose() * da;
  if (dc_prev) *dc_prev = dc_total.cwiseProduct(cache.f);
}

Vector MaskedSoftmax(const Vector& logits, const MaskVector* mask,
                     double temperature) {
  CheckMask(logits, mask);
  const Eigen::Index n = logits.size();
  double max_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (mask && !mask->bits[k]) continue;
    max_score = std::max(max_score, logits[k] / temperature);
  }
  Vector p = Vector::Zero(n);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (mask && !mask->bits[k]) continue;
    p[k] = std::exp(logits[k] / temperature - max_score);
    total += p[k];
  }
  p /= total;
  return p;
}

Vector MaskedLogSoftmax(const Vector& logits, const MaskVector* mask,
                        double temperature) {
  CheckMask(logits, mask);
  const Eigen::Index n = logits.size();
  double max_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (mask && !mask->bits[k]) continue;
    max_score = std::max(max_score, logits[k] / temperature);
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (mask && !mask->bits[k]) continue;
    total += std::exp(logits[k] / temperature - max_score);
  }
  const double log_z = max_score + std::log(total);
  Vector out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out[k] = (mask && !mask->bits[k])
                 ? -std::numeric_limits<double>::infinity()
                 : logits[k] / temperature - log_z;
  }
  return out;
}

TokenId GumbelSample(const Vector& scores, const MaskVector* mask, Rng* rng) {
  CheckMask(scores, mask);
  TokenId best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    if (mask && !mask->bits[k]) continue;
    const double v = scores[k] + rng->Gumbel();
    if (best < 0 || v > best_value) {
      best = static_cast<TokenId>(k);
      best_value = v;
    }
  }
  return best;
}

TokenId MaskedArgmax(const Vector& scores, const MaskVector* mask) {
  CheckMask(scores, mask);
  TokenId best = -1;
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    if (mask && !mask->bits[k]) continue;
    if (best < 0 || scores[k] > scores[best]) best = static_cast<TokenId>(k);
  }
  return best;
}

AdamState InitAdam(const ParamSet& params, const AdamConfig& config) {
  AdamState state;
  state.m = params.ZerosLike();
  state.v = params.ZerosLike();
  state.config = config;
  return state;
}

void AdamUpdate(AdamState* state, ParamSet* params, const ParamSet& grads) {
  if (!params->SameLayout(grads) || !params->SameLayout(state->m) ||
      !params->SameLayout(state->v)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "Adam state, parameters and gradients differ in layout");
  }
  if (!grads.AllFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, kModule,
                "gradient contains NaN or infinity");
  }
  const AdamConfig& cfg = state->config;
  ++state->step;
  const double correction1 = 1.0 - std::pow(cfg.beta1, state->step);
  const double correction2 = 1.0 - std::pow(cfg.beta2, state->step);
  for (size_t i = 0; i < params->size(); ++i) {
    const Matrix& g = grads.value(i);
    Matrix& m = state->m.value(i);
    Matrix& v = state->v.value(i);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    params->value(i).array() -=
        cfg.lr * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + cfg.eps);
  }
}

double ClipGlobalNorm(ParamSet* grads, double max_norm) {
  const double norm = std::sqrt(grads->SquaredNorm());
  if (norm > max_norm && norm > 0.0) grads->Scale(max_norm / norm);
  return norm;
}

GradCheckResult CheckGradients(
    ParamSet* params, const ParamSet& analytic,
    const std::function<double(const ParamSet&)>& loss, double step,
    double floor) {
  if (!params->SameLayout(analytic)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "analytic gradient layout differs from parameters");
  }
  GradCheckResult result;
  for (size_t p = 0; p < params->size(); ++p) {
    Matrix& m = params->value(p);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      double& x = m.data()[k];
      const double saved = x;
      x = saved + step;
      const double up = loss(*params);
      x = saved - step;
      const double down = loss(*params);
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.value(p).data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = params->name(p);
        result.worst_index = static_cast<size_t>(k);
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace priorseq
