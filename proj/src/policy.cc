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

#include "priorseq/policy.h"

#include <cmath>
#include <numeric>

#include "priorseq/error.h"

namespace priorseq {
namespace {

constexpr char kModule[] = "policy";
constexpr double kInitScale = 0.08;

Vector Softmax(const Vector& scores) {
  const double max_score = scores.maxCoeff();
  Vector p = (scores.array() - max_score).exp();
  return p / p.sum();
}

}  // namespace

const char* ArchName(Arch arch) {
  switch (arch) {
    case Arch::kPlain: return "plain";
    case Arch::kAttention: return "attention";
    case Arch::kLanguageModel: return "lm";
  }
  return "plain";
}

Arch ParseArch(std::string_view name) {
  if (name == "plain") return Arch::kPlain;
  if (name == "attention") return Arch::kAttention;
  if (name == "lm") return Arch::kLanguageModel;
  throw Error(ErrorCode::kInvalidArgument, kModule,
              "unknown architecture '" + std::string(name) + "'");
}

void DecoderState::Save(Checkpoint* ckpt, const std::string& prefix) const {
  ckpt->PutVector(prefix + "h", h);
  ckpt->PutVector(prefix + "c", c);
  ckpt->PutScalar(prefix + "t", t);
  Vector hist(static_cast<Eigen::Index>(history.size()));
  for (size_t i = 0; i < history.size(); ++i) hist[i] = history[i];
  ckpt->PutVector(prefix + "history", hist);
  ckpt->PutVector(prefix + "beta", beta);
  ckpt->PutMatrix(prefix + "features", features);
  ckpt->PutMatrix(prefix + "projected", projected);
}

DecoderState DecoderState::Load(const Checkpoint& ckpt,
                                const std::string& prefix) {
  DecoderState s;
  s.h = ckpt.GetVector(prefix + "h");
  s.c = ckpt.GetVector(prefix + "c");
  s.t = static_cast<int>(ckpt.GetScalar(prefix + "t"));
  const Vector hist = ckpt.GetVector(prefix + "history");
  for (Eigen::Index i = 0; i < hist.size(); ++i) {
    s.history.push_back(static_cast<TokenId>(hist[i]));
  }
  s.beta = ckpt.GetVector(prefix + "beta");
  s.features = ckpt.GetMatrix(prefix + "features");
  s.projected = ckpt.GetMatrix(prefix + "projected");
  return s;
}

bool DecoderState::operator==(const DecoderState& o) const {
  return h == o.h && c == o.c && t == o.t && history == o.history &&
         beta == o.beta && features == o.features && projected == o.projected;
}

Decoder Decoder::Create(const ModelDims& dims, Rng* rng) {
  if (dims.vocab < 1 || dims.embed < 1 || dims.hidden < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "vocab, embed and hidden must be positive");
  }
  if (dims.arch != Arch::kLanguageModel && dims.feature_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "feature_dim must be positive for image-conditioned models");
  }
  if (dims.arch == Arch::kAttention && dims.attention_dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "attention_dim must be positive");
  }
  Decoder model;
  model.dims_ = dims;
  ParamSet& p = model.params_;
  InitUniform(&p.Add("embed", dims.vocab, dims.embed), kInitScale, rng);
  const int lstm_input = dims.arch == Arch::kAttention
                             ? dims.embed + dims.feature_dim
                             : dims.embed;
  AddLstmParams(&p, "lstm", lstm_input, dims.hidden, rng);
  InitUniform(&p.Add("out/w", dims.vocab, dims.hidden), kInitScale, rng);
  if (dims.arch == Arch::kPlain) {
    InitUniform(&p.Add("image/w", dims.embed, dims.feature_dim), kInitScale,
                rng);
    p.Add("image/b", dims.embed, 1);
  } else if (dims.arch == Arch::kAttention) {
    InitUniform(&p.Add("att/w_a", dims.attention_dim, dims.feature_dim),
                kInitScale, rng);
    InitUniform(&p.Add("att/w_h", dims.attention_dim, dims.hidden), kInitScale,
                rng);
    p.Add("att/b", dims.attention_dim, 1);
    InitUniform(&p.Add("att/v", dims.attention_dim, 1), kInitScale, rng);
  }
  return model;
}

Decoder Decoder::FromCheckpoint(const Checkpoint& ckpt) {
  const Vector meta = ckpt.GetVector("meta/dims");
  if (meta.size() != 5) {
    throw Error(ErrorCode::kMalformedInput, kModule, "bad meta/dims tensor");
  }
  Decoder model;
  model.dims_.arch = static_cast<Arch>(static_cast<int>(ckpt.GetScalar("meta/arch")));
  model.dims_.vocab = static_cast<int>(meta[0]);
  model.dims_.embed = static_cast<int>(meta[1]);
  model.dims_.hidden = static_cast<int>(meta[2]);
  model.dims_.feature_dim = static_cast<int>(meta[3]);
  model.dims_.attention_dim = static_cast<int>(meta[4]);
  Rng unused(0);
  Decoder reference = Create(model.dims_, &unused);
  model.params_ = ckpt.GetParams("param/");
  if (!model.params_.SameLayout(reference.params_)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "checkpoint parameters do not match meta/dims");
  }
  return model;
}

void Decoder::Save(Checkpoint* ckpt) const {
  ckpt->PutScalar("meta/arch", static_cast<double>(static_cast<int>(dims_.arch)));
  Vector meta(5);
  meta << dims_.vocab, dims_.embed, dims_.hidden, dims_.feature_dim,
      dims_.attention_dim;
  ckpt->PutVector("meta/dims", meta);
  ckpt->PutParams("param/", params_);
}

void Decoder::CheckFeatures(const FeatureGrid* features) const {
  if (dims_.arch == Arch::kLanguageModel) return;
  if (features == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "image-conditioned decoder needs features");
  }
  if (features->dim() != dims_.feature_dim || features->locations() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "feature dimension " + std::to_string(features->dim()) +
                    " of item '" + features->item_id + "' differs from " +
                    std::to_string(dims_.feature_dim));
  }
}

DecoderState Decoder::InitState(const FeatureGrid* features) const {
  CheckFeatures(features);
  DecoderState s;
  s.h = Vector::Zero(dims_.hidden);
  s.c = Vector::Zero(dims_.hidden);
  if (dims_.arch == Arch::kPlain) {
    s.features = features->grid.colwise().mean();
  } else if (dims_.arch == Arch::kAttention) {
    s.features = features->grid;
    s.projected = s.features * params_.at("att/w_a").transpose();
    s.beta = Vector::Constant(s.features.rows(), 1.0 / s.features.rows());
  }
  return s;
}

Vector Decoder::Step(DecoderState* state, StepCache* cache) const {
  if (static_cast<int>(state->history.size()) != state->t) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "decoder state history length differs from step index");
  }
  const int embed = dims_.embed;
  const bool image_step = dims_.arch == Arch::kPlain && state->t == 0;
  const TokenId input_word =
      state->t == 0 ? kStartId : state->history.back();
  if (input_word < 0 || input_word >= dims_.vocab) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "token id " + std::to_string(input_word) + " out of range");
  }

  Vector x;
  Matrix u;
  Vector beta;
  if (image_step) {
    x = params_.at("image/w") * state->features.row(0).transpose() +
        params_.at("image/b").col(0);
  } else if (dims_.arch == Arch::kAttention) {
    const Vector query =
        params_.at("att/w_h") * state->h + params_.at("att/b").col(0);
    u = (state->projected.rowwise() + query.transpose()).array().tanh();
    beta = Softmax(u * params_.at("att/v").col(0));
    x.resize(embed + dims_.feature_dim);
    x.head(embed) = params_.at("embed").row(input_word).transpose();
    x.tail(dims_.feature_dim) = state->features.transpose() * beta;
    state->beta = beta;
  } else {
    x = params_.at("embed").row(input_word).transpose();
  }

  LstmCache lstm =
      LstmForward(LstmWeightsIn(params_, "lstm"), x, state->h, state->c);
  Vector logits = params_.at("out/w") * lstm.h;
  state->h = lstm.h;
  state->c = lstm.c;
  ++state->t;
  if (cache != nullptr) {
    cache->input_word = input_word;
    cache->image_step = image_step;
    cache->lstm = std::move(lstm);
    cache->u = std::move(u);
    cache->beta = std::move(beta);
    cache->logits = logits;
  }
  return logits;
}

double Decoder::SequenceObjective(const FeatureGrid* features,
                                  const TokenSeq& tokens,
                                  const std::vector<MaskVector>* masks,
                                  std::span<const double> weights,
                                  double temperature, ParamSet* grads) const {
  const size_t steps = tokens.size();
  if (weights.size() != steps) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one weight per token required");
  }
  if (masks != nullptr && masks->size() != steps) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "one mask per token required");
  }
  DecoderState state = InitState(features);
  std::vector<StepCache> caches(steps);
  std::vector<Vector> probs(steps);
  double objective = 0.0;
  for (size_t t = 0; t < steps; ++t) {
    const Vector logits = Step(&state, &caches[t]);
    const MaskVector* mask = masks ? &(*masks)[t] : nullptr;
    const TokenId y = tokens[t];
    if (y < 0 || y >= dims_.vocab || (mask && !mask->allows(y))) {
      throw Error(ErrorCode::kInvalidArgument, kModule,
                  "target token " + std::to_string(y) + " at step " +
                      std::to_string(t) + " is out of range or masked out");
    }
    probs[t] = MaskedSoftmax(logits, mask, temperature);
    objective += weights[t] * std::log(probs[t][y]);
    state.history.push_back(y);
  }
  if (grads == nullptr) return objective;
  if (!grads->SameLayout(params_)) {
    throw Error(ErrorCode::kShapeMismatch, kModule,
                "gradient buffer layout differs from parameters");
  }

  const Matrix& w_out = params_.at("out/w");
  Matrix& g_out = grads->at("out/w");
  Matrix& g_embed = grads->at("embed");
  const LstmWeights lstm_w = LstmWeightsIn(params_, "lstm");
  const LstmGrads lstm_g = LstmGradsIn(grads, "lstm");
  const bool attention = dims_.arch == Arch::kAttention;
  Matrix d_projected;
  if (attention) d_projected = Matrix::Zero(state.projected.rows(),
                                            state.projected.cols());

  Vector dh_next = Vector::Zero(dims_.hidden);
  Vector dc_next = Vector::Zero(dims_.hidden);
  for (size_t r = steps; r-- > 0;) {
    const StepCache& cache = caches[r];
    Vector dlogits = -probs[r];
    dlogits[tokens[r]] += 1.0;
    dlogits *= weights[r] / temperature;

    g_out.noalias() += dlogits * cache.lstm.h.transpose();
    Vector dh = w_out.transpose() * dlogits + dh_next;
    Vector dx, dh_prev, dc_prev;
    LstmBackward(lstm_w, cache.lstm, dh, dc_next, lstm_g, &dx, &dh_prev,
                 &dc_prev);

    if (cache.image_step) {
      grads->at("image/w").noalias() +=
          dx * state.features.row(0);
      grads->at("image/b").col(0) += dx;
    } else {
      g_embed.row(cache.input_word) += dx.head(dims_.embed).transpose();
    }
    if (attention && !cache.image_step) {
      const Vector dz = dx.tail(dims_.feature_dim);
      const Vector dbeta = state.features * dz;
      const Vector de =
          cache.beta.cwiseProduct((dbeta.array() - cache.beta.dot(dbeta)).matrix());
      const Vector& v = params_.at("att/v").col(0);
      grads->at("att/v").col(0).noalias() += cache.u.transpose() * de;
      const Matrix dpre =
          (de * v.transpose()).cwiseProduct(
              (1.0 - cache.u.array().square()).matrix());
      d_projected += dpre;
      const Vector dquery = dpre.colwise().sum().transpose();
      grads->at("att/w_h").noalias() += dquery * cache.lstm.h_prev.transpose();
      grads->at("att/b").col(0) += dquery;
      dh_prev.noalias() += params_.at("att/w_h").transpose() * dquery;
    }
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
  if (attention) {
    grads->at("att/w_a").noalias() += d_projected.transpose() * state.features;
  }
  return objective;
}

double Decoder::SequenceLogProb(const FeatureGrid* features,
                                const TokenSeq& tokens,
                                const std::vector<MaskVector>* masks,
                                double temperature) const {
  const std::vector<double> ones(tokens.size(), 1.0);
  return SequenceObjective(features, tokens, masks, ones, temperature, nullptr);
}

double DecodeResult::log_prob() const {
  return std::accumulate(log_probs.begin(), log_probs.end(), 0.0);
}

DecodeResult Decode(const Decoder& model, const FeatureGrid* features,
                    const DecodeConfig& config, const ActionPrior* prior,
                    Rng* rng) {
  if (config.max_len < 1) {
    throw Error(ErrorCode::kInvalidArgument, kModule, "max_len must be >= 1");
  }
  if (config.mode == DecodeMode::kSample && rng == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, kModule,
                "sampling decode needs a random source");
  }
  if (prior != nullptr &&
      prior->vocab_size() != static_cast<size_t>(model.dims().vocab)) {
    throw Error(ErrorCode::kDimensionMismatch, kModule,
                "prior vocabulary differs from the decoder's");
  }
  DecodeResult result;
  DecoderState state = model.InitState(features);
  std::unique_ptr<PriorSession> session = prior ? prior->Begin() : nullptr;
  for (int t = 0; t < config.max_len; ++t) {
    const Vector logits = model.Step(&state);
    const MaskVector* mask = session ? &session->Current() : nullptr;
    const Vector log_p = MaskedLogSoftmax(logits, mask, config.temperature);
    const TokenId token = config.mode == DecodeMode::kGreedy
                              ? MaskedArgmax(log_p, mask)
                              : GumbelSample(log_p, mask, rng);
    result.tokens.push_back(token);
    result.log_probs.push_back(log_p[token]);
    result.mask_sizes.push_back(mask ? mask->cardinality : model.dims().vocab);
    if (mask && config.record_masks) result.masks.push_back(*mask);
    state.history.push_back(token);
    if (session) session->Advance(token);
    if (token == kEndId) {
      result.ended = true;
      break;
    }
  }
  if (session) result.fallbacks = session->fallbacks();
  return result;
}

}  // namespace priorseq
