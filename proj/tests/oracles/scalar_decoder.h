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

#ifndef PRIORSEQ_TESTS_ORACLES_SCALAR_DECODER_H_
#define PRIORSEQ_TESTS_ORACLES_SCALAR_DECODER_H_

#include <cmath>
#include <vector>

#include "priorseq/policy.h"

namespace priorseq::testing {

// Loop-only re-implementation of the decoder forward pass. Returns the
// per-step log-probabilities of `tokens` under teacher forcing, optionally
// restricted by masks.
inline std::vector<double> ScalarDecoderLogProbs(
    const Decoder& model, const FeatureGrid* features, const TokenSeq& tokens,
    const std::vector<MaskVector>* masks, double temperature = 1.0) {
  using Vec = std::vector<double>;
  const ModelDims& d = model.dims();
  const ParamSet& p = model.params();
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto matvec = [](const Matrix& m, const Vec& x) {
    Vec out(m.rows(), 0.0);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) out[r] += m(r, k) * x[k];
    }
    return out;
  };
  const int H = d.hidden;
  Vec h(H, 0.0), c(H, 0.0);
  const Matrix& wx = p.at("lstm/w_x");
  const Matrix& wh = p.at("lstm/w_h");
  const Matrix& b = p.at("lstm/b");

  Vec pooled;
  if (d.arch == Arch::kPlain) {
    pooled.assign(d.feature_dim, 0.0);
    for (int l = 0; l < features->locations(); ++l) {
      for (int k = 0; k < d.feature_dim; ++k) {
        pooled[k] += features->grid(l, k) / features->locations();
      }
    }
  }

  Vec out;
  for (size_t t = 0; t < tokens.size(); ++t) {
    Vec x;
    const TokenId word = t == 0 ? kStartId : tokens[t - 1];
    auto embed = [&] {
      Vec e(d.embed);
      for (int k = 0; k < d.embed; ++k) e[k] = p.at("embed")(word, k);
      return e;
    };
    if (d.arch == Arch::kPlain && t == 0) {
      x = matvec(p.at("image/w"), pooled);
      for (int k = 0; k < d.embed; ++k) x[k] += p.at("image/b")(k, 0);
    } else if (d.arch == Arch::kAttention) {
      const int L = features->locations();
      const int A = d.attention_dim;
      const Vec q = matvec(p.at("att/w_h"), h);
      Vec e(L, 0.0);
      for (int l = 0; l < L; ++l) {
        Vec row(d.feature_dim);
        for (int k = 0; k < d.feature_dim; ++k) row[k] = features->grid(l, k);
        const Vec proj = matvec(p.at("att/w_a"), row);
        for (int a = 0; a < A; ++a) {
          e[l] += p.at("att/v")(a, 0) *
                  std::tanh(proj[a] + q[a] + p.at("att/b")(a, 0));
        }
      }
      double m = e[0];
      for (double v : e) m = std::max(m, v);
      double z = 0.0;
      for (double& v : e) z += (v = std::exp(v - m));
      x = embed();
      for (int k = 0; k < d.feature_dim; ++k) {
        double s = 0.0;
        for (int l = 0; l < L; ++l) s += e[l] / z * features->grid(l, k);
        x.push_back(s);
      }
    } else {
      x = embed();
    }
    const Vec ax = matvec(wx, x);
    const Vec ah = matvec(wh, h);
    for (int j = 0; j < H; ++j) {
      auto pre = [&](int gate) {
        const int r = gate * H + j;
        return ax[r] + ah[r] + b(r, 0);
      };
      const double i = sig(pre(0)), f = sig(pre(1)), o = sig(pre(2));
      const double g = std::tanh(pre(3));
      c[j] = f * c[j] + i * g;
    }
    for (int j = 0; j < H; ++j) {
      const double o = sig(ax[2 * H + j] + ah[2 * H + j] + b(2 * H + j, 0));
      h[j] = o * std::tanh(c[j]);
    }
    const Vec logits = matvec(p.at("out/w"), h);
    double z = 0.0;
    for (int k = 0; k < d.vocab; ++k) {
      if (masks && !(*masks)[t].allows(k)) continue;
      z += std::exp(logits[k] / temperature);
    }
    out.push_back(logits[tokens[t]] / temperature - std::log(z));
  }
  return out;
}

}  // namespace priorseq::testing

#endif  // PRIORSEQ_TESTS_ORACLES_SCALAR_DECODER_H_
