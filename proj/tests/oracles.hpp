// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

// Test-side reference implementations. Plain loops over std::vector, written
// without calling into the engine's numerics so that agreement means
// something.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "mao/backbone.hpp"
#include "mao/dataset.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double cosine(const Vec& a, const Vec& b) { return dot(a, b) / (norm(a) * norm(b)); }

inline Vec to_vec(std::span<const double> s) { return Vec(s.begin(), s.end()); }

// exp(z_i / tau) / sum_j exp(z_j / tau), straight from the definition with a
// shift by the max so that it does not overflow.
inline Vec softmax(const Vec& z, double tau) {
  const double m = *std::max_element(z.begin(), z.end());
  Vec e(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp((z[i] - m) / tau);
    total += e[i];
  }
  for (double& v : e) v /= total;
  return e;
}

// y = W2 tanh(W1 x + b1) + b2, W stored row-major as rows x cols.
inline Vec mlp(const mao::Tensor& w1, const mao::Tensor& b1, const mao::Tensor& w2,
               const mao::Tensor& b2, const Vec& x) {
  const std::size_t hidden = w1.shape()[0];
  const std::size_t in = w1.shape()[1];
  Vec h(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    double s = b1[i];
    for (std::size_t j = 0; j < in; ++j) s += w1[i * in + j] * x[j];
    h[i] = std::tanh(s);
  }
  const std::size_t out = w2.shape()[0];
  Vec y(out);
  for (std::size_t i = 0; i < out; ++i) {
    double s = b2[i];
    for (std::size_t j = 0; j < hidden; ++j) s += w2[i * hidden + j] * h[j];
    y[i] = s;
  }
  return y;
}

// Recomputes embeddings from the backbone's frozen tensors.
class Encoder {
 public:
  explicit Encoder(const mao::Backbone& bb) : bb_(bb) {
    const auto p = bb.frozen_params();
    iw1_ = &p[0]->value;
    ib1_ = &p[1]->value;
    iw2_ = &p[2]->value;
    ib2_ = &p[3]->value;
    tw1_ = &p[4]->value;
    tb1_ = &p[5]->value;
    tw2_ = &p[6]->value;
    tb2_ = &p[7]->value;
    table_ = &p[11]->value;
  }

  Vec image(std::span<const double> x, const mao::Tensor* prefix = nullptr) const {
    Vec in(x.begin(), x.end());
    if (prefix != nullptr) {
      for (std::size_t j = 0; j < in.size(); ++j) in[j] = (in[j] + (*prefix)[j]) / 2.0;
    }
    return mlp(*iw1_, *ib1_, *iw2_, *ib2_, in);
  }

  Vec text(const mao::Tensor& context, mao::ClassId c) const {
    const std::size_t L = context.shape()[0];
    const std::size_t dt = context.shape()[1];
    Vec pooled(dt, 0.0);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t j = 0; j < dt; ++j) pooled[j] += context[l * dt + j];
    for (std::size_t j = 0; j < dt; ++j) pooled[j] += (*table_)[mao::index_of(c) * dt + j];
    for (double& v : pooled) v /= double(L + 1);
    return mlp(*tw1_, *tb1_, *tw2_, *tb2_, pooled);
  }

  // normalize -> cosine -> softmax over the candidates.
  Vec proba(const mao::Tensor& context, std::span<const double> x,
            const std::vector<mao::ClassId>& cands, const mao::Tensor* prefix = nullptr) const {
    const Vec f = image(x, prefix);
    Vec logits;
    for (mao::ClassId c : cands) {
      Vec g = text(context, c);
      const double n = norm(g);
      for (double& v : g) v /= n;
      logits.push_back(cosine(g, f));
    }
    return softmax(logits, bb_.config().tau);
  }

  // Mean of -log p(target) over the items.
  double cross_entropy(const mao::Tensor& context, const mao::Dataset& ds,
                       const std::vector<mao::LabeledImage>& items,
                       const std::vector<mao::ClassId>& cands,
                       const mao::Tensor* prefix = nullptr) const {
    double total = 0.0;
    for (const auto& it : items) {
      const Vec p = proba(context, ds.features(it.image), cands, prefix);
      const auto pos = std::find(cands.begin(), cands.end(), it.label) - cands.begin();
      total += -std::log(p[static_cast<std::size_t>(pos)]);
    }
    return total / double(items.size());
  }

  // Argmax with ties to the lowest id; cands must be ascending.
  std::pair<mao::ClassId, double> top1(const mao::Tensor& context, std::span<const double> x,
                                       const std::vector<mao::ClassId>& cands) const {
    const Vec p = proba(context, x, cands);
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
      if (p[i] > p[best]) best = i;
    return {cands[best], p[best]};
  }

 private:
  const mao::Backbone& bb_;
  const mao::Tensor *iw1_, *ib1_, *iw2_, *ib2_, *tw1_, *tb1_, *tw2_, *tb2_, *table_;
};

// Full stable sort of every index by (similarity desc, id asc), then the first k.
inline std::vector<mao::ClassId> brute_top_k(const mao::Dataset& ds,
                                             const std::vector<mao::ClassId>& classes,
                                             const Vec& query, std::size_t k) {
  std::vector<std::pair<double, mao::ClassId>> all;
  for (mao::ClassId c : classes) all.emplace_back(cosine(query, to_vec(ds.sampler_embedding(c))), c);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<mao::ClassId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(all[i].second);
  return out;
}

// Average-rank Spearman correlation.
inline Vec ranks(const Vec& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  Vec r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = (double(i) + double(j)) / 2.0 + 1.0;
    i = j + 1;
  }
  return r;
}

inline double pearson(const Vec& a, const Vec& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / double(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / double(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const Vec& a, const Vec& b) { return pearson(ranks(a), ranks(b)); }

}  // namespace oracle
