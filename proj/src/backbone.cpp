// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/backbone.hpp"

#include <cmath>
#include <string>

#include "mao/errors.hpp"

namespace mao {

const char* variant_name(BackboneVariant v) noexcept {
  return v == BackboneVariant::kJointPrompt ? "joint" : "text";
}

BackboneVariant parse_variant(std::string_view s) {
  if (s == "text") return BackboneVariant::kTextPrompt;
  if (s == "joint") return BackboneVariant::kJointPrompt;
  fail(ErrorCode::kConfig, "unknown backbone variant '" + std::string(s) +
                               "' (expected text or joint)");
}

void BackboneConfig::validate() const {
  if (context_length < 1) fail(ErrorCode::kConfig, "backbone: L must be >= 1");
  if (d_token < 1 || d < 1 || d_img < 1) fail(ErrorCode::kConfig, "backbone: dims must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::kConfig, "backbone: tau must be > 0");
  if (!(shape.token_scale > 0.0)) fail(ErrorCode::kConfig, "backbone: token scale must be > 0");
}

// ---------------------------------------------------------------------------

std::vector<Param*> Prompt::params() {
  std::vector<Param*> out{&text.tokens};
  if (visual) out.push_back(&visual->prefix);
  return out;
}

std::vector<const Param*> Prompt::params() const {
  std::vector<const Param*> out{&text.tokens};
  if (visual) out.push_back(&visual->prefix);
  return out;
}

void Prompt::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

// ---------------------------------------------------------------------------

namespace {

Tensor gaussian(std::vector<std::size_t> shape, double sd, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = sd * rng.normal();
  return t;
}

// `count` orthonormal vectors of length `dim` (count <= dim), as rows.
Tensor orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
  Tensor q({count, dim});
  for (std::size_t r = 0; r < count; ++r) {
    auto row = q.row(r);
    double n = 0.0;
    while (n < 1e-8) {
      for (double& x : row) x = rng.normal();
      for (std::size_t k = 0; k < r; ++k) {
        const double proj = dot(row, q.row(k));
        for (std::size_t j = 0; j < dim; ++j) row[j] -= proj * q.at(k, j);
      }
      n = norm2(row);
    }
    for (double& x : row) x /= n;
  }
  return q;
}

// y += A x for A of shape rows x cols.
void matvec_add(const Tensor& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) y[r] += dot(a.row(r), x);
}

// y += A^T x.
void matvec_t_add(const Tensor& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * xr;
  }
}

}  // namespace

Backbone::Backbone(BackboneConfig config) : config_(config) {
  config_.validate();
  const Rng root(config_.seed);
  Rng w1_rng = root.substream("image_w1");
  Rng b1_rng = root.substream("image_b1");
  Rng w2_rng = root.substream("image_w2");
  Rng proj_rng = root.substream("token_projection");
  Rng ideal_rng = root.substream("ideal_context");
  Rng template_rng = root.substream("hard_template");

  const std::size_t L = config_.context_length;
  const std::size_t d = config_.d;
  const std::size_t d_img = config_.d_img;
  const std::size_t d_tok = config_.d_token;

  image_.w1 = Param(gaussian({d, d_img}, config_.shape.weight_scale / std::sqrt(double(d_img)), w1_rng), false);
  image_.b1 = Param(gaussian({d}, config_.shape.bias_scale, b1_rng), false);
  image_.w2 = Param(gaussian({d, d}, 1.0 / std::sqrt(double(d)), w2_rng), false);
  image_.b2 = Param(Tensor({d}), false);

  // Semi-orthogonal map between concept space (d_img) and token space (d_token).
  Tensor projection({d_img, d_tok});
  if (d_tok >= d_img) {
    projection = orthonormal_rows(d_img, d_tok, proj_rng);
  } else {
    Tensor cols = orthonormal_rows(d_tok, d_img, proj_rng);
    for (std::size_t i = 0; i < d_img; ++i)
      for (std::size_t j = 0; j < d_tok; ++j) projection.at(i, j) = cols.at(j, i);
  }
  token_projection_ = Param(std::move(projection), false);

  const double ctx_sd = std::sqrt(double(L) / double(d_tok));
  ideal_context_ = Param(gaussian({L, d_tok}, config_.shape.ideal_context_scale * ctx_sd, ideal_rng), false);
  Tensor hard = gaussian({L, d_tok}, config_.shape.template_error * ctx_sd, template_rng);
  for (std::size_t i = 0; i < hard.size(); ++i) hard[i] += ideal_context_.value[i];
  hard_template_ = Param(std::move(hard), false);

  // Text tower: first layer W1_img * R * (L + 1) / token_scale, so that the
  // mean-pool of (ideal context ++ class token) lands exactly on
  // W1_img * concept. Class tokens are stored token_scale times larger than
  // a unit concept, which damps the prompt's leverage by the same factor.
  Tensor w1t({d, d_tok});
  const Tensor& r = token_projection_.value;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d_tok; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d_img; ++k) s += image_.w1.value.at(i, k) * r.at(k, j);
      w1t.at(i, j) = double(L + 1) / config_.shape.token_scale * s;
    }
  }
  std::vector<double> ideal_mean(d_tok, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t j = 0; j < d_tok; ++j) ideal_mean[j] += ideal_context_.value.at(l, j);
  for (double& x : ideal_mean) x /= double(L);
  Tensor b1t = image_.b1.value;
  std::vector<double> shift(d, 0.0);
  matvec_add(w1t, ideal_mean, shift);
  for (std::size_t i = 0; i < d; ++i) b1t[i] -= double(L) / double(L + 1) * shift[i];

  text_.w1 = Param(std::move(w1t), false);
  text_.b1 = Param(std::move(b1t), false);
  text_.w2 = Param(image_.w2.value, false);
  text_.b2 = Param(image_.b2.value, false);
  token_table_ = Param(Tensor({0, d_tok}), false);
}

void Backbone::bind(const Dataset& ds) {
  if (ds.d_img() != config_.d_img) {
    fail(ErrorCode::kCompatibility,
         "dataset concept dimension " + std::to_string(ds.d_img()) +
             " does not match backbone d_img " + std::to_string(config_.d_img));
  }
  const std::size_t v = ds.num_classes();
  const std::size_t d_img = config_.d_img;
  const std::size_t d_tok = config_.d_token;
  const double unit = 1.0 / std::sqrt(double(d_img));
  const Rng offsets(mix_seed(config_.seed, "name_offsets"));
  Rng global_rng = offsets.substream("global");
  const Tensor global = gaussian({d_img}, config_.shape.global_name_offset * unit, global_rng);

  Tensor table({v, d_tok});
  std::vector<double> meaning(d_img);
  std::vector<double> row(d_tok);
  for (std::size_t c = 0; c < v; ++c) {
    const ClassInfo& info = ds.class_info(class_id(c));
    Rng super_rng = offsets.substream("super/" + std::to_string(info.super_id));
    const Tensor super = gaussian({d_img}, config_.shape.super_name_offset * unit, super_rng);
    auto name = ds.name_embedding(class_id(c));
    for (std::size_t k = 0; k < d_img; ++k) meaning[k] = name[k] + global[k] + super[k];
    std::fill(row.begin(), row.end(), 0.0);
    matvec_t_add(token_projection_.value, meaning, row);
    for (double& x : row) x *= config_.shape.token_scale;
    std::copy(row.begin(), row.end(), table.row(c).begin());
  }
  token_table_ = Param(std::move(table), false);
}

Prompt Backbone::init_prompt(Rng& rng) const {
  Prompt p;
  p.text.tokens = Param(gaussian({config_.context_length, config_.d_token},
                                 config_.shape.prompt_init_std, rng),
                        true);
  if (config_.variant == BackboneVariant::kJointPrompt) {
    p.visual = VisualPrompt{Param(gaussian({config_.d_img}, config_.shape.prompt_init_std, rng), true)};
  }
  return p;
}

Prompt Backbone::hard_prompt() const {
  Prompt p;
  p.text.tokens = Param(hard_template_.value, false);
  return p;
}

// ---------------------------------------------------------------------------

Backbone::MlpCache Backbone::forward(const Mlp& mlp, std::span<const double> input) const {
  MlpCache cache;
  cache.input.assign(input.begin(), input.end());
  cache.hidden.assign(mlp.b1.value.data().begin(), mlp.b1.value.data().end());
  matvec_add(mlp.w1.value, input, cache.hidden);
  for (double& h : cache.hidden) h = std::tanh(h);
  cache.output = mlp.b2.value;
  matvec_add(mlp.w2.value, cache.hidden, cache.output.data());
  return cache;
}

void Backbone::backward(const Mlp& mlp, const MlpCache& cache, std::span<const double> d_output,
                        std::span<double> d_input) const {
  std::vector<double> d_hidden(cache.hidden.size(), 0.0);
  matvec_t_add(mlp.w2.value, d_output, d_hidden);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) {
    d_hidden[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
  }
  matvec_t_add(mlp.w1.value, d_hidden, d_input);
}

std::vector<double> Backbone::pool(const Tensor& context, ClassId c) const {
  const std::size_t L = config_.context_length;
  const std::size_t d_tok = config_.d_token;
  if (context.rows() != L || context.cols() != d_tok || context.size() != L * d_tok) {
    fail(ErrorCode::kShape, "prompt context must be " + std::to_string(L) + " x " +
                                std::to_string(d_tok));
  }
  if (index_of(c) >= token_table_.value.rows()) {
    fail(ErrorCode::kVocabulary, "class id " + std::to_string(index_of(c)) +
                                     " is not in the bound vocabulary");
  }
  std::vector<double> out(token_table_.value.row(index_of(c)).begin(),
                          token_table_.value.row(index_of(c)).end());
  for (std::size_t l = 0; l < L; ++l) {
    auto row = context.row(l);
    for (std::size_t j = 0; j < d_tok; ++j) out[j] += row[j];
  }
  for (double& x : out) x /= double(L + 1);
  return out;
}

std::vector<double> Backbone::image_input(std::span<const double> x,
                                          const VisualPrompt* visual) const {
  if (x.size() != config_.d_img) {
    fail(ErrorCode::kShape, "image features have " + std::to_string(x.size()) +
                                " dims, backbone expects " + std::to_string(config_.d_img));
  }
  std::vector<double> in(x.begin(), x.end());
  if (visual != nullptr && config_.variant == BackboneVariant::kJointPrompt) {
    for (std::size_t j = 0; j < in.size(); ++j) in[j] = 0.5 * (in[j] + visual->prefix.value[j]);
  }
  return in;
}

Tensor Backbone::encode_text(const Tensor& context, ClassId c) const {
  return forward(text_, pool(context, c)).output;
}

Tensor Backbone::encode_image(std::span<const double> x, const VisualPrompt* visual) const {
  return forward(image_, image_input(x, visual)).output;
}

void Backbone::check_candidates(std::span<const ClassId> candidates) const {
  if (candidates.empty()) fail(ErrorCode::kArgument, "candidate list is empty");
  std::vector<bool> seen(token_table_.value.rows(), false);
  for (ClassId c : candidates) {
    if (index_of(c) >= seen.size()) {
      fail(ErrorCode::kVocabulary, "candidate class " + std::to_string(index_of(c)) +
                                       " is not in the bound vocabulary");
    }
    if (seen[index_of(c)]) {
      fail(ErrorCode::kCandidateSet, "duplicate candidate class " + std::to_string(index_of(c)));
    }
    seen[index_of(c)] = true;
  }
}

TextHead Backbone::text_head(const Prompt& prompt, std::span<const ClassId> candidates) const {
  check_candidates(candidates);
  TextHead head;
  head.candidates.assign(candidates.begin(), candidates.end());
  head.embeddings = Tensor({candidates.size(), config_.d});
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    Tensor g = l2_normalize(encode_text(prompt.text.tokens.value, candidates[j]).data());
    std::copy(g.data().begin(), g.data().end(), head.embeddings.row(j).begin());
  }
  return head;
}

std::vector<double> Backbone::predict_proba(const TextHead& head, std::span<const double> x,
                                            const VisualPrompt* visual) const {
  Tensor f = l2_normalize(encode_image(x, visual).data());
  std::vector<double> sims(head.candidates.size());
  for (std::size_t j = 0; j < sims.size(); ++j) sims[j] = dot(f.data(), head.embeddings.row(j));
  return softmax_temp(sims, config_.tau);
}

std::vector<double> Backbone::predict_proba(const Prompt& prompt, std::span<const double> x,
                                            std::span<const ClassId> candidates) const {
  const TextHead head = text_head(prompt, candidates);
  return predict_proba(head, x, prompt.visual ? &*prompt.visual : nullptr);
}

std::pair<ClassId, double> Backbone::zero_shot_label(std::span<const double> x,
                                                     std::span<const ClassId> candidates) const {
  const std::vector<double> p = predict_proba(hard_prompt(), x, candidates);
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] > p[best] || (p[j] == p[best] && candidates[j] < candidates[best])) best = j;
  }
  return {candidates[best], p[best]};
}

std::size_t Backbone::param_count() const noexcept {
  std::size_t n = config_.context_length * config_.d_token;
  if (config_.variant == BackboneVariant::kJointPrompt) n += config_.d_img;
  return n;
}

std::vector<const Param*> Backbone::frozen_params() const {
  return {&image_.w1,  &image_.b1,          &image_.w2,      &image_.b2,
          &text_.w1,   &text_.b1,           &text_.w2,       &text_.b2,
          &token_projection_, &ideal_context_, &hard_template_, &token_table_};
}

// ---------------------------------------------------------------------------

double Backbone::cross_entropy(Prompt& prompt, std::span<const Example> items,
                               std::span<const ClassId> candidates, bool accumulate_grad) const {
  if (items.empty()) fail(ErrorCode::kArgument, "cross_entropy over an empty batch");
  check_candidates(candidates);
  const std::size_t h = candidates.size();
  const std::size_t n = items.size();
  const double tau = config_.tau;

  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    while (j < h && candidates[j] != items[i].target) ++j;
    if (j == h) {
      fail(ErrorCode::kInvariant, "target class " + std::to_string(index_of(items[i].target)) +
                                      " is not in the candidate set");
    }
    target[i] = j;
  }

  // Text side, once per candidate.
  std::vector<MlpCache> text_cache(h);
  std::vector<double> text_norm(h);
  Tensor g_hat({h, config_.d});
  for (std::size_t j = 0; j < h; ++j) {
    text_cache[j] = forward(text_, pool(prompt.text.tokens.value, candidates[j]));
    text_norm[j] = norm2(text_cache[j].output.data());
    Tensor u = l2_normalize(text_cache[j].output.data());
    std::copy(u.data().begin(), u.data().end(), g_hat.row(j).begin());
  }

  const VisualPrompt* visual = prompt.visual ? &*prompt.visual : nullptr;
  std::vector<MlpCache> image_cache(n);
  std::vector<double> image_norm(n);
  Tensor f_hat({n, config_.d});
  for (std::size_t i = 0; i < n; ++i) {
    image_cache[i] = forward(image_, image_input(items[i].features, visual));
    image_norm[i] = norm2(image_cache[i].output.data());
    Tensor u = l2_normalize(image_cache[i].output.data());
    std::copy(u.data().begin(), u.data().end(), f_hat.row(i).begin());
  }

  double loss = 0.0;
  Tensor d_logits({n, h});
  std::vector<double> logits(h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < h; ++j) logits[j] = dot(f_hat.row(i), g_hat.row(j)) / tau;
    const double lse = log_sum_exp(logits);
    loss += lse - logits[target[i]];
    for (std::size_t j = 0; j < h; ++j) {
      d_logits.at(i, j) = (std::exp(logits[j] - lse) - (j == target[i] ? 1.0 : 0.0)) / double(n);
    }
  }
  loss /= double(n);
  if (!accumulate_grad) return loss;

  // d loss / d g_hat_j and back through normalisation, MLP and mean-pool.
  Param& tokens = prompt.text.tokens;
  if (tokens.trainable) {
    const std::size_t L = config_.context_length;
    const std::size_t d_tok = config_.d_token;
    std::vector<double> d_pool_total(d_tok, 0.0);
    std::vector<double> d_ghat(config_.d);
    std::vector<double> d_g(config_.d);
    std::vector<double> d_pool(d_tok);
    for (std::size_t j = 0; j < h; ++j) {
      std::fill(d_ghat.begin(), d_ghat.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double w = d_logits.at(i, j) / tau;
        auto fi = f_hat.row(i);
        for (std::size_t k = 0; k < config_.d; ++k) d_ghat[k] += w * fi[k];
      }
      std::fill(d_g.begin(), d_g.end(), 0.0);
      l2_normalize_backward(g_hat.row(j), text_norm[j], d_ghat, d_g);
      std::fill(d_pool.begin(), d_pool.end(), 0.0);
      backward(text_, text_cache[j], d_g, d_pool);
      for (std::size_t k = 0; k < d_tok; ++k) d_pool_total[k] += d_pool[k];
    }
    for (std::size_t l = 0; l < L; ++l) {
      auto grow = tokens.grad.row(l);
      for (std::size_t k = 0; k < d_tok; ++k) grow[k] += d_pool_total[k] / double(L + 1);
    }
  }

  if (visual != nullptr && prompt.visual->prefix.trainable &&
      config_.variant == BackboneVariant::kJointPrompt) {
    std::vector<double> d_fhat(config_.d);
    std::vector<double> d_f(config_.d);
    std::vector<double> d_in(config_.d_img);
    auto d_prefix = prompt.visual->prefix.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(d_fhat.begin(), d_fhat.end(), 0.0);
      for (std::size_t j = 0; j < h; ++j) {
        const double w = d_logits.at(i, j) / tau;
        auto gj = g_hat.row(j);
        for (std::size_t k = 0; k < config_.d; ++k) d_fhat[k] += w * gj[k];
      }
      std::fill(d_f.begin(), d_f.end(), 0.0);
      l2_normalize_backward(f_hat.row(i), image_norm[i], d_fhat, d_f);
      std::fill(d_in.begin(), d_in.end(), 0.0);
      backward(image_, image_cache[i], d_f, d_in);
      for (std::size_t k = 0; k < config_.d_img; ++k) d_prefix[k] += 0.5 * d_in[k];
    }
  }
  return loss;
}

}  // namespace mao
