// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mao/dataset.hpp"
#include "mao/numerics.hpp"

namespace mao {

enum class BackboneVariant { kTextPrompt, kJointPrompt };

const char* variant_name(BackboneVariant v) noexcept;
BackboneVariant parse_variant(std::string_view s);

// Shape of the toy foundation model. The text tower is built so that, for a
// context equal to a hidden "ideal" context, g(class) == f(token concept of
// class). The token concept is the class-name embedding plus a systematic
// naming error: one offset shared by every class and one per superclass. The
// hard template sits close to the ideal context.
struct FoundationShape {
  double weight_scale = 1.5;
  double bias_scale = 0.3;
  double ideal_context_scale = 0.0;
  double template_error = 0.05;
  double global_name_offset = 0.0;
  double super_name_offset = 0.7;
  double token_scale = 2.5;
  double prompt_init_std = 0.02;

  friend bool operator==(const FoundationShape&, const FoundationShape&) = default;
};

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::kTextPrompt;
  std::size_t context_length = 4;  // L
  std::size_t d_token = 32;
  std::size_t d = 32;
  std::size_t d_img = 32;
  double tau = 0.01;
  std::uint64_t seed = 7;
  FoundationShape shape;  // fixed calibration; not a config-file key

  void validate() const;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

// Learnable text context [theta]_1 ... [theta]_L, shape L x d_token.
struct PromptVector {
  Param tokens;
};

// Learnable visual prefix, joint variant only.
struct VisualPrompt {
  Param prefix;
};

struct Prompt {
  PromptVector text;
  std::optional<VisualPrompt> visual;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  void zero_grad();
};

// One supervised item for the differentiable loss.
struct Example {
  std::span<const double> features;
  ClassId target{};
};

// Frozen, L2-normalised text embeddings for an ordered candidate list.
struct TextHead {
  std::vector<ClassId> candidates;
  Tensor embeddings;  // H x d, rows unit length
};

class Backbone {
 public:
  explicit Backbone(BackboneConfig config);

  const BackboneConfig& config() const noexcept { return config_; }

  // Builds the frozen token table from the dataset's class-name embeddings.
  // Must be called before any text encoding.
  void bind(const Dataset& ds);
  std::size_t vocab_size() const noexcept { return token_table_.value.rows(); }

  Prompt init_prompt(Rng& rng) const;
  // The fixed hand-crafted context, without a visual prefix.
  Prompt hard_prompt() const;
  const Tensor& hard_template() const noexcept { return hard_template_.value; }

  Tensor encode_text(const Tensor& context, ClassId c) const;
  Tensor encode_image(std::span<const double> x, const VisualPrompt* visual) const;

  TextHead text_head(const Prompt& prompt, std::span<const ClassId> candidates) const;
  std::vector<double> predict_proba(const TextHead& head, std::span<const double> x,
                                    const VisualPrompt* visual) const;
  std::vector<double> predict_proba(const Prompt& prompt, std::span<const double> x,
                                    std::span<const ClassId> candidates) const;

  // Top-1 under the hard template; ties go to the lowest class id.
  std::pair<ClassId, double> zero_shot_label(std::span<const double> x,
                                             std::span<const ClassId> candidates) const;

  std::size_t param_count() const noexcept;

  // Mean cross-entropy of softmax over `candidates` (text embeddings computed
  // once and L2-normalised). With accumulate_grad, adds d loss / d prompt into
  // the prompt's trainable params.
  double cross_entropy(Prompt& prompt, std::span<const Example> items,
                       std::span<const ClassId> candidates, bool accumulate_grad) const;

  std::vector<const Param*> frozen_params() const;

 private:
  struct Mlp {
    Param w1, b1, w2, b2;
  };
  struct MlpCache {
    std::vector<double> input;
    std::vector<double> hidden;  // tanh activations
    Tensor output;
  };

  MlpCache forward(const Mlp& mlp, std::span<const double> input) const;
  void backward(const Mlp& mlp, const MlpCache& cache, std::span<const double> d_output,
                std::span<double> d_input) const;

  std::vector<double> pool(const Tensor& context, ClassId c) const;
  std::vector<double> image_input(std::span<const double> x, const VisualPrompt* visual) const;
  void check_candidates(std::span<const ClassId> candidates) const;

  BackboneConfig config_;
  Mlp image_;
  Mlp text_;
  Param token_projection_;  // d_img x d_token, concept space -> token space
  Param ideal_context_;
  Param hard_template_;
  Param token_table_;  // V x d_token, set by bind()
};

}  // namespace mao
