// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mao/backbone.hpp"
#include "mao/dataset.hpp"
#include "mao/hardneg_sampler.hpp"
#include "mao/pseudo_labeler.hpp"

namespace mao {

enum class TuneMode { kBackbone, kBackbone2x, kMaoBaseOnly, kMaoNewOnly, kMaoFull };

const char* mode_name(TuneMode m) noexcept;
TuneMode parse_mode(std::string_view s);

struct TuneConfig {
  std::size_t epochs = 20;
  double lr = 0.0035;
  std::size_t b = 4;
  std::size_t topk = 8;
  std::size_t shots = 16;
  std::uint64_t seed = 7;
  TuneMode mode = TuneMode::kMaoFull;
  bool new_ar = true;
  LabelerMode labeler = LabelerMode::kFoundation;

  void validate() const;
  friend bool operator==(const TuneConfig&, const TuneConfig&) = default;
};

// Sorted, duplicate-free class ids.
struct CandidateSet {
  std::vector<ClassId> ids;
  std::size_t size() const noexcept { return ids.size(); }
};

CandidateSet candidate_set(std::span<const ClassId> batch_classes);
CandidateSet candidate_set(std::span<const LabeledImage> batch);

// Mean cross-entropy of `items` restricted to `candidates`.
double supervised_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                       std::span<const LabeledImage> items, std::span<const ClassId> candidates,
                       bool accumulate_grad);

double base_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                 const HardNegBatch& batch, const CandidateSet& cset, bool accumulate_grad);

// With new_ar the candidates are the new classes; otherwise base and new.
std::vector<ClassId> new_phase_candidates(std::span<const ClassId> new_classes,
                                          std::span<const ClassId> base_classes, bool new_ar);

double new_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                std::span<const PseudoPair> pairs, std::span<const ClassId> new_classes,
                std::span<const ClassId> base_classes, bool new_ar, bool accumulate_grad);

// value -= lr * grad on every trainable param, then clears the gradients.
void sgd_step(Prompt& prompt, double lr);

enum class Phase { kBase, kNew };
const char* phase_name(Phase p) noexcept;

struct EpochLog {
  std::size_t epoch = 0;  // 1-based, across both phases
  Phase phase = Phase::kBase;
  double loss = 0.0;
  double lr = 0.0;
};

struct CostMeter {
  std::size_t learnable_params = 0;
  double seconds_per_epoch = 0.0;
  std::size_t peak_tracked_bytes = 0;
  double inference_items_per_second = 0.0;
};

struct RunState {
  Prompt prompt;
  std::size_t epoch = 0;
  Phase phase = Phase::kBase;
  std::vector<EpochLog> log;
  std::vector<CandidateSet> base_csets;  // one per base step
  std::vector<std::size_t> new_cset_sizes;  // one per new step
  std::optional<Tensor> prompt_at_base_end;
  std::optional<Tensor> prompt_at_new_start;
  std::vector<PseudoPair> pseudo_pairs;  // last labeling
  std::optional<double> pseudo_acc;
  std::size_t b_eff = 0;
  std::size_t k_eff = 0;
  std::vector<std::string> notes;  // auto-shrink and schedule messages
};

struct RunResult {
  RunState state;
  CostMeter cost;
};

// Tunes a fresh prompt on `ds` (which must carry a split) per `config`.
RunResult run_two_step(const TuneConfig& config, const Dataset& ds, const Backbone& backbone);

// Run-directory helpers. The directory must already exist.
std::string metrics_csv(const std::vector<EpochLog>& log);
std::string tensor_text(const Tensor& t);
Tensor parse_tensor_text(const std::string& text);
void save_prompt(const Prompt& prompt, const std::filesystem::path& dir);
Prompt load_prompt(const std::filesystem::path& dir, const Backbone& backbone);

// `base`, or `base-1`, `base-2`, ... whichever does not exist yet; created.
std::filesystem::path fresh_run_dir(const std::filesystem::path& base);

}  // namespace mao
