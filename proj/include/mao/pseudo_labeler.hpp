// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mao/backbone.hpp"
#include "mao/dataset.hpp"

namespace mao {

// foundation: hard template, no learned state. tuned: the current prompt.
enum class LabelerMode { kFoundation, kTuned };

const char* labeler_name(LabelerMode m) noexcept;
LabelerMode parse_labeler(std::string_view s);

struct PseudoPair {
  ImageId image{};
  ClassId label{};
  double confidence = 0.0;
};

// Top-1 class of x over `new_classes` and its probability. Ties go to the
// lowest class id. The returned pair has no image id set.
PseudoPair pseudo_label(const Backbone& backbone, LabelerMode mode, const Prompt& prompt,
                        std::span<const double> x, std::span<const ClassId> new_classes);

// One pair per unlabeled image, in input order.
std::vector<PseudoPair> build_pseudo_pairs(const Backbone& backbone, LabelerMode mode,
                                           const Prompt& prompt, const Dataset& ds,
                                           const FewShotSet& unlabeled,
                                           std::span<const ClassId> new_classes);

// Fraction of pairs whose label matches the hidden class.
double pseudo_accuracy(const std::vector<PseudoPair>& pairs, const Dataset& ds);

// image_id,pseudo_class,confidence,true_class
std::string pseudo_csv(const std::vector<PseudoPair>& pairs, const Dataset& ds);

}  // namespace mao
