// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/pseudo_labeler.hpp"

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

const char* labeler_name(LabelerMode m) noexcept {
  return m == LabelerMode::kTuned ? "tuned" : "foundation";
}

LabelerMode parse_labeler(std::string_view s) {
  if (s == "foundation") return LabelerMode::kFoundation;
  if (s == "tuned") return LabelerMode::kTuned;
  fail(ErrorCode::kConfig, "unknown labeler '" + std::string(s) +
                               "' (expected foundation or tuned)");
}

namespace {

PseudoPair top1(const std::vector<double>& p, std::span<const ClassId> classes) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < p.size(); ++j) {
    if (p[j] > p[best] || (p[j] == p[best] && classes[j] < classes[best])) best = j;
  }
  return {ImageId{}, classes[best], p[best]};
}

struct Labeler {
  const Prompt& prompt;
  TextHead head;
  const VisualPrompt* visual;
};

Labeler make_labeler(const Backbone& backbone, LabelerMode mode, const Prompt& prompt,
                     const Prompt& hard, std::span<const ClassId> new_classes) {
  if (new_classes.empty()) fail(ErrorCode::kArgument, "pseudo-labeling needs new classes");
  const Prompt& used = mode == LabelerMode::kFoundation ? hard : prompt;
  const VisualPrompt* visual = used.visual ? &*used.visual : nullptr;
  return {used, backbone.text_head(used, new_classes), visual};
}

}  // namespace

PseudoPair pseudo_label(const Backbone& backbone, LabelerMode mode, const Prompt& prompt,
                        std::span<const double> x, std::span<const ClassId> new_classes) {
  const Prompt hard = backbone.hard_prompt();
  const Labeler l = make_labeler(backbone, mode, prompt, hard, new_classes);
  return top1(backbone.predict_proba(l.head, x, l.visual), new_classes);
}

std::vector<PseudoPair> build_pseudo_pairs(const Backbone& backbone, LabelerMode mode,
                                           const Prompt& prompt, const Dataset& ds,
                                           const FewShotSet& unlabeled,
                                           std::span<const ClassId> new_classes) {
  if (unlabeled.unlabeled.empty()) fail(ErrorCode::kArgument, "no unlabeled images to label");
  const Prompt hard = backbone.hard_prompt();
  const Labeler l = make_labeler(backbone, mode, prompt, hard, new_classes);
  std::vector<PseudoPair> out;
  out.reserve(unlabeled.unlabeled.size());
  for (ImageId id : unlabeled.unlabeled) {
    PseudoPair p = top1(backbone.predict_proba(l.head, ds.features(id), l.visual), new_classes);
    p.image = id;
    out.push_back(p);
  }
  return out;
}

double pseudo_accuracy(const std::vector<PseudoPair>& pairs, const Dataset& ds) {
  if (pairs.empty()) return 0.0;
  std::size_t hit = 0;
  for (const PseudoPair& p : pairs) hit += p.label == ds.diagnostic_label(p.image) ? 1 : 0;
  return double(hit) / double(pairs.size());
}

std::string pseudo_csv(const std::vector<PseudoPair>& pairs, const Dataset& ds) {
  std::string out = "image_id,pseudo_class,confidence,true_class\n";
  for (const PseudoPair& p : pairs) {
    out += std::to_string(index_of(p.image)) + "," + std::to_string(index_of(p.label)) + "," +
           text::format_double(p.confidence) + "," +
           std::to_string(index_of(ds.diagnostic_label(p.image))) + "\n";
  }
  return out;
}

}  // namespace mao
