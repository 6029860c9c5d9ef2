// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "mao/dataset.hpp"
#include "mao/numerics.hpp"

namespace mao {

// Base-class sampler-space embeddings, answering cosine top-K queries.
class SamplerIndex {
 public:
  static SamplerIndex build(const Dataset& ds);

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<ClassId>& classes() const noexcept { return classes_; }
  std::span<const double> embedding(std::size_t entry) const { return embed_.row(entry); }
  bool contains(ClassId c) const noexcept;

  // The k entries with highest cosine similarity to `query`, descending;
  // equal similarities are ordered by class id.
  std::vector<ClassId> top_k_classes(std::span<const double> query, std::size_t k) const;

 private:
  std::vector<ClassId> classes_;  // ascending
  Tensor embed_;
};

// Images available per class, indexed by class id.
using ClassPools = std::vector<std::vector<ImageId>>;

ClassPools pools_from_pairs(const std::vector<LabeledImage>& pairs, std::size_t num_classes);
ClassPools pools_from_train(const Dataset& ds);

struct HardNegBatch {
  std::vector<LabeledImage> pairs;    // b * K, grouped by anchor
  std::vector<LabeledImage> anchors;  // b
};

// Throws ConstraintViolation unless b * k <= n_base.
void check_constraint(std::size_t b, std::size_t k, std::size_t n_base);

struct ShrinkResult {
  std::size_t b = 0;
  std::size_t k = 0;
  bool shrunk = false;
  std::string message;
};

// Halves b once, then k, then b again, until b * k <= n_base. 4x8 becomes
// 2x8 for 16 base classes and 2x2 for 5.
ShrinkResult auto_shrink(std::size_t b, std::size_t k, std::size_t n_base);

// For every anchor, queries the top-k base classes of the anchor class and
// draws one image per class from `pools`.
HardNegBatch expand_batch(const SamplerIndex& index, const Dataset& ds,
                          std::span<const LabeledImage> anchors, std::size_t k,
                          const ClassPools& pools, Rng& rng);

// `count` pairs drawn uniformly with replacement from `pairs`.
std::vector<LabeledImage> random_batch(const std::vector<LabeledImage>& pairs,
                                       std::size_t count, Rng& rng);

// Mean cosine over all unordered pairs of the classes' sampler embeddings.
double semantic_density(std::span<const ClassId> batch, const Dataset& ds);

// Semantic density of `batches` hard-negative batches against as many
// uniform batches of the same size, both drawn from `base_pairs`. b and k are
// auto-shrunk first.
struct DensityComparison {
  std::vector<double> hard;
  std::vector<double> random;
  std::vector<ClassId> first_hard;    // class ids of the first batch of each kind
  std::vector<ClassId> first_random;
  ShrinkResult shrink;
};
DensityComparison compare_density(const Dataset& ds, const std::vector<LabeledImage>& base_pairs,
                                  std::size_t b, std::size_t k, std::size_t batches, Rng& rng);

struct PcaPoint {
  ClassId id{};
  double x = 0.0;
  double y = 0.0;
};

// 2-D principal projection of the distinct classes of `batch`, by class id.
std::vector<PcaPoint> pca_snapshot(std::span<const ClassId> batch, const Dataset& ds);

double mean_pairwise_distance(const std::vector<PcaPoint>& points);

std::string pca_csv(const std::vector<PcaPoint>& points);

struct PcaSeries {
  std::string name;
  std::vector<PcaPoint> points;
};
std::string pca_svg(const std::vector<PcaSeries>& series);

}  // namespace mao
