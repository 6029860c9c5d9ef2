// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mao/numerics.hpp"

namespace mao {

enum class ClassId : std::uint32_t {};
enum class ImageId : std::uint32_t {};

constexpr std::size_t index_of(ClassId c) noexcept { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(ImageId i) noexcept { return static_cast<std::size_t>(i); }
constexpr ClassId class_id(std::size_t i) noexcept { return static_cast<ClassId>(i); }
constexpr ImageId image_id(std::size_t i) noexcept { return static_cast<ImageId>(i); }

enum class ClassSplit : std::uint8_t { kUnassigned, kBase, kNew };
enum class Partition : std::uint8_t { kTrain, kTest };

struct DatasetSpec {
  std::size_t n_super = 8;
  std::size_t classes_per_super = 4;
  std::size_t d_img = 32;
  std::size_t d_s = 16;
  double sigma_img = 0.15;
  double sigma_sem = 0.05;
  std::size_t n_train_per_class = 32;
  std::size_t n_test_per_class = 32;
  std::uint64_t seed = 7;

  std::size_t num_classes() const noexcept { return n_super * classes_per_super; }
  void validate() const;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ClassInfo {
  ClassId id{};
  std::uint32_t name_token = 0;
  std::uint32_t super_id = 0;
  ClassSplit split = ClassSplit::kUnassigned;

  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

// A labeled image as seen by code that is entitled to the label (test-split
// evaluation, base few-shot pairs).
struct LabeledImage {
  ImageId image{};
  ClassId label{};
};

// Synthetic hierarchical dataset. Immutable once built; every mutation returns
// a new value.
//
// Each class carries a "name embedding" in the d_img concept space. It is the
// toy stand-in for the meaning of the class name that a pretrained text tower
// knows about, and is what the backbone's token table is built from.
class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetSpec spec, std::vector<ClassInfo> vocab, Tensor name_embed,
          Tensor sampler_embed, Tensor features, std::vector<ClassId> labels,
          std::vector<Partition> partitions);

  const DatasetSpec& spec() const noexcept { return spec_; }
  std::size_t num_classes() const noexcept { return vocab_.size(); }
  std::size_t num_images() const noexcept { return labels_.size(); }
  std::size_t d_img() const noexcept { return features_.cols(); }
  std::size_t d_s() const noexcept { return sampler_embed_.cols(); }

  const std::vector<ClassInfo>& vocab() const noexcept { return vocab_; }
  const ClassInfo& class_info(ClassId c) const;
  bool has_split() const noexcept;

  std::vector<ClassId> base_classes() const;
  std::vector<ClassId> new_classes() const;
  std::vector<ClassId> all_classes() const;

  std::span<const double> features(ImageId i) const;
  std::span<const double> name_embedding(ClassId c) const;
  std::span<const double> sampler_embedding(ClassId c) const;
  const Tensor& name_embeddings() const noexcept { return name_embed_; }
  const Tensor& sampler_embeddings() const noexcept { return sampler_embed_; }
  const Tensor& feature_matrix() const noexcept { return features_; }
  Partition partition(ImageId i) const;

  // Training image ids of one class, ascending.
  std::vector<ImageId> train_images(ClassId c) const;

  // Test images (with labels) whose class is in `classes`.
  std::vector<LabeledImage> test_images(std::span<const ClassId> classes) const;

  // Hidden ground truth for any image. Only diagnostics (pseudo-label accuracy,
  // reports) may call this; training code receives labels through FewShotSet.
  ClassId diagnostic_label(ImageId i) const;

  Dataset with_splits(std::vector<ClassSplit> splits) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  DatasetSpec spec_;
  std::vector<ClassInfo> vocab_;
  Tensor name_embed_;
  Tensor sampler_embed_;
  Tensor features_;
  std::vector<ClassId> labels_;
  std::vector<Partition> partitions_;
};

struct FewShotSet {
  std::vector<LabeledImage> pairs;   // base mode
  std::vector<ImageId> unlabeled;    // new mode
  std::size_t shots = 0;
};

enum class FewShotMode { kBasePairs, kNewUnlabeled };

// Spread of class prototypes around their superclass centre (expected norm of
// the offset). Sibling classes are therefore about 0.7 apart while superclass
// centres are about 1.4 apart.
inline constexpr double kPrototypeSpread = 0.5;

Dataset generate(const DatasetSpec& spec);

// First half of the sorted class ids become base, the rest new; an odd count
// gives the extra class to base.
Dataset split_base_new(const Dataset& ds);

// Every class flagged base (source dataset for cross-dataset transfer).
Dataset split_all_base(const Dataset& ds);

FewShotSet sample_few_shot(const Dataset& ds, std::size_t shots, FewShotMode mode,
                           Rng& rng);

void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

}  // namespace mao
