// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <vector>

#include "mao/dataset.hpp"

namespace fixture {

// All-base dataset whose sampler embeddings are exactly `rows`; one training
// image per class.
inline mao::Dataset with_sampler_rows(const std::vector<std::vector<double>>& rows) {
  using namespace mao;
  DatasetSpec spec;
  spec.n_super = 1;
  spec.classes_per_super = rows.size();
  spec.d_img = 2;
  spec.d_s = rows[0].size();
  std::vector<ClassInfo> vocab;
  Tensor sampler({rows.size(), spec.d_s});
  Tensor feats({rows.size(), 2}, 0.5);
  std::vector<ClassId> labels;
  std::vector<Partition> parts;
  for (std::size_t c = 0; c < rows.size(); ++c) {
    vocab.push_back({class_id(c), std::uint32_t(c), 0, ClassSplit::kBase});
    std::copy(rows[c].begin(), rows[c].end(), sampler.row(c).begin());
    labels.push_back(class_id(c));
    parts.push_back(Partition::kTrain);
  }
  return Dataset(spec, vocab, Tensor({rows.size(), 2}, 1.0), sampler, feats, labels, parts);
}

}  // namespace fixture
