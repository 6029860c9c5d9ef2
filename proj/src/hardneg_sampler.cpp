// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/hardneg_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

SamplerIndex SamplerIndex::build(const Dataset& ds) {
  if (!ds.has_split()) fail(ErrorCode::kState, "sampler index needs a base/new split");
  SamplerIndex index;
  index.classes_ = ds.base_classes();
  index.embed_ = Tensor({index.classes_.size(), ds.d_s()});
  for (std::size_t i = 0; i < index.classes_.size(); ++i) {
    auto src = ds.sampler_embedding(index.classes_[i]);
    if (norm2(src) == 0.0) {
      fail(ErrorCode::kDegenerateInput,
           "class " + std::to_string(index_of(index.classes_[i])) + " has a zero sampler embedding");
    }
    std::copy(src.begin(), src.end(), index.embed_.row(i).begin());
  }
  return index;
}

bool SamplerIndex::contains(ClassId c) const noexcept {
  return std::binary_search(classes_.begin(), classes_.end(), c);
}

std::vector<ClassId> SamplerIndex::top_k_classes(std::span<const double> query,
                                                 std::size_t k) const {
  if (k == 0) fail(ErrorCode::kArgument, "top-K query needs K >= 1");
  if (k > classes_.size()) throw ConstraintViolation(1, k, classes_.size());
  if (query.size() != embed_.cols()) {
    fail(ErrorCode::kShape, "sampler query has " + std::to_string(query.size()) +
                                " dims, index has " + std::to_string(embed_.cols()));
  }
  std::vector<double> sims(classes_.size());
  for (std::size_t i = 0; i < classes_.size(); ++i) sims[i] = cosine_sim(query, embed_.row(i));

  std::vector<std::size_t> order(classes_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return classes_[a] < classes_[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  std::vector<ClassId> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = classes_[order[i]];
  return out;
}

// ---------------------------------------------------------------------------

ClassPools pools_from_pairs(const std::vector<LabeledImage>& pairs, std::size_t num_classes) {
  ClassPools pools(num_classes);
  for (const LabeledImage& p : pairs) {
    if (index_of(p.label) >= num_classes) {
      fail(ErrorCode::kVocabulary, "pair label " + std::to_string(index_of(p.label)) +
                                       " outside the vocabulary");
    }
    pools[index_of(p.label)].push_back(p.image);
  }
  return pools;
}

ClassPools pools_from_train(const Dataset& ds) {
  ClassPools pools(ds.num_classes());
  for (std::size_t c = 0; c < ds.num_classes(); ++c) pools[c] = ds.train_images(class_id(c));
  return pools;
}

void check_constraint(std::size_t b, std::size_t k, std::size_t n_base) {
  if (b * k > n_base) throw ConstraintViolation(b, k, n_base);
}

ShrinkResult auto_shrink(std::size_t b, std::size_t k, std::size_t n_base) {
  if (b == 0 || k == 0) fail(ErrorCode::kConfig, "b and topk must be >= 1");
  if (n_base == 0) fail(ErrorCode::kDataset, "no base classes");
  ShrinkResult r{b, k, false, {}};
  if (r.b * r.k > n_base) {
    r.shrunk = true;
    if (r.b > 1) r.b /= 2;
    while (r.b * r.k > n_base && r.k > 1) r.k /= 2;
    while (r.b * r.k > n_base) r.b /= 2;
  }
  if (r.shrunk) {
    std::ostringstream msg;
    msg << "auto-shrink: b*topK = " << b << "*" << k << " = " << b * k << " exceeds |C_b| = "
        << n_base << "; using b = " << r.b << ", topK = " << r.k;
    r.message = msg.str();
  }
  return r;
}

HardNegBatch expand_batch(const SamplerIndex& index, const Dataset& ds,
                          std::span<const LabeledImage> anchors, std::size_t k,
                          const ClassPools& pools, Rng& rng) {
  check_constraint(anchors.size(), k, index.size());
  HardNegBatch batch;
  batch.anchors.assign(anchors.begin(), anchors.end());
  batch.pairs.reserve(anchors.size() * k);
  for (const LabeledImage& anchor : anchors) {
    for (ClassId c : index.top_k_classes(ds.sampler_embedding(anchor.label), k)) {
      if (index_of(c) >= pools.size() || pools[index_of(c)].empty()) {
        fail(ErrorCode::kDataset,
             "class " + std::to_string(index_of(c)) + " has no image to sample");
      }
      const auto& pool = pools[index_of(c)];
      batch.pairs.push_back({pool[rng.index(pool.size())], c});
    }
  }
  return batch;
}

std::vector<LabeledImage> random_batch(const std::vector<LabeledImage>& pairs,
                                       std::size_t count, Rng& rng) {
  if (pairs.empty()) fail(ErrorCode::kArgument, "random batch from an empty pool");
  std::vector<LabeledImage> out(count);
  for (auto& p : out) p = pairs[rng.index(pairs.size())];
  return out;
}

double semantic_density(std::span<const ClassId> batch, const Dataset& ds) {
  if (batch.size() < 2) fail(ErrorCode::kArgument, "semantic density needs at least 2 items");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      sum += cosine_sim(ds.sampler_embedding(batch[i]), ds.sampler_embedding(batch[j]));
      ++count;
    }
  }
  return sum / double(count);
}

DensityComparison compare_density(const Dataset& ds, const std::vector<LabeledImage>& base_pairs,
                                  std::size_t b, std::size_t k, std::size_t batches, Rng& rng) {
  if (batches == 0) fail(ErrorCode::kArgument, "density comparison needs at least one batch");
  const SamplerIndex index = SamplerIndex::build(ds);
  const ClassPools pools = pools_from_pairs(base_pairs, ds.num_classes());
  DensityComparison out;
  out.shrink = auto_shrink(b, k, index.size());
  const std::size_t size = out.shrink.b * out.shrink.k;
  auto labels = [](const std::vector<LabeledImage>& pairs) {
    std::vector<ClassId> ids;
    for (const auto& p : pairs) ids.push_back(p.label);
    return ids;
  };
  for (std::size_t i = 0; i < batches; ++i) {
    const auto anchors = random_batch(base_pairs, out.shrink.b, rng);
    const auto hard = labels(expand_batch(index, ds, anchors, out.shrink.k, pools, rng).pairs);
    const auto uniform = labels(random_batch(base_pairs, size, rng));
    if (size >= 2) {
      out.hard.push_back(semantic_density(hard, ds));
      out.random.push_back(semantic_density(uniform, ds));
    }
    if (i == 0) {
      out.first_hard = hard;
      out.first_random = uniform;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<PcaPoint> pca_snapshot(std::span<const ClassId> batch, const Dataset& ds) {
  std::vector<ClassId> unique(batch.begin(), batch.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() < 3) {
    fail(ErrorCode::kArgument, "PCA snapshot needs at least 3 distinct classes");
  }
  Tensor points({unique.size(), ds.d_s()});
  for (std::size_t i = 0; i < unique.size(); ++i) {
    auto e = ds.sampler_embedding(unique[i]);
    std::copy(e.begin(), e.end(), points.row(i).begin());
  }
  const auto proj = pca_project_2d(points);
  std::vector<PcaPoint> out(unique.size());
  for (std::size_t i = 0; i < unique.size(); ++i) out[i] = {unique[i], proj[i][0], proj[i][1]};
  return out;
}

double mean_pairwise_distance(const std::vector<PcaPoint>& points) {
  if (points.size() < 2) fail(ErrorCode::kArgument, "need at least 2 points");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      sum += std::hypot(points[i].x - points[j].x, points[i].y - points[j].y);
      ++count;
    }
  }
  return sum / double(count);
}

std::string pca_csv(const std::vector<PcaPoint>& points) {
  std::string out = "class_id,x,y\n";
  for (const PcaPoint& p : points) {
    out += std::to_string(index_of(p.id)) + "," + text::format_double(p.x) + "," +
           text::format_double(p.y) + "\n";
  }
  return out;
}

std::string pca_svg(const std::vector<PcaSeries>& series) {
  static constexpr const char* kColors[] = {"#c0392b", "#2471a3", "#229954", "#7d3c98"};
  constexpr double kSize = 400.0;
  constexpr double kMargin = 30.0;
  double extent = 1e-12;
  for (const auto& s : series)
    for (const auto& p : s.points) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
  auto px = [&](double v) { return kSize / 2 + v / extent * (kSize / 2 - kMargin); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 4];
    svg << "<text x=\"8\" y=\"" << 16 + 14 * s << "\" font-size=\"12\" fill=\"" << color << "\">"
        << series[s].name << "</text>\n";
    for (const auto& p : series[s].points) {
      svg << "<circle cx=\"" << text::format_double(px(p.x)) << "\" cy=\""
          << text::format_double(kSize - px(p.y)) << "\" r=\"4\" fill=\"" << color
          << "\"><title>" << index_of(p.id) << "</title></circle>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mao
