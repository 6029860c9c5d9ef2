// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

void DatasetSpec::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) fail(ErrorCode::kConfig, "dataset spec: " + msg);
  };
  require(n_super >= 1, "n_super must be >= 1");
  require(classes_per_super >= 1, "classes_per_super must be >= 1");
  require(n_train_per_class >= 1, "n_train_per_class must be >= 1");
  require(n_test_per_class >= 1, "n_test_per_class must be >= 1");
  require(sigma_img >= 0.0 && std::isfinite(sigma_img), "sigma_img must be >= 0");
  require(sigma_sem >= 0.0 && std::isfinite(sigma_sem), "sigma_sem must be >= 0");
  if (d_img < 2 || d_s < 2) {
    fail(ErrorCode::kConfig, "dataset spec: d_img and d_s must be >= 2");
  }
}

// ---------------------------------------------------------------------------

Dataset::Dataset(DatasetSpec spec, std::vector<ClassInfo> vocab, Tensor name_embed,
                 Tensor sampler_embed, Tensor features, std::vector<ClassId> labels,
                 std::vector<Partition> partitions)
    : spec_(spec),
      vocab_(std::move(vocab)),
      name_embed_(std::move(name_embed)),
      sampler_embed_(std::move(sampler_embed)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      partitions_(std::move(partitions)) {
  if (labels_.size() != partitions_.size() || labels_.size() != features_.rows()) {
    fail(ErrorCode::kDataset, "image labels, partitions and features disagree in length");
  }
  for (ClassId c : labels_) {
    if (index_of(c) >= vocab_.size()) {
      fail(ErrorCode::kDataset, "image label " + std::to_string(index_of(c)) +
                                    " is not in the vocabulary");
    }
  }
}

const ClassInfo& Dataset::class_info(ClassId c) const {
  if (index_of(c) >= vocab_.size()) {
    fail(ErrorCode::kVocabulary, "unknown class id " + std::to_string(index_of(c)));
  }
  return vocab_[index_of(c)];
}

bool Dataset::has_split() const noexcept {
  return !vocab_.empty() && std::all_of(vocab_.begin(), vocab_.end(), [](const ClassInfo& c) {
           return c.split != ClassSplit::kUnassigned;
         });
}

namespace {

std::vector<ClassId> classes_with(const std::vector<ClassInfo>& vocab, ClassSplit s) {
  std::vector<ClassId> out;
  for (const auto& c : vocab)
    if (c.split == s) out.push_back(c.id);
  return out;
}

}  // namespace

std::vector<ClassId> Dataset::base_classes() const {
  return classes_with(vocab_, ClassSplit::kBase);
}

std::vector<ClassId> Dataset::new_classes() const {
  return classes_with(vocab_, ClassSplit::kNew);
}

std::vector<ClassId> Dataset::all_classes() const {
  std::vector<ClassId> out;
  for (const auto& c : vocab_) out.push_back(c.id);
  return out;
}

std::span<const double> Dataset::features(ImageId i) const {
  if (index_of(i) >= labels_.size()) {
    fail(ErrorCode::kDataset, "unknown image id " + std::to_string(index_of(i)));
  }
  return features_.row(index_of(i));
}

std::span<const double> Dataset::name_embedding(ClassId c) const {
  class_info(c);
  return name_embed_.row(index_of(c));
}

std::span<const double> Dataset::sampler_embedding(ClassId c) const {
  class_info(c);
  return sampler_embed_.row(index_of(c));
}

Partition Dataset::partition(ImageId i) const {
  if (index_of(i) >= labels_.size()) {
    fail(ErrorCode::kDataset, "unknown image id " + std::to_string(index_of(i)));
  }
  return partitions_[index_of(i)];
}

std::vector<ImageId> Dataset::train_images(ClassId c) const {
  class_info(c);
  std::vector<ImageId> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == c && partitions_[i] == Partition::kTrain) out.push_back(image_id(i));
  return out;
}

std::vector<LabeledImage> Dataset::test_images(std::span<const ClassId> classes) const {
  std::vector<bool> wanted(vocab_.size(), false);
  for (ClassId c : classes) wanted[index_of(class_info(c).id)] = true;
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (partitions_[i] == Partition::kTest && wanted[index_of(labels_[i])]) {
      out.push_back({image_id(i), labels_[i]});
    }
  }
  return out;
}

ClassId Dataset::diagnostic_label(ImageId i) const {
  if (index_of(i) >= labels_.size()) {
    fail(ErrorCode::kDataset, "unknown image id " + std::to_string(index_of(i)));
  }
  return labels_[index_of(i)];
}

Dataset Dataset::with_splits(std::vector<ClassSplit> splits) const {
  if (splits.size() != vocab_.size()) {
    fail(ErrorCode::kArgument, "split vector does not match vocabulary size");
  }
  Dataset out = *this;
  for (std::size_t i = 0; i < splits.size(); ++i) out.vocab_[i].split = splits[i];
  return out;
}

// ---------------------------------------------------------------------------

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Rng center_rng = root.substream("centers");
  Rng offset_rng = root.substream("offsets");
  Rng map_rng = root.substream("sampler_map");
  Rng sem_rng = root.substream("sampler_noise");
  Rng img_rng = root.substream("images");

  const std::size_t n_classes = spec.num_classes();
  const std::size_t d = spec.d_img;

  Tensor centers({spec.n_super, d});
  for (std::size_t s = 0; s < spec.n_super; ++s) {
    Tensor v;
    do {
      for (double& x : centers.row(s)) x = center_rng.normal();
    } while (norm2(centers.row(s)) == 0.0);
    v = l2_normalize(centers.row(s));
    std::copy(v.data().begin(), v.data().end(), centers.row(s).begin());
  }

  std::vector<ClassInfo> vocab(n_classes);
  Tensor prototypes({n_classes, d});
  const double offset_sd = kPrototypeSpread / std::sqrt(static_cast<double>(d));
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::size_t s = c / spec.classes_per_super;
    vocab[c] = ClassInfo{class_id(c), static_cast<std::uint32_t>(c),
                         static_cast<std::uint32_t>(s), ClassSplit::kUnassigned};
    for (std::size_t j = 0; j < d; ++j) {
      prototypes.at(c, j) = centers.at(s, j) + offset_sd * offset_rng.normal();
    }
  }

  // Sampler space: a fixed linear image of the prototypes plus noise, so that
  // semantic similarity tracks visual similarity.
  Tensor sampler_map({spec.d_s, d});
  const double map_sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& x : sampler_map.data()) x = map_sd * map_rng.normal();
  Tensor sampler({n_classes, spec.d_s});
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t k = 0; k < spec.d_s; ++k) {
      sampler.at(c, k) = dot(sampler_map.row(k), prototypes.row(c)) +
                         spec.sigma_sem * sem_rng.normal();
    }
  }

  const std::size_t n_images = n_classes * (spec.n_train_per_class + spec.n_test_per_class);
  Tensor features({n_images, d});
  std::vector<ClassId> labels;
  std::vector<Partition> parts;
  labels.reserve(n_images);
  parts.reserve(n_images);
  auto emit = [&](std::size_t c, Partition p) {
    const std::size_t row = labels.size();
    for (std::size_t j = 0; j < d; ++j) {
      features.at(row, j) = prototypes.at(c, j) + spec.sigma_img * img_rng.normal();
    }
    labels.push_back(class_id(c));
    parts.push_back(p);
  };
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < spec.n_train_per_class; ++i) emit(c, Partition::kTrain);
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < spec.n_test_per_class; ++i) emit(c, Partition::kTest);

  return Dataset(spec, std::move(vocab), std::move(prototypes), std::move(sampler),
                 std::move(features), std::move(labels), std::move(parts));
}

Dataset split_base_new(const Dataset& ds) {
  const std::size_t n = ds.num_classes();
  if (n < 2) fail(ErrorCode::kDataset, "base/new split needs at least 2 classes");
  const std::size_t n_base = (n + 1) / 2;
  std::vector<ClassSplit> splits(n);
  for (std::size_t c = 0; c < n; ++c) splits[c] = c < n_base ? ClassSplit::kBase : ClassSplit::kNew;
  return ds.with_splits(std::move(splits));
}

Dataset split_all_base(const Dataset& ds) {
  return ds.with_splits(std::vector<ClassSplit>(ds.num_classes(), ClassSplit::kBase));
}

FewShotSet sample_few_shot(const Dataset& ds, std::size_t shots, FewShotMode mode, Rng& rng) {
  if (shots < 1) fail(ErrorCode::kArgument, "few-shot sampling needs shots >= 1");
  if (!ds.has_split()) fail(ErrorCode::kState, "few-shot sampling needs a base/new split");
  FewShotSet out;
  out.shots = shots;
  const auto classes = mode == FewShotMode::kBasePairs ? ds.base_classes() : ds.new_classes();
  for (ClassId c : classes) {
    std::vector<ImageId> pool = ds.train_images(c);
    if (pool.empty()) {
      fail(ErrorCode::kDataset, "class " + std::to_string(index_of(c)) + " has no training images");
    }
    // Partial Fisher-Yates: the first `take` entries are a uniform sample
    // without replacement.
    const std::size_t take = std::min(shots, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      if (mode == FewShotMode::kBasePairs) {
        out.pairs.push_back({pool[i], c});
      } else {
        out.unlabeled.push_back(pool[i]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "mao-dataset v1";

const char* split_name(ClassSplit s) {
  switch (s) {
    case ClassSplit::kBase: return "base";
    case ClassSplit::kNew: return "new";
    case ClassSplit::kUnassigned: break;
  }
  return "none";
}

[[noreturn]] void format_error(const std::string& section, const std::string& msg) {
  fail(ErrorCode::kFormat, "dataset file [" + section + "]: " + msg);
}

class LineReader {
 public:
  explicit LineReader(const std::vector<std::string>& lines, std::size_t end)
      : lines_(lines), end_(end) {}

  std::string_view next(const std::string& section) {
    if (pos_ >= end_) format_error(section, "unexpected end of file (truncated?)");
    return lines_[pos_++];
  }

  bool at_end() const noexcept { return pos_ >= end_; }

  std::string_view header_value(std::string_view key) {
    std::string_view line = next("header");
    auto fields = text::split(line, ' ');
    if (fields.size() != 2 || fields[0] != key) {
      format_error("header", "expected '" + std::string(key) + " <value>', got '" +
                                 std::string(line) + "'");
    }
    return fields[1];
  }

  std::size_t section_start(const std::string& name) {
    std::string_view line = next(name);
    const std::string prefix = "[" + name + "] ";
    if (line.substr(0, prefix.size()) != prefix) {
      format_error(name, "missing section header, got '" + std::string(line) + "'");
    }
    std::uint64_t count = 0;
    if (!text::parse_u64(line.substr(prefix.size()), count)) {
      format_error(name, "bad row count");
    }
    next(name);  // column header
    return static_cast<std::size_t>(count);
  }

 private:
  const std::vector<std::string>& lines_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::size_t parse_size(std::string_view s, const std::string& section) {
  std::uint64_t v = 0;
  if (!text::parse_u64(s, v)) format_error(section, "bad integer '" + std::string(s) + "'");
  return static_cast<std::size_t>(v);
}

double parse_real(std::string_view s, const std::string& section) {
  double v = 0;
  if (!text::parse_double(s, v)) format_error(section, "bad number '" + std::string(s) + "'");
  return v;
}

void read_matrix_rows(LineReader& in, const std::string& section, std::size_t n_rows,
                      std::size_t width, Tensor& out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    auto fields = text::split(in.next(section), ',');
    if (fields.size() != width + 1) {
      format_error(section, "row " + std::to_string(r) + " has " +
                                std::to_string(fields.size() - 1) + " values, header declares " +
                                std::to_string(width));
    }
    if (parse_size(fields[0], section) != r) format_error(section, "rows out of order");
    for (std::size_t j = 0; j < width; ++j) out.at(r, j) = parse_real(fields[j + 1], section);
  }
}

}  // namespace

void save(const Dataset& ds, const std::filesystem::path& path) {
  const DatasetSpec& s = ds.spec();
  std::string out;
  std::size_t lines = 0;
  auto line = [&](const std::string& l) {
    out += l;
    out.push_back('\n');
    ++lines;
  };
  line(std::string(kMagic));
  line("n_super " + std::to_string(s.n_super));
  line("classes_per_super " + std::to_string(s.classes_per_super));
  line("d_img " + std::to_string(s.d_img));
  line("d_s " + std::to_string(s.d_s));
  line("sigma_img " + text::format_double(s.sigma_img));
  line("sigma_sem " + text::format_double(s.sigma_sem));
  line("n_train_per_class " + std::to_string(s.n_train_per_class));
  line("n_test_per_class " + std::to_string(s.n_test_per_class));
  line("seed " + std::to_string(s.seed));

  line("[vocab] " + std::to_string(ds.num_classes()));
  line("class_id,name_token,super_id,split");
  for (const auto& c : ds.vocab()) {
    line(std::to_string(index_of(c.id)) + "," + std::to_string(c.name_token) + "," +
         std::to_string(c.super_id) + "," + split_name(c.split));
  }
  auto matrix = [&](const std::string& name, const Tensor& m, const std::string& first) {
    line("[" + name + "] " + std::to_string(m.rows()));
    std::string header = first;
    for (std::size_t j = 0; j < m.cols(); ++j) header += ",v" + std::to_string(j);
    line(header);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      line(std::to_string(r) + "," + text::join_doubles(m.row(r)));
    }
  };
  matrix("name_embed", ds.name_embeddings(), "class_id");
  matrix("sampler_embed", ds.sampler_embeddings(), "class_id");

  line("[images] " + std::to_string(ds.num_images()));
  {
    std::string header = "image_id,class_id,partition";
    for (std::size_t j = 0; j < ds.d_img(); ++j) header += ",f" + std::to_string(j);
    line(header);
  }
  for (std::size_t i = 0; i < ds.num_images(); ++i) {
    const ImageId id = image_id(i);
    line(std::to_string(i) + "," + std::to_string(index_of(ds.diagnostic_label(id))) + "," +
         (ds.partition(id) == Partition::kTrain ? "train" : "test") + "," +
         text::join_doubles(ds.features(id)));
  }
  line("end " + std::to_string(lines));
  text::write_file(path, out);
}

Dataset load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kDataset, "dataset file not found: " + path.string());
  }
  const std::vector<std::string> lines = text::read_lines(path);
  if (lines.empty() || lines.front() != kMagic) {
    format_error("header", "missing '" + std::string(kMagic) + "' magic line");
  }
  {
    const std::string& last = lines.back();
    std::uint64_t declared = 0;
    if (last.rfind("end ", 0) != 0 || !text::parse_u64(std::string_view(last).substr(4), declared)) {
      format_error("end", "missing trailing line count (truncated file?)");
    }
    if (declared != lines.size() - 1) {
      format_error("end", "line count " + std::to_string(declared) + " does not match the " +
                              std::to_string(lines.size() - 1) + " lines present");
    }
  }

  LineReader in(lines, lines.size() - 1);
  in.next("header");
  DatasetSpec spec;
  spec.n_super = parse_size(in.header_value("n_super"), "header");
  spec.classes_per_super = parse_size(in.header_value("classes_per_super"), "header");
  spec.d_img = parse_size(in.header_value("d_img"), "header");
  spec.d_s = parse_size(in.header_value("d_s"), "header");
  spec.sigma_img = parse_real(in.header_value("sigma_img"), "header");
  spec.sigma_sem = parse_real(in.header_value("sigma_sem"), "header");
  spec.n_train_per_class = parse_size(in.header_value("n_train_per_class"), "header");
  spec.n_test_per_class = parse_size(in.header_value("n_test_per_class"), "header");
  spec.seed = parse_size(in.header_value("seed"), "header");
  try {
    spec.validate();
  } catch (const Error& e) {
    format_error("header", e.what());
  }

  const std::size_t n_classes = in.section_start("vocab");
  if (n_classes != spec.num_classes()) {
    format_error("vocab", "row count disagrees with n_super * classes_per_super");
  }
  std::vector<ClassInfo> vocab(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto f = text::split(in.next("vocab"), ',');
    if (f.size() != 4) format_error("vocab", "expected 4 fields");
    if (parse_size(f[0], "vocab") != c) format_error("vocab", "rows out of order");
    vocab[c].id = class_id(c);
    vocab[c].name_token = static_cast<std::uint32_t>(parse_size(f[1], "vocab"));
    vocab[c].super_id = static_cast<std::uint32_t>(parse_size(f[2], "vocab"));
    if (f[3] == "base") {
      vocab[c].split = ClassSplit::kBase;
    } else if (f[3] == "new") {
      vocab[c].split = ClassSplit::kNew;
    } else if (f[3] == "none") {
      vocab[c].split = ClassSplit::kUnassigned;
    } else {
      format_error("vocab", "unknown split '" + std::string(f[3]) + "'");
    }
  }

  Tensor name_embed({n_classes, spec.d_img});
  if (in.section_start("name_embed") != n_classes) format_error("name_embed", "row count mismatch");
  read_matrix_rows(in, "name_embed", n_classes, spec.d_img, name_embed);

  Tensor sampler({n_classes, spec.d_s});
  if (in.section_start("sampler_embed") != n_classes) {
    format_error("sampler_embed", "row count mismatch");
  }
  read_matrix_rows(in, "sampler_embed", n_classes, spec.d_s, sampler);

  const std::size_t n_images = in.section_start("images");
  Tensor features({n_images, spec.d_img});
  std::vector<ClassId> labels(n_images);
  std::vector<Partition> parts(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    auto f = text::split(in.next("images"), ',');
    if (f.size() != spec.d_img + 3) {
      format_error("images", "row " + std::to_string(i) + " has " +
                                 std::to_string(f.size() >= 3 ? f.size() - 3 : 0) +
                                 " features, header declares d_img = " + std::to_string(spec.d_img));
    }
    if (parse_size(f[0], "images") != i) format_error("images", "rows out of order");
    const std::size_t c = parse_size(f[1], "images");
    if (c >= n_classes) format_error("images", "class id out of range");
    labels[i] = class_id(c);
    if (f[2] == "train") {
      parts[i] = Partition::kTrain;
    } else if (f[2] == "test") {
      parts[i] = Partition::kTest;
    } else {
      format_error("images", "unknown partition '" + std::string(f[2]) + "'");
    }
    for (std::size_t j = 0; j < spec.d_img; ++j) features.at(i, j) = parse_real(f[j + 3], "images");
  }
  if (!in.at_end()) format_error("end", "trailing content after the images section");

  return Dataset(spec, std::move(vocab), std::move(name_embed), std::move(sampler),
                 std::move(features), std::move(labels), std::move(parts));
}

}  // namespace mao
