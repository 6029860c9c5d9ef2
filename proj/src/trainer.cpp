// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

const char* mode_name(TuneMode m) noexcept {
  switch (m) {
    case TuneMode::kBackbone: return "backbone";
    case TuneMode::kBackbone2x: return "backbone_2x";
    case TuneMode::kMaoBaseOnly: return "mao_base_only";
    case TuneMode::kMaoNewOnly: return "mao_new_only";
    case TuneMode::kMaoFull: return "mao_full";
  }
  return "?";
}

TuneMode parse_mode(std::string_view s) {
  for (TuneMode m : {TuneMode::kBackbone, TuneMode::kBackbone2x, TuneMode::kMaoBaseOnly,
                     TuneMode::kMaoNewOnly, TuneMode::kMaoFull}) {
    if (s == mode_name(m)) return m;
  }
  fail(ErrorCode::kConfig,
       "unknown mode '" + std::string(s) +
           "' (expected backbone, backbone_2x, mao_base_only, mao_new_only or mao_full)");
}

void TuneConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (mode == TuneMode::kMaoFull && epochs % 2 != 0) {
    fail(ErrorCode::kConfig, "epochs must be even for mao_full (split evenly across phases)");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorCode::kConfig, "lr must be > 0");
  if (b < 1) fail(ErrorCode::kConfig, "b must be >= 1");
  if (topk < 1) fail(ErrorCode::kConfig, "topk must be >= 1");
  if (shots < 1) fail(ErrorCode::kConfig, "shots must be >= 1");
}

// ---------------------------------------------------------------------------

CandidateSet candidate_set(std::span<const ClassId> batch_classes) {
  if (batch_classes.empty()) fail(ErrorCode::kArgument, "candidate set of an empty batch");
  CandidateSet c;
  c.ids.assign(batch_classes.begin(), batch_classes.end());
  std::sort(c.ids.begin(), c.ids.end());
  c.ids.erase(std::unique(c.ids.begin(), c.ids.end()), c.ids.end());
  return c;
}

CandidateSet candidate_set(std::span<const LabeledImage> batch) {
  std::vector<ClassId> ids;
  ids.reserve(batch.size());
  for (const auto& p : batch) ids.push_back(p.label);
  return candidate_set(ids);
}

double supervised_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                       std::span<const LabeledImage> items, std::span<const ClassId> candidates,
                       bool accumulate_grad) {
  std::vector<Example> examples;
  examples.reserve(items.size());
  for (const auto& it : items) examples.push_back({ds.features(it.image), it.label});
  return backbone.cross_entropy(prompt, examples, candidates, accumulate_grad);
}

double base_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                 const HardNegBatch& batch, const CandidateSet& cset, bool accumulate_grad) {
  return supervised_loss(backbone, prompt, ds, batch.pairs, cset.ids, accumulate_grad);
}

std::vector<ClassId> new_phase_candidates(std::span<const ClassId> new_classes,
                                          std::span<const ClassId> base_classes, bool new_ar) {
  std::vector<ClassId> out(new_classes.begin(), new_classes.end());
  if (!new_ar) out.insert(out.end(), base_classes.begin(), base_classes.end());
  if (out.empty()) fail(ErrorCode::kArgument, "new-phase candidate set is empty");
  return candidate_set(out).ids;
}

double new_loss(const Backbone& backbone, Prompt& prompt, const Dataset& ds,
                std::span<const PseudoPair> pairs, std::span<const ClassId> new_classes,
                std::span<const ClassId> base_classes, bool new_ar, bool accumulate_grad) {
  if (pairs.empty()) fail(ErrorCode::kArgument, "new loss over no pseudo pairs");
  const auto candidates = new_phase_candidates(new_classes, base_classes, new_ar);
  std::vector<Example> examples;
  examples.reserve(pairs.size());
  for (const auto& p : pairs) examples.push_back({ds.features(p.image), p.label});
  return backbone.cross_entropy(prompt, examples, candidates, accumulate_grad);
}

void sgd_step(Prompt& prompt, double lr) {
  for (Param* p : prompt.params()) {
    if (!p->trainable) continue;
    if (!p->grad.all_finite()) {
      fail(ErrorCode::kNumerical, "non-finite gradient; training aborted");
    }
  }
  for (Param* p : prompt.params()) {
    if (!p->trainable) continue;
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    p->zero_grad();
  }
}

const char* phase_name(Phase p) noexcept { return p == Phase::kNew ? "new" : "base"; }

// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

class Trainer {
 public:
  Trainer(const TuneConfig& config, const Dataset& ds, const Backbone& backbone)
      : cfg_(config), ds_(ds), bb_(backbone), root_(config.seed) {
    cfg_.validate();
    if (!ds.has_split()) fail(ErrorCode::kState, "tuning needs a dataset with a base/new split");
    if (ds.base_classes().empty()) fail(ErrorCode::kDataset, "dataset has no base classes");
    base_ = ds.base_classes();
    new_ = ds.new_classes();

    Rng init_rng = root_.substream("prompt_init");
    state_.prompt = bb_.init_prompt(init_rng);
    Rng base_rng = root_.substream("base_shots");
    base_shots_ = sample_few_shot(ds, cfg_.shots, FewShotMode::kBasePairs, base_rng);
    Rng new_rng = root_.substream("new_shots");
    new_shots_ = sample_few_shot(ds, cfg_.shots, FewShotMode::kNewUnlabeled, new_rng);
    order_rng_ = root_.substream("epoch_order");
    draw_rng_ = root_.substream("hardneg_draw");

    const ShrinkResult s = auto_shrink(cfg_.b, cfg_.topk, base_.size());
    state_.b_eff = s.b;
    state_.k_eff = s.k;
    if (s.shrunk) state_.notes.push_back(s.message);
  }

  RunResult run() {
    TrackedBytes::reset_peak();
    const auto t0 = Clock::now();
    const std::size_t half = cfg_.epochs / 2;
    switch (cfg_.mode) {
      case TuneMode::kBackbone: backbone_epochs(cfg_.epochs); break;
      case TuneMode::kBackbone2x: backbone_epochs(2 * cfg_.epochs); break;
      case TuneMode::kMaoBaseOnly: base_epochs(half); break;
      case TuneMode::kMaoNewOnly: new_epochs(half); break;
      case TuneMode::kMaoFull:
        base_epochs(half);
        new_epochs(half);
        break;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

    RunResult r;
    r.cost.learnable_params = bb_.param_count();
    r.cost.seconds_per_epoch = state_.epoch == 0 ? 0.0 : secs / double(state_.epoch);
    r.cost.peak_tracked_bytes = TrackedBytes::peak();
    r.state = std::move(state_);
    return r;
  }

 private:
  void finish_epoch(Phase phase, double loss_sum, std::size_t steps) {
    ++state_.epoch;
    state_.phase = phase;
    state_.log.push_back({state_.epoch, phase, steps ? loss_sum / double(steps) : 0.0, cfg_.lr});
  }

  // Uniform shuffled batches over the base pairs, full base vocabulary.
  void backbone_epochs(std::size_t n) {
    const std::size_t batch = cfg_.b * cfg_.topk;
    std::vector<LabeledImage> pairs = base_shots_.pairs;
    for (std::size_t e = 0; e < n; ++e) {
      order_rng_.shuffle(pairs);
      double sum = 0.0;
      std::size_t steps = 0;
      for (std::size_t i = 0; i < pairs.size(); i += batch) {
        std::span<const LabeledImage> items(pairs.data() + i, std::min(batch, pairs.size() - i));
        sum += supervised_loss(bb_, state_.prompt, ds_, items, base_, true);
        sgd_step(state_.prompt, cfg_.lr);
        ++steps;
      }
      finish_epoch(Phase::kBase, sum, steps);
    }
  }

  // An epoch processes as many images as there are base pairs, like a
  // backbone epoch. Anchors are consumed without replacement from a shuffled
  // stream that is reshuffled whenever it runs out.
  void base_epochs(std::size_t n) {
    const SamplerIndex index = SamplerIndex::build(ds_);
    const ClassPools pools = pools_from_pairs(base_shots_.pairs, ds_.num_classes());
    std::vector<LabeledImage> anchors = base_shots_.pairs;
    const std::size_t b = state_.b_eff;
    const std::size_t batch = b * state_.k_eff;
    const std::size_t steps_per_epoch = (anchors.size() + batch - 1) / batch;
    std::size_t cursor = anchors.size();
    std::vector<LabeledImage> group;
    for (std::size_t e = 0; e < n; ++e) {
      double sum = 0.0;
      for (std::size_t step = 0; step < steps_per_epoch; ++step) {
        group.clear();
        while (group.size() < b) {
          if (cursor == anchors.size()) {
            order_rng_.shuffle(anchors);
            cursor = 0;
          }
          group.push_back(anchors[cursor++]);
        }
        const HardNegBatch hn = expand_batch(index, ds_, group, state_.k_eff, pools, draw_rng_);
        CandidateSet cset = candidate_set(hn.pairs);
        sum += base_loss(bb_, state_.prompt, ds_, hn, cset, true);
        sgd_step(state_.prompt, cfg_.lr);
        state_.base_csets.push_back(std::move(cset));
      }
      finish_epoch(Phase::kBase, sum, steps_per_epoch);
    }
    state_.prompt_at_base_end = state_.prompt.text.tokens.value;
  }

  void new_epochs(std::size_t n) {
    if (new_.empty()) {
      state_.notes.push_back("no new classes: new-class phase skipped");
      return;
    }
    state_.prompt_at_new_start = state_.prompt.text.tokens.value;
    const auto candidates = new_phase_candidates(new_, base_, cfg_.new_ar);
    const std::size_t batch = state_.b_eff * state_.k_eff;
    std::vector<PseudoPair> pairs;
    for (std::size_t e = 0; e < n; ++e) {
      if (e == 0 || cfg_.labeler == LabelerMode::kTuned) {
        pairs = build_pseudo_pairs(bb_, cfg_.labeler, state_.prompt, ds_, new_shots_, new_);
        state_.pseudo_pairs = pairs;
        state_.pseudo_acc = pseudo_accuracy(pairs, ds_);
      }
      order_rng_.shuffle(pairs);
      double sum = 0.0;
      std::size_t steps = 0;
      for (std::size_t i = 0; i < pairs.size(); i += batch) {
        std::span<const PseudoPair> items(pairs.data() + i, std::min(batch, pairs.size() - i));
        std::vector<Example> examples;
        examples.reserve(items.size());
        for (const auto& p : items) examples.push_back({ds_.features(p.image), p.label});
        sum += bb_.cross_entropy(state_.prompt, examples, candidates, true);
        sgd_step(state_.prompt, cfg_.lr);
        state_.new_cset_sizes.push_back(candidates.size());
        ++steps;
      }
      finish_epoch(Phase::kNew, sum, steps);
    }
  }

  TuneConfig cfg_;
  const Dataset& ds_;
  const Backbone& bb_;
  Rng root_;
  Rng order_rng_{0};
  Rng draw_rng_{0};
  std::vector<ClassId> base_;
  std::vector<ClassId> new_;
  FewShotSet base_shots_;
  FewShotSet new_shots_;
  RunState state_;
};

}  // namespace

RunResult run_two_step(const TuneConfig& config, const Dataset& ds, const Backbone& backbone) {
  Trainer t(config, ds, backbone);
  return t.run();
}

// ---------------------------------------------------------------------------

std::string metrics_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,phase,loss,lr\n";
  for (const EpochLog& e : log) {
    out += std::to_string(e.epoch) + "," + phase_name(e.phase) + "," +
           text::format_double(e.loss) + "," + text::format_double(e.lr) + "\n";
  }
  return out;
}

std::string tensor_text(const Tensor& t) {
  std::string out = "tensor " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + "\n";
  for (std::size_t r = 0; r < t.rows(); ++r) out += text::join_doubles(t.row(r)) + "\n";
  return out;
}

Tensor parse_tensor_text(const std::string& contents) {
  std::vector<std::string_view> lines = text::split(contents, '\n');
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) fail(ErrorCode::kFormat, "tensor file: empty");
  const auto head = text::split(text::trim(lines[0]), ' ');
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  if (head.size() != 3 || head[0] != "tensor" || !text::parse_u64(head[1], rows) ||
      !text::parse_u64(head[2], cols)) {
    fail(ErrorCode::kFormat, "tensor file: malformed header");
  }
  if (lines.size() != rows + 1) fail(ErrorCode::kFormat, "tensor file: row count mismatch");
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto fields = text::split(text::trim(lines[r + 1]), ',');
    if (fields.size() != cols) fail(ErrorCode::kFormat, "tensor file: row width mismatch");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!text::parse_double(fields[c], t.at(r, c))) {
        fail(ErrorCode::kFormat, "tensor file: bad number on row " + std::to_string(r + 1));
      }
    }
  }
  return t;
}

namespace {
std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

void save_prompt(const Prompt& prompt, const std::filesystem::path& dir) {
  text::write_file(dir / "final_prompt.tensor", tensor_text(prompt.text.tokens.value));
  if (prompt.visual) {
    const Tensor& v = prompt.visual->prefix.value;
    text::write_file(dir / "visual_prefix.tensor", tensor_text(Tensor({1, v.size()}, v.data())));
  }
}

Prompt load_prompt(const std::filesystem::path& dir, const Backbone& backbone) {
  const auto& cfg = backbone.config();
  Prompt p;
  Tensor tokens = parse_tensor_text(read_all(dir / "final_prompt.tensor"));
  if (tokens.rows() != cfg.context_length || tokens.cols() != cfg.d_token) {
    fail(ErrorCode::kShape, "final_prompt.tensor does not match the backbone's L x d_token");
  }
  p.text.tokens = Param(std::move(tokens), true);
  if (cfg.variant == BackboneVariant::kJointPrompt) {
    Tensor v = parse_tensor_text(read_all(dir / "visual_prefix.tensor"));
    if (v.size() != cfg.d_img) fail(ErrorCode::kShape, "visual_prefix.tensor has wrong width");
    p.visual = VisualPrompt{Param(Tensor({cfg.d_img}, v.data()), true)};
  }
  return p;
}

std::filesystem::path fresh_run_dir(const std::filesystem::path& base) {
  std::filesystem::path candidate = base;
  for (std::size_t n = 1; std::filesystem::exists(candidate); ++n) {
    candidate = base;
    candidate += "-" + std::to_string(n);
  }
  std::error_code ec;
  std::filesystem::create_directories(candidate, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create run directory " + candidate.string() + ": " + ec.message());
  return candidate;
}

}  // namespace mao
