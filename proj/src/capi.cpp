// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/mao.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mao/config.hpp"
#include "mao/errors.hpp"
#include "mao/evaluator.hpp"
#include "mao/hardneg_sampler.hpp"
#include "mao/pseudo_labeler.hpp"
#include "mao/text_io.hpp"
#include "mao/trainer.hpp"

struct mao_config {
  mao::RunConfig cfg;
};

struct mao_dataset {
  mao::Dataset ds;
};

struct mao_run {
  mao::RunConfig cfg;
  mao::RunResult result;
  mao::RunMetrics metrics;
};

namespace {

thread_local std::string g_last_error;

template <class F>
mao_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MAO_OK;
  } catch (const mao::Error& e) {
    g_last_error = e.what();
    return static_cast<mao_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return MAO_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (p == nullptr) mao::fail(mao::ErrorCode::kArgument, std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buf, std::size_t cap, std::size_t* len) {
  if (len != nullptr) *len = s.size();
  if (buf == nullptr || cap == 0) return;
  const std::size_t n = std::min(cap - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) mao::fail(mao::ErrorCode::kIo, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

mao::Dataset with_split(const mao::Dataset& ds) {
  return ds.has_split() ? ds : mao::split_base_new(ds);
}

mao::Backbone bound_backbone(const mao::RunConfig& cfg, const mao::Dataset& ds) {
  mao::Backbone bb(cfg.backbone);
  bb.bind(ds);
  return bb;
}

}  // namespace

extern "C" {

const char* mao_version(void) { return "1.0.0"; }

const char* mao_status_name(mao_status status) {
  if (status == MAO_OK) return "ok";
  if (status == MAO_ERR_INTERNAL) return "internal";
  return mao::error_code_name(static_cast<mao::ErrorCode>(status));
}

const char* mao_last_error(void) { return g_last_error.c_str(); }

size_t mao_config_key_count(void) { return mao::config_keys().size(); }

const char* mao_config_key_name(size_t index) {
  const auto& keys = mao::config_keys();
  return index < keys.size() ? keys[index].name.data() : nullptr;
}

const char* mao_config_key_help(size_t index) {
  const auto& keys = mao::config_keys();
  return index < keys.size() ? keys[index].help.data() : nullptr;
}

mao_status mao_config_parse(const char* path, const char* const* keys, const char* const* values,
                            size_t n, const char* env_seed, mao_config** out) {
  return guarded([&] {
    require(out, "out");
    std::vector<mao::Override> overrides;
    for (std::size_t i = 0; i < n; ++i) {
      require(keys[i], "override key");
      require(values[i], "override value");
      overrides.emplace_back(keys[i], values[i]);
    }
    std::optional<std::filesystem::path> p;
    if (path != nullptr) p = path;
    std::optional<std::string> env;
    if (env_seed != nullptr) env = env_seed;
    *out = new mao_config{mao::parse_config(p, overrides, env)};
  });
}

mao_status mao_config_parse_text(const char* text, mao_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new mao_config{mao::parse_config_text(text, "config text", {})};
  });
}

void mao_config_free(mao_config* cfg) { delete cfg; }

mao_status mao_config_get(const mao_config* cfg, const char* key, char* buf, size_t cap,
                          size_t* len) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    copy_out(mao::get_config_value(cfg->cfg, key), buf, cap, len);
  });
}

mao_status mao_config_snapshot(const mao_config* cfg, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    require(cfg, "config");
    copy_out(mao::config_snapshot(cfg->cfg), buf, cap, len);
  });
}

// ---------------------------------------------------------------------------

mao_status mao_dataset_generate(const mao_config* cfg, mao_dataset** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new mao_dataset{mao::generate(cfg->cfg.data)};
  });
}

mao_status mao_dataset_load(const char* path, mao_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mao_dataset{mao::load(path)};
  });
}

mao_status mao_dataset_resolve(const mao_config* cfg, mao_dataset** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new mao_dataset{mao::resolve_dataset(cfg->cfg)};
  });
}

mao_status mao_dataset_save(const mao_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds, "dataset");
    require(path, "path");
    mao::save(ds->ds, path);
  });
}

mao_status mao_dataset_get_info(const mao_dataset* ds, mao_dataset_info* out) {
  return guarded([&] {
    require(ds, "dataset");
    require(out, "out");
    out->num_classes = ds->ds.num_classes();
    out->num_base = ds->ds.base_classes().size();
    out->num_new = ds->ds.new_classes().size();
    out->num_images = ds->ds.num_images();
    out->d_img = ds->ds.d_img();
    out->d_s = ds->ds.d_s();
  });
}

void mao_dataset_free(mao_dataset* ds) { delete ds; }

// ---------------------------------------------------------------------------

mao_status mao_tune(const mao_config* cfg, const mao_dataset* ds, mao_run** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    const mao::Dataset data = ds != nullptr ? with_split(ds->ds) : mao::resolve_dataset(cfg->cfg);
    const mao::Backbone bb = bound_backbone(cfg->cfg, data);
    auto run = std::make_unique<mao_run>();
    run->cfg = cfg->cfg;
    run->result = mao::run_two_step(cfg->cfg.tune, data, bb);
    run->metrics = mao::base_to_new_eval(bb, run->result.state.prompt, data);
    run->metrics.mode = mao::mode_name(cfg->cfg.tune.mode);
    run->metrics.seed = cfg->cfg.tune.seed;
    run->result.cost.inference_items_per_second = run->metrics.cost.inference_items_per_second;
    run->metrics.cost = run->result.cost;
    *out = run.release();
  });
}

mao_status mao_run_get_metrics(const mao_run* run, mao_metrics* out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    const auto& m = run->metrics;
    const auto& s = run->result.state;
    out->base_acc = m.base_acc;
    out->new_acc = m.new_acc;
    out->hm = m.hm;
    out->learnable_params = m.cost.learnable_params;
    out->seconds_per_epoch = m.cost.seconds_per_epoch;
    out->peak_tracked_bytes = m.cost.peak_tracked_bytes;
    out->inference_items_per_second = m.cost.inference_items_per_second;
    out->pseudo_accuracy = s.pseudo_acc ? *s.pseudo_acc : -1.0;
    out->b_effective = s.b_eff;
    out->topk_effective = s.k_eff;
    out->epochs_run = s.epoch;
  });
}

size_t mao_run_note_count(const mao_run* run) {
  return run == nullptr ? 0 : run->result.state.notes.size();
}

const char* mao_run_note(const mao_run* run, size_t index) {
  if (run == nullptr || index >= run->result.state.notes.size()) return nullptr;
  return run->result.state.notes[index].c_str();
}

mao_status mao_run_save(const mao_run* run, char* buf, size_t cap, size_t* len) {
  return guarded([&] {
    require(run, "run");
    const auto dir = mao::fresh_run_dir(run->cfg.out_dir);
    mao::text::write_file(dir / "config.snapshot", mao::config_snapshot(run->cfg));
    mao::text::write_file(dir / "metrics.csv", mao::metrics_csv(run->result.state.log));
    mao::save_prompt(run->result.state.prompt, dir);
    mao::text::write_file(dir / "cost.json", mao::cost_json(run->result.cost));
    copy_out(dir.string(), buf, cap, len);
  });
}

void mao_run_free(mao_run* run) { delete run; }

// ---------------------------------------------------------------------------

mao_status mao_eval(const char* const* run_dirs, size_t n, const char* dataset,
                    const char* out_dir, int timing, mao_summary* out) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (n == 0) mao::fail(mao::ErrorCode::kArgument, "eval needs at least one run directory");
    std::vector<mao::RunMetrics> rows;
    for (std::size_t i = 0; i < n; ++i) {
      require(run_dirs[i], "run directory");
      const std::filesystem::path dir = run_dirs[i];
      std::vector<mao::Override> overrides;
      if (dataset != nullptr) overrides.emplace_back("dataset", dataset);
      const mao::RunConfig cfg = mao::parse_config_text(
          read_file(dir / "config.snapshot"), (dir / "config.snapshot").string(), overrides);
      const mao::Dataset data = mao::resolve_dataset(cfg);
      const mao::Backbone bb = bound_backbone(cfg, data);
      const mao::Prompt prompt = mao::load_prompt(dir, bb);
      mao::RunMetrics m = mao::base_to_new_eval(bb, prompt, data);
      m.mode = mao::mode_name(cfg.tune.mode);
      m.seed = cfg.tune.seed;
      nlohmann::json cost;
      try {
        cost = nlohmann::json::parse(read_file(dir / "cost.json"));
        m.cost.seconds_per_epoch = cost.at("seconds_per_epoch").get<double>();
        m.cost.peak_tracked_bytes = cost.at("peak_tracked_bytes").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        mao::fail(mao::ErrorCode::kFormat, (dir / "cost.json").string() + ": " + e.what());
      }
      rows.push_back(std::move(m));
    }
    mao::emit_report(rows, out_dir, timing != 0);
    if (out != nullptr) {
      const auto s = mao::summarize(rows);
      *out = {rows.size(), s.base, s.novel, s.hm_of_avg, s.avg_of_hm};
    }
  });
}

mao_status mao_ablate(const mao_config* cfg, const mao_dataset* ds, const char* axis,
                      const size_t* values, size_t n, const char* out_path, int timing) {
  return guarded([&] {
    require(cfg, "config");
    require(axis, "axis");
    require(out_path, "out_path");
    if (n > 0) require(values, "values");
    const mao::AblateAxis ax = mao::parse_axis(axis);
    const mao::Dataset data = ds != nullptr ? with_split(ds->ds) : mao::resolve_dataset(cfg->cfg);
    const mao::Backbone bb = bound_backbone(cfg->cfg, data);
    const std::vector<std::size_t> vals(values, values + n);
    const auto rows = mao::ablate_sweep(ax, vals, cfg->cfg.tune, data, bb);
    mao::text::write_file(out_path, mao::ablate_csv(ax, rows, timing != 0));
  });
}

mao_status mao_diag(const mao_config* cfg, const mao_dataset* ds, size_t batches,
                    const char* out_dir, mao_diag_summary* out) {
  return guarded([&] {
    require(cfg, "config");
    require(out_dir, "out_dir");
    const mao::Dataset data = ds != nullptr ? with_split(ds->ds) : mao::resolve_dataset(cfg->cfg);
    const auto& tune = cfg->cfg.tune;
    const mao::Rng root(tune.seed);
    mao::Rng shots_rng = root.substream("base_shots");
    const auto base = mao::sample_few_shot(data, tune.shots, mao::FewShotMode::kBasePairs, shots_rng);
    mao::Rng diag_rng = root.substream("diag");
    const auto cmp = mao::compare_density(data, base.pairs, tune.b, tune.topk, batches, diag_rng);

    const std::filesystem::path dir = out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) mao::fail(mao::ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

    std::string csv = "batch,hardneg,random\n";
    double hard = 0.0;
    double random = 0.0;
    for (std::size_t i = 0; i < cmp.hard.size(); ++i) {
      csv += std::to_string(i) + "," + mao::text::format_double(cmp.hard[i]) + "," +
             mao::text::format_double(cmp.random[i]) + "\n";
      hard += cmp.hard[i];
      random += cmp.random[i];
    }
    if (!cmp.hard.empty()) {
      hard /= double(cmp.hard.size());
      random /= double(cmp.random.size());
    }
    mao::text::write_file(dir / "density.csv", csv);

    const auto pca_hard = mao::pca_snapshot(cmp.first_hard, data);
    const auto pca_random = mao::pca_snapshot(cmp.first_random, data);
    mao::text::write_file(dir / "pca_hardneg.csv", mao::pca_csv(pca_hard));
    mao::text::write_file(dir / "pca_random.csv", mao::pca_csv(pca_random));
    mao::text::write_file(dir / "pca.svg", mao::pca_svg({{"hard-negative batch", pca_hard},
                                                         {"random batch", pca_random}}));

    double pacc = -1.0;
    const auto novel = data.new_classes();
    if (!novel.empty()) {
      const mao::Backbone bb = bound_backbone(cfg->cfg, data);
      mao::Rng new_rng = root.substream("new_shots");
      const auto unlabeled =
          mao::sample_few_shot(data, tune.shots, mao::FewShotMode::kNewUnlabeled, new_rng);
      const auto pairs = mao::build_pseudo_pairs(bb, mao::LabelerMode::kFoundation,
                                                 bb.hard_prompt(), data, unlabeled, novel);
      pacc = mao::pseudo_accuracy(pairs, data);
      mao::text::write_file(dir / "pseudo_labels.csv", mao::pseudo_csv(pairs, data));
    }

    nlohmann::ordered_json j;
    j["batches"] = batches;
    j["b"] = cmp.shrink.b;
    j["topk"] = cmp.shrink.k;
    j["hardneg_density"] = hard;
    j["random_density"] = random;
    j["hardneg_pca_spread"] = mao::mean_pairwise_distance(pca_hard);
    j["random_pca_spread"] = mao::mean_pairwise_distance(pca_random);
    j["pseudo_accuracy"] = pacc;
    if (cmp.shrink.shrunk) j["note"] = cmp.shrink.message;
    mao::text::write_file(dir / "diag.json", j.dump(2) + "\n");

    if (out != nullptr) {
      *out = {hard, random, mao::mean_pairwise_distance(pca_hard),
              mao::mean_pairwise_distance(pca_random), pacc, cmp.shrink.b, cmp.shrink.k,
              cmp.shrink.shrunk ? 1 : 0};
    }
  });
}

}  // extern "C"
