// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the engine only through the C API.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mao/mao.h"

namespace {

struct ExitCode {
  mao_status status;
  const char* meaning;
};

constexpr ExitCode kExitCodes[] = {
    {MAO_OK, "success"},
    {MAO_ERR_INTERNAL, "internal error"},
    {MAO_ERR_USAGE, "bad command line or unknown subcommand"},
    {MAO_ERR_CONFIG, "unknown config key, bad value or violated config invariant"},
    {MAO_ERR_DEGENERATE_INPUT, "zero-norm vector or other degenerate input"},
    {MAO_ERR_SHAPE, "tensor dimension mismatch"},
    {MAO_ERR_VOCABULARY, "class id outside the vocabulary"},
    {MAO_ERR_CANDIDATE_SET, "empty or duplicated candidate set"},
    {MAO_ERR_DATASET, "missing or unusable dataset"},
    {MAO_ERR_FORMAT, "malformed dataset, tensor or report file"},
    {MAO_ERR_CONSTRAINT, "b*topk exceeds the number of base classes"},
    {MAO_ERR_STATE, "operation needs state that is not there (e.g. no split)"},
    {MAO_ERR_ARGUMENT, "invalid argument"},
    {MAO_ERR_INVARIANT, "internal invariant violated"},
    {MAO_ERR_NUMERICAL, "non-finite loss or gradient"},
    {MAO_ERR_IO, "file system error"},
    {MAO_ERR_COMPATIBILITY, "dataset incompatible with the backbone"},
};

std::string exit_code_help() {
  std::ostringstream out;
  out << "\nExit codes:\n";
  for (const auto& e : kExitCodes) {
    out << "  " << static_cast<int>(e.status) << (e.status < 10 ? "   " : "  ")
        << mao_status_name(e.status) << ": " << e.meaning << "\n";
  }
  out << "\nMAO_SEED, if set, is the lowest-priority source of the `seed` key.\n";
  return out.str();
}

int report(mao_status status) {
  if (status != MAO_OK) {
    std::cerr << "error (" << mao_status_name(status) << "): " << mao_last_error() << "\n";
  }
  return static_cast<int>(status);
}

struct Deleter {
  void operator()(mao_config* p) const { mao_config_free(p); }
  void operator()(mao_dataset* p) const { mao_dataset_free(p); }
  void operator()(mao_run* p) const { mao_run_free(p); }
};
template <class T>
using Handle = std::unique_ptr<T, Deleter>;

// `--config FILE` plus one `--<key> VALUE` flag per config key.
class ConfigOptions {
 public:
  void attach(CLI::App* sub) {
    sub->add_option("--config", path_, "Config file of `key = value` lines")
        ->check(CLI::ExistingFile);
    const std::size_t n = mao_config_key_count();
    for (std::size_t i = 0; i < n; ++i) {
      const std::string key = mao_config_key_name(i);
      sub->add_option("--" + key, values_[key], mao_config_key_help(i))->group("Config keys");
    }
    sub_ = sub;
  }

  mao_status parse(Handle<mao_config>& out) const {
    std::vector<const char*> keys;
    std::vector<const char*> vals;
    for (const auto& [key, value] : values_) {
      if (sub_->count("--" + key) == 0) continue;
      keys.push_back(key.c_str());
      vals.push_back(value.c_str());
    }
    const char* env_seed = std::getenv("MAO_SEED");
    mao_config* cfg = nullptr;
    const mao_status s = mao_config_parse(path_.empty() ? nullptr : path_.c_str(), keys.data(),
                                          vals.data(), keys.size(), env_seed, &cfg);
    out.reset(cfg);
    return s;
  }

 private:
  CLI::App* sub_ = nullptr;
  std::string path_;
  std::map<std::string, std::string> values_;
};

std::string config_value(const mao_config* cfg, const char* key) {
  std::size_t len = 0;
  if (mao_config_get(cfg, key, nullptr, 0, &len) != MAO_OK) return {};
  std::string out(len + 1, '\0');
  mao_config_get(cfg, key, out.data(), out.size(), &len);
  out.resize(len);
  return out;
}

void print_notes(const mao_run* run) {
  for (std::size_t i = 0; i < mao_run_note_count(run); ++i) {
    std::cerr << "note: " << mao_run_note(run, i) << "\n";
  }
}

int cmd_gen(const ConfigOptions& opts, const std::string& output) {
  Handle<mao_config> cfg;
  if (auto s = opts.parse(cfg); s != MAO_OK) return report(s);
  std::string path = output;
  if (path.empty()) path = config_value(cfg.get(), "dataset");
  if (path.empty()) path = "dataset.mao";
  mao_dataset* raw = nullptr;
  if (auto s = mao_dataset_generate(cfg.get(), &raw); s != MAO_OK) return report(s);
  Handle<mao_dataset> ds(raw);
  if (auto s = mao_dataset_save(ds.get(), path.c_str()); s != MAO_OK) return report(s);
  mao_dataset_info info{};
  mao_dataset_get_info(ds.get(), &info);
  std::cout << "wrote " << path << " (" << info.num_classes << " classes, " << info.num_images
            << " images)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MAO prompt tuning over toy frozen dual encoders", "mao"};
  app.set_version_flag("--version", std::string(mao_version()));
  app.require_subcommand(1);
  app.footer(exit_code_help());

  ConfigOptions gen_opts;
  ConfigOptions tune_opts;
  ConfigOptions ablate_opts;
  ConfigOptions diag_opts;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset file");
  gen_opts.attach(gen);
  std::string gen_output;
  gen->add_option("-o,--output", gen_output,
                  "Dataset file to write (default: the `dataset` key, else dataset.mao)");

  auto* tune = app.add_subcommand("tune", "Tune a prompt and write a run directory");
  tune_opts.attach(tune);

  auto* eval = app.add_subcommand("eval", "Re-evaluate run directories into report.csv/json");
  std::vector<std::string> run_dirs;
  std::string eval_dataset;
  std::string eval_out = "report";
  bool eval_timing = false;
  eval->add_option("runs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--dataset", eval_dataset, "Evaluate on this dataset file instead");
  eval->add_option("-o,--output", eval_out, "Report directory")->capture_default_str();
  eval->add_flag("--timing", eval_timing, "Include wall-clock columns");

  auto* ablate = app.add_subcommand("ablate", "Sweep topk or shots and write a CSV");
  ablate_opts.attach(ablate);
  std::string axis;
  std::vector<std::size_t> values;
  std::string ablate_out;
  bool ablate_timing = false;
  ablate->add_option("--axis", axis, "topk or shots")
      ->required()
      ->check(CLI::IsMember({"topk", "shots"}));
  ablate->add_option("--values", values, "Comma-separated sweep values")
      ->required()
      ->delimiter(',');
  ablate->add_option("-o,--output", ablate_out, "CSV path (default: ablate_<axis>.csv)");
  ablate->add_flag("--timing", ablate_timing, "Include a wall_seconds column");

  auto* diag = app.add_subcommand("diag", "Density, PCA and pseudo-label diagnostics");
  diag_opts.attach(diag);
  std::size_t batches = 100;
  std::string diag_out = "diag";
  diag->add_option("--batches", batches, "Batches per kind")->capture_default_str();
  diag->add_option("-o,--output", diag_out, "Output directory")->capture_default_str();

  if (argc > 1 && argv[1][0] != '-') {
    const std::string name = argv[1];
    if (name != "gen" && name != "tune" && name != "eval" && name != "ablate" && name != "diag") {
      std::cerr << "unknown subcommand '" << name << "'\n\n" << app.help();
      return static_cast<int>(MAO_ERR_USAGE);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << "\n" << app.help();
    return static_cast<int>(MAO_ERR_USAGE);
  }

  if (gen->parsed()) return cmd_gen(gen_opts, gen_output);

  if (tune->parsed()) {
    Handle<mao_config> cfg;
    if (auto s = tune_opts.parse(cfg); s != MAO_OK) return report(s);
    mao_run* raw = nullptr;
    if (auto s = mao_tune(cfg.get(), nullptr, &raw); s != MAO_OK) return report(s);
    Handle<mao_run> run(raw);
    print_notes(run.get());
    std::string dir(4096, '\0');
    std::size_t len = 0;
    if (auto s = mao_run_save(run.get(), dir.data(), dir.size(), &len); s != MAO_OK) {
      return report(s);
    }
    dir.resize(std::min(len, dir.size() - 1));
    mao_metrics m{};
    mao_run_get_metrics(run.get(), &m);
    std::printf("run %s\nbase %.2f new %.2f hm %.2f params %zu\n", dir.c_str(), m.base_acc,
                m.new_acc, m.hm, m.learnable_params);
    return 0;
  }

  if (eval->parsed()) {
    std::vector<const char*> dirs;
    for (const auto& d : run_dirs) dirs.push_back(d.c_str());
    mao_summary sum{};
    const mao_status s =
        mao_eval(dirs.data(), dirs.size(), eval_dataset.empty() ? nullptr : eval_dataset.c_str(),
                 eval_out.c_str(), eval_timing ? 1 : 0, &sum);
    if (s != MAO_OK) return report(s);
    std::printf("report %s (%zu runs)\nbase %.2f new %.2f hm_of_avg %.2f avg_of_hm %.2f\n",
                eval_out.c_str(), sum.rows, sum.base, sum.new_acc, sum.hm_of_avg, sum.avg_of_hm);
    return 0;
  }

  if (ablate->parsed()) {
    Handle<mao_config> cfg;
    if (auto s = ablate_opts.parse(cfg); s != MAO_OK) return report(s);
    const std::string out = ablate_out.empty() ? "ablate_" + axis + ".csv" : ablate_out;
    const mao_status s = mao_ablate(cfg.get(), nullptr, axis.c_str(), values.data(),
                                    values.size(), out.c_str(), ablate_timing ? 1 : 0);
    if (s != MAO_OK) return report(s);
    std::printf("wrote %s\n", out.c_str());
    return 0;
  }

  if (diag->parsed()) {
    Handle<mao_config> cfg;
    if (auto s = diag_opts.parse(cfg); s != MAO_OK) return report(s);
    mao_diag_summary sum{};
    const mao_status s = mao_diag(cfg.get(), nullptr, batches, diag_out.c_str(), &sum);
    if (s != MAO_OK) return report(s);
    std::printf("density hardneg %.4f random %.4f\npca spread hardneg %.4f random %.4f\n",
                sum.hard_density, sum.random_density, sum.hard_pca_spread,
                sum.random_pca_spread);
    if (sum.shrunk) {
      std::fprintf(stderr, "note: auto-shrink applied; using b = %zu, topK = %zu\n",
                   sum.b_effective, sum.topk_effective);
    }
    if (sum.pseudo_accuracy >= 0.0) std::printf("pseudo accuracy %.4f\n", sum.pseudo_accuracy);
    return 0;
  }
  return static_cast<int>(MAO_ERR_USAGE);
}
