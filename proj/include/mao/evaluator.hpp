// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mao/backbone.hpp"
#include "mao/dataset.hpp"
#include "mao/trainer.hpp"

namespace mao {

// Percentage of `test` whose argmax over `candidates` is the true label.
// If `items_per_second` is given it receives the measured throughput.
double accuracy(const Backbone& backbone, const Prompt& prompt, const Dataset& ds,
                std::span<const LabeledImage> test, std::span<const ClassId> candidates,
                double* items_per_second = nullptr);

// 2ab / (a + b). Both zero is undefined.
double harmonic_mean(double base, double novel);

struct RunMetrics {
  std::string mode;
  std::uint64_t seed = 0;
  double base_acc = 0.0;
  double new_acc = 0.0;
  double hm = 0.0;
  CostMeter cost;
};

// Base accuracy over C_b, new accuracy over C_n, and their harmonic mean.
RunMetrics base_to_new_eval(const Backbone& backbone, const Prompt& prompt, const Dataset& ds);

// Accuracy on every target over all of its classes, with the backbone's token
// table rebuilt from each target's class names. Targets must share d_img.
std::vector<double> cross_dataset_eval(const Backbone& backbone, const Prompt& prompt,
                                       std::span<const Dataset> targets);

enum class AblateAxis { kTopK, kShots };
AblateAxis parse_axis(std::string_view s);
const char* axis_name(AblateAxis a) noexcept;

struct AblateRow {
  std::size_t value = 0;
  double base_acc = 0.0;
  double new_acc = 0.0;
  double hm = 0.0;
  double wall_seconds = 0.0;
  std::size_t b_eff = 0;
  std::size_t k_eff = 0;
  std::vector<std::string> notes;
};

// One full run per value with everything else fixed.
std::vector<AblateRow> ablate_sweep(AblateAxis axis, std::span<const std::size_t> values,
                                    const TuneConfig& config, const Dataset& ds,
                                    const Backbone& backbone);

// value,base,new,hm,b,topk[,wall_seconds]
std::string ablate_csv(AblateAxis axis, const std::vector<AblateRow>& rows, bool timing);

struct ReportSummary {
  double base = 0.0;
  double novel = 0.0;
  double hm_of_avg = 0.0;
  double avg_of_hm = 0.0;
};
ReportSummary summarize(const std::vector<RunMetrics>& rows);

// report.csv and report.json. Wall-clock columns are written only when
// `timing` is set, so reports of identical runs are byte-identical.
std::string report_csv(const std::vector<RunMetrics>& rows, bool timing);
std::string report_json(const std::vector<RunMetrics>& rows, bool timing);
void emit_report(const std::vector<RunMetrics>& rows, const std::filesystem::path& dir,
                 bool timing);

// Per-run rows of a report.csv (the mean row is skipped).
std::vector<RunMetrics> parse_report_csv(const std::string& contents);

std::string cost_json(const CostMeter& cost);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mao
