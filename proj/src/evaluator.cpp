// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

namespace {
using Clock = std::chrono::steady_clock;

double round2(double v) { return std::nearbyint(v * 100.0) / 100.0; }
}  // namespace

double accuracy(const Backbone& backbone, const Prompt& prompt, const Dataset& ds,
                std::span<const LabeledImage> test, std::span<const ClassId> candidates,
                double* items_per_second) {
  if (candidates.empty()) fail(ErrorCode::kArgument, "accuracy needs candidates");
  if (test.empty()) fail(ErrorCode::kArgument, "accuracy over an empty test split");
  const auto t0 = Clock::now();
  const TextHead head = backbone.text_head(prompt, candidates);
  const VisualPrompt* visual = prompt.visual ? &*prompt.visual : nullptr;
  std::size_t hit = 0;
  for (const LabeledImage& item : test) {
    const auto p = backbone.predict_proba(head, ds.features(item.image), visual);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.size(); ++j) {
      if (p[j] > p[best] || (p[j] == p[best] && candidates[j] < candidates[best])) best = j;
    }
    hit += candidates[best] == item.label ? 1 : 0;
  }
  if (items_per_second != nullptr) {
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    *items_per_second = secs > 0.0 ? double(test.size()) / secs : 0.0;
  }
  return 100.0 * double(hit) / double(test.size());
}

double harmonic_mean(double base, double novel) {
  if (!(base >= 0.0) || !(novel >= 0.0)) {
    fail(ErrorCode::kArgument, "harmonic mean needs non-negative accuracies");
  }
  if (base == 0.0 && novel == 0.0) {
    fail(ErrorCode::kArgument, "harmonic mean of two zeros is undefined");
  }
  return 2.0 * base * novel / (base + novel);
}

RunMetrics base_to_new_eval(const Backbone& backbone, const Prompt& prompt, const Dataset& ds) {
  if (!ds.has_split()) fail(ErrorCode::kState, "base-to-new evaluation needs a split");
  const auto base = ds.base_classes();
  const auto novel = ds.new_classes();
  RunMetrics m;
  double ips_base = 0.0;
  double ips_new = 0.0;
  m.base_acc = accuracy(backbone, prompt, ds, ds.test_images(base), base, &ips_base);
  if (!novel.empty()) {
    m.new_acc = accuracy(backbone, prompt, ds, ds.test_images(novel), novel, &ips_new);
  }
  const double hm_in = m.base_acc + m.new_acc;
  m.hm = hm_in > 0.0 ? harmonic_mean(m.base_acc, m.new_acc) : 0.0;
  m.cost.learnable_params = backbone.param_count();
  m.cost.inference_items_per_second = novel.empty() ? ips_base : 0.5 * (ips_base + ips_new);
  return m;
}

std::vector<double> cross_dataset_eval(const Backbone& backbone, const Prompt& prompt,
                                       std::span<const Dataset> targets) {
  std::vector<double> out;
  for (const Dataset& target : targets) {
    if (target.d_img() != backbone.config().d_img) {
      fail(ErrorCode::kCompatibility,
           "target dataset has d_img " + std::to_string(target.d_img()) +
               ", source backbone expects " + std::to_string(backbone.config().d_img));
    }
    Backbone bound = backbone;
    bound.bind(target);
    const auto classes = target.all_classes();
    out.push_back(accuracy(bound, prompt, target, target.test_images(classes), classes));
  }
  return out;
}

// ---------------------------------------------------------------------------

AblateAxis parse_axis(std::string_view s) {
  if (s == "topk") return AblateAxis::kTopK;
  if (s == "shots") return AblateAxis::kShots;
  fail(ErrorCode::kConfig, "unknown ablation axis '" + std::string(s) + "' (expected topk or shots)");
}

const char* axis_name(AblateAxis a) noexcept { return a == AblateAxis::kShots ? "shots" : "topk"; }

std::vector<AblateRow> ablate_sweep(AblateAxis axis, std::span<const std::size_t> values,
                                    const TuneConfig& config, const Dataset& ds,
                                    const Backbone& backbone) {
  if (values.empty()) fail(ErrorCode::kArgument, "ablation sweep needs at least one value");
  std::vector<AblateRow> rows;
  for (std::size_t v : values) {
    TuneConfig cfg = config;
    (axis == AblateAxis::kTopK ? cfg.topk : cfg.shots) = v;
    const auto t0 = Clock::now();
    RunResult run = run_two_step(cfg, ds, backbone);
    const RunMetrics m = base_to_new_eval(backbone, run.state.prompt, ds);
    AblateRow row;
    row.value = v;
    row.base_acc = m.base_acc;
    row.new_acc = m.new_acc;
    row.hm = m.hm;
    row.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    row.b_eff = run.state.b_eff;
    row.k_eff = run.state.k_eff;
    row.notes = run.state.notes;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablate_csv(AblateAxis axis, const std::vector<AblateRow>& rows, bool timing) {
  std::string out = std::string(axis_name(axis)) + ",base,new,hm,b,topk";
  out += timing ? ",wall_seconds\n" : "\n";
  for (const AblateRow& r : rows) {
    out += std::to_string(r.value) + "," + text::format_percent(r.base_acc) + "," +
           text::format_percent(r.new_acc) + "," + text::format_percent(r.hm) + "," +
           std::to_string(r.b_eff) + "," + std::to_string(r.k_eff);
    if (timing) out += "," + text::format_double(r.wall_seconds);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

ReportSummary summarize(const std::vector<RunMetrics>& rows) {
  if (rows.empty()) fail(ErrorCode::kArgument, "report needs at least one row");
  ReportSummary s;
  for (const RunMetrics& r : rows) {
    s.base += r.base_acc;
    s.novel += r.new_acc;
    s.avg_of_hm += r.hm;
  }
  const double n = double(rows.size());
  s.base /= n;
  s.novel /= n;
  s.avg_of_hm /= n;
  s.hm_of_avg = s.base + s.novel > 0.0 ? harmonic_mean(s.base, s.novel) : 0.0;
  return s;
}

std::string report_csv(const std::vector<RunMetrics>& rows, bool timing) {
  std::string out = "mode,seed,base,new,hm,params,sec_per_epoch,peak_bytes\n";
  for (const RunMetrics& r : rows) {
    out += r.mode + "," + std::to_string(r.seed) + "," + text::format_percent(r.base_acc) + "," +
           text::format_percent(r.new_acc) + "," + text::format_percent(r.hm) + "," +
           std::to_string(r.cost.learnable_params) + "," +
           (timing ? text::format_double(r.cost.seconds_per_epoch) : std::string("NA")) + "," +
           std::to_string(r.cost.peak_tracked_bytes) + "\n";
  }
  if (rows.size() > 1) {
    const ReportSummary s = summarize(rows);
    double sec = 0.0;
    double peak = 0.0;
    for (const RunMetrics& r : rows) {
      sec += r.cost.seconds_per_epoch;
      peak += double(r.cost.peak_tracked_bytes);
    }
    const double n = double(rows.size());
    out += "mean,all," + text::format_percent(s.base) + "," + text::format_percent(s.novel) + "," +
           text::format_percent(s.hm_of_avg) + "," + std::to_string(rows[0].cost.learnable_params) +
           "," + (timing ? text::format_double(sec / n) : std::string("NA")) + "," +
           std::to_string(static_cast<std::size_t>(std::llround(peak / n))) + "\n";
  }
  return out;
}

std::string report_json(const std::vector<RunMetrics>& rows, bool timing) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["columns"] = {"mode", "seed", "base", "new", "hm", "params", "sec_per_epoch", "peak_bytes"};
  ordered_json arr = ordered_json::array();
  for (const RunMetrics& r : rows) {
    ordered_json row;
    row["mode"] = r.mode;
    row["seed"] = r.seed;
    row["base"] = round2(r.base_acc);
    row["new"] = round2(r.new_acc);
    row["hm"] = round2(r.hm);
    row["params"] = r.cost.learnable_params;
    row["sec_per_epoch"] = timing ? ordered_json(r.cost.seconds_per_epoch) : ordered_json(nullptr);
    row["peak_bytes"] = r.cost.peak_tracked_bytes;
    arr.push_back(row);
  }
  j["rows"] = arr;
  const ReportSummary s = summarize(rows);
  j["mean"] = {{"base", round2(s.base)},
               {"new", round2(s.novel)},
               {"hm_of_avg", round2(s.hm_of_avg)},
               {"avg_of_hm", round2(s.avg_of_hm)}};
  return j.dump(2) + "\n";
}

void emit_report(const std::vector<RunMetrics>& rows, const std::filesystem::path& dir,
                 bool timing) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  text::write_file(dir / "report.csv", report_csv(rows, timing));
  text::write_file(dir / "report.json", report_json(rows, timing));
}

std::vector<RunMetrics> parse_report_csv(const std::string& contents) {
  const auto lines = text::split(contents, '\n');
  if (lines.empty() || text::trim(lines[0]) != "mode,seed,base,new,hm,params,sec_per_epoch,peak_bytes") {
    fail(ErrorCode::kFormat, "report.csv: unexpected header");
  }
  std::vector<RunMetrics> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    if (line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() != 8) fail(ErrorCode::kFormat, "report.csv line " + std::to_string(i + 1) + ": 8 fields expected");
    if (f[0] == "mean") continue;
    RunMetrics m;
    m.mode = std::string(f[0]);
    std::uint64_t params = 0;
    std::uint64_t peak = 0;
    bool ok = text::parse_u64(f[1], m.seed) && text::parse_double(f[2], m.base_acc) &&
              text::parse_double(f[3], m.new_acc) && text::parse_double(f[4], m.hm) &&
              text::parse_u64(f[5], params) && text::parse_u64(f[7], peak);
    if (ok && f[6] != "NA") ok = text::parse_double(f[6], m.cost.seconds_per_epoch);
    if (!ok) fail(ErrorCode::kFormat, "report.csv line " + std::to_string(i + 1) + ": bad field");
    m.cost.learnable_params = params;
    m.cost.peak_tracked_bytes = peak;
    rows.push_back(std::move(m));
  }
  return rows;
}

std::string cost_json(const CostMeter& cost) {
  nlohmann::ordered_json j;
  j["learnable_params"] = cost.learnable_params;
  j["seconds_per_epoch"] = cost.seconds_per_epoch;
  j["peak_tracked_bytes"] = cost.peak_tracked_bytes;
  j["inference_items_per_second"] = cost.inference_items_per_second;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {
std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}
}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::kArgument, "spearman needs two equal-length series");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = double(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mao
