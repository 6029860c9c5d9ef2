// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its C header only.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mao/mao.h"
#include "test_util.hpp"

namespace {

std::string config_value(const mao_config* cfg, const char* key) {
  size_t len = 0;
  REQUIRE(mao_config_get(cfg, key, nullptr, 0, &len) == MAO_OK);
  std::string out(len, '\0');
  REQUIRE(mao_config_get(cfg, key, out.data(), len + 1, &len) == MAO_OK);
  return out;
}

mao_config* parse_text(const std::string& text) {
  mao_config* cfg = nullptr;
  REQUIRE(mao_config_parse_text(text.c_str(), &cfg) == MAO_OK);
  return cfg;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::strlen(mao_version()) > 0);
  CHECK(std::string(mao_status_name(MAO_OK)) == "ok");
  CHECK(std::string(mao_status_name(MAO_ERR_DATASET)).size() > 0);
  CHECK(std::string(mao_status_name(static_cast<mao_status>(99))) != "ok");
}

TEST_CASE("config through the C API") {
  CHECK(mao_config_key_count() > 20);
  CHECK(std::string(mao_config_key_name(0)) == "dataset");
  CHECK(mao_config_key_name(100000) == nullptr);

  mao_config* cfg = nullptr;
  const char* keys[] = {"topk"};
  const char* values[] = {"2"};
  REQUIRE(mao_config_parse(nullptr, keys, values, 1, "11", &cfg) == MAO_OK);
  CHECK(config_value(cfg, "topk") == "2");
  CHECK(config_value(cfg, "seed") == "11");

  // Truncating buffer: still terminated, full length reported.
  char small[4];
  size_t len = 0;
  CHECK(mao_config_get(cfg, "mode", small, sizeof small, &len) == MAO_OK);
  CHECK(len == std::strlen("mao_full"));
  CHECK(std::string(small) == "mao");

  size_t snap_len = 0;
  REQUIRE(mao_config_snapshot(cfg, nullptr, 0, &snap_len) == MAO_OK);
  std::string snap(snap_len, '\0');
  REQUIRE(mao_config_snapshot(cfg, snap.data(), snap_len + 1, &snap_len) == MAO_OK);
  mao_config* again = parse_text(snap);
  CHECK(config_value(again, "topk") == "2");
  mao_config_free(again);

  CHECK(mao_config_get(cfg, "nope", nullptr, 0, &len) == MAO_ERR_CONFIG);
  CHECK(std::string(mao_last_error()).find("nope") != std::string::npos);
  mao_config_free(cfg);

  mao_config* bad = nullptr;
  CHECK(mao_config_parse_text("topk = -1\n", &bad) == MAO_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(mao_config_parse("/nonexistent/x.cfg", nullptr, nullptr, 0, nullptr, &bad) == MAO_ERR_IO);
  CHECK(mao_config_parse_text(nullptr, &bad) == MAO_ERR_ARGUMENT);
}

TEST_CASE("datasets through the C API") {
  test::TempDir dir;
  mao_config* cfg = parse_text("");
  mao_dataset* ds = nullptr;
  REQUIRE(mao_dataset_generate(cfg, &ds) == MAO_OK);
  mao_dataset_info info{};
  REQUIRE(mao_dataset_get_info(ds, &info) == MAO_OK);
  CHECK(info.num_classes == 32);
  CHECK(info.num_base == 0);
  CHECK(info.num_images == 32 * 64);

  const std::string path = (dir.path() / "d.mao").string();
  REQUIRE(mao_dataset_save(ds, path.c_str()) == MAO_OK);
  mao_dataset* loaded = nullptr;
  REQUIRE(mao_dataset_load(path.c_str(), &loaded) == MAO_OK);
  REQUIRE(mao_dataset_get_info(loaded, &info) == MAO_OK);
  CHECK(info.num_classes == 32);

  mao_dataset* resolved = nullptr;
  REQUIRE(mao_dataset_resolve(cfg, &resolved) == MAO_OK);
  REQUIRE(mao_dataset_get_info(resolved, &info) == MAO_OK);
  CHECK(info.num_base == 16);
  CHECK(info.num_new == 16);

  mao_dataset* missing = nullptr;
  CHECK(mao_dataset_load((dir.path() / "missing.mao").string().c_str(), &missing) == MAO_ERR_DATASET);
  CHECK(missing == nullptr);

  mao_dataset_free(resolved);
  mao_dataset_free(loaded);
  mao_dataset_free(ds);
  mao_config_free(cfg);
  mao_dataset_free(nullptr);
  mao_config_free(nullptr);
}

TEST_CASE("tune, save, eval") {
  test::TempDir dir;
  const std::string out = (dir.path() / "run").string();
  mao_config* cfg = parse_text("epochs = 4\nout_dir = " + out + "\n");
  mao_run* run = nullptr;
  REQUIRE(mao_tune(cfg, nullptr, &run) == MAO_OK);
  mao_metrics m{};
  REQUIRE(mao_run_get_metrics(run, &m) == MAO_OK);
  CHECK(m.epochs_run == 4);
  CHECK(m.learnable_params == 128);
  CHECK(m.b_effective == 2);
  CHECK(m.topk_effective == 8);
  CHECK(m.pseudo_accuracy >= 0.0);
  CHECK(m.hm > 0.0);
  REQUIRE(mao_run_note_count(run) == 1);
  CHECK(std::string(mao_run_note(run, 0)).rfind("auto-shrink:", 0) == 0);
  CHECK(mao_run_note(run, 1) == nullptr);

  char buf[512];
  size_t len = 0;
  REQUIRE(mao_run_save(run, buf, sizeof buf, &len) == MAO_OK);
  CHECK(std::string(buf) == out);
  REQUIRE(mao_run_save(run, buf, sizeof buf, &len) == MAO_OK);
  CHECK(std::string(buf) == out + "-1");
  for (const char* f : {"config.snapshot", "metrics.csv", "final_prompt.tensor", "cost.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(std::filesystem::path(out) / f), f);
  }

  const std::string second = out + "-1";
  const char* runs[] = {out.c_str(), second.c_str()};
  mao_summary s{};
  const std::string report = (dir.path() / "report").string();
  REQUIRE(mao_eval(runs, 2, nullptr, report.c_str(), 0, &s) == MAO_OK);
  CHECK(s.rows == 2);
  CHECK(s.base == doctest::Approx(m.base_acc));
  CHECK(s.new_acc == doctest::Approx(m.new_acc));
  CHECK(std::filesystem::exists(std::filesystem::path(report) / "report.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(report) / "report.json"));

  const char* nowhere[] = {"/nonexistent/run"};
  CHECK(mao_eval(nowhere, 1, nullptr, report.c_str(), 0, &s) != MAO_OK);
  CHECK(mao_eval(runs, 2, "/nonexistent/d.mao", report.c_str(), 0, &s) == MAO_ERR_DATASET);

  mao_run_free(run);
  mao_config_free(cfg);
}

TEST_CASE("ablate and diag") {
  test::TempDir dir;
  mao_config* cfg = parse_text("epochs = 2\n");
  const size_t values[] = {1, 2};
  const std::string csv = (dir.path() / "ab.csv").string();
  REQUIRE(mao_ablate(cfg, nullptr, "topk", values, 2, csv.c_str(), 0) == MAO_OK);
  CHECK(test::slurp(csv).rfind("topk,base,new,hm,b,topk\n1,", 0) == 0);
  CHECK(mao_ablate(cfg, nullptr, "lr", values, 2, csv.c_str(), 0) == MAO_ERR_CONFIG);

  mao_diag_summary d{};
  const std::string out = (dir.path() / "diag").string();
  REQUIRE(mao_diag(cfg, nullptr, 20, out.c_str(), &d) == MAO_OK);
  CHECK(d.hard_density > d.random_density);
  CHECK(d.pseudo_accuracy > 0.0);
  CHECK(d.shrunk != 0);
  CHECK(d.b_effective * d.topk_effective <= 16);
  mao_config_free(cfg);

  mao_config* tiny = parse_text("n_super = 5\nclasses_per_super = 2\n");
  REQUIRE(mao_diag(tiny, nullptr, 5, out.c_str(), &d) == MAO_OK);
  CHECK(d.b_effective == 2);
  CHECK(d.topk_effective == 2);
  mao_config_free(tiny);

  CHECK(mao_diag(nullptr, nullptr, 5, out.c_str(), &d) == MAO_ERR_ARGUMENT);
}
