// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mao/backbone.hpp"
#include "mao/dataset.hpp"
#include "mao/trainer.hpp"

namespace mao {

// Everything one experiment needs, flattened to `key = value` lines.
struct RunConfig {
  std::string dataset;  // dataset file; empty means generate from the spec keys
  DatasetSpec data;
  BackboneConfig backbone;
  TuneConfig tune;
  std::string out_dir = "runs/run";

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

// Every accepted key, in snapshot order.
const std::vector<ConfigKey>& config_keys();

using Override = std::pair<std::string, std::string>;

// Layers, lowest priority first: defaults, `env_seed` (MAO_SEED), the file
// text, then `overrides`. `source` names the text in error messages.
RunConfig parse_config_text(std::string_view text, std::string_view source,
                            const std::vector<Override>& overrides,
                            std::optional<std::string> env_seed = std::nullopt);

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<Override>& overrides,
                       std::optional<std::string> env_seed = std::nullopt);

// Sets one key; throws kConfig naming `where` on unknown key or bad value.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value,
                      std::string_view where);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

// All keys, one per line; parses back to an equal RunConfig.
std::string config_snapshot(const RunConfig& cfg);

// The dataset the config describes: loaded from `dataset` or generated, then
// given a base/new split if it has none.
Dataset resolve_dataset(const RunConfig& cfg);

}  // namespace mao
