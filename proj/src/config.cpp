// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/config.hpp"

#include <cstdint>
#include <functional>
#include <fstream>

#include "mao/errors.hpp"
#include "mao/text_io.hpp"

namespace mao {

namespace {

struct KeyHandler {
  ConfigKey key;
  std::function<bool(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

bool set_size(std::size_t& dst, std::string_view v) {
  std::uint64_t x = 0;
  if (!text::parse_u64(v, x)) return false;
  dst = static_cast<std::size_t>(x);
  return true;
}

bool set_u64(std::uint64_t& dst, std::string_view v) { return text::parse_u64(v, dst); }

bool set_double(double& dst, std::string_view v) { return text::parse_double(v, dst); }

bool set_bool(bool& dst, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") {
    dst = true;
    return true;
  }
  if (v == "off" || v == "false" || v == "0") {
    dst = false;
    return true;
  }
  return false;
}

template <class Parse, class T>
bool set_enum(T& dst, std::string_view v, Parse parse) {
  try {
    dst = parse(v);
    return true;
  } catch (const Error&) {
    return false;
  }
}

#define MAO_SIZE_KEY(NAME, FIELD, HELP)                                             \
  KeyHandler {                                                                      \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { return set_size(c.FIELD, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                  \
  }
#define MAO_DOUBLE_KEY(NAME, FIELD, HELP)                                               \
  KeyHandler {                                                                          \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { return set_double(c.FIELD, v); }, \
        [](const RunConfig& c) { return text::format_double(c.FIELD); }                 \
  }
#define MAO_U64_KEY(NAME, FIELD, HELP)                                               \
  KeyHandler {                                                                       \
    {NAME, HELP}, [](RunConfig& c, std::string_view v) { return set_u64(c.FIELD, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                   \
  }

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = {
      KeyHandler{{"dataset", "dataset file; empty generates one from the spec keys"},
                 [](RunConfig& c, std::string_view v) {
                   c.dataset = std::string(v);
                   return true;
                 },
                 [](const RunConfig& c) { return c.dataset; }},
      MAO_SIZE_KEY("n_super", data.n_super, "superclass count"),
      MAO_SIZE_KEY("classes_per_super", data.classes_per_super, "classes per superclass"),
      KeyHandler{{"d_img", "image feature dimension (dataset and backbone)"},
                 [](RunConfig& c, std::string_view v) {
                   if (!set_size(c.data.d_img, v)) return false;
                   c.backbone.d_img = c.data.d_img;
                   return true;
                 },
                 [](const RunConfig& c) { return std::to_string(c.data.d_img); }},
      MAO_SIZE_KEY("d_s", data.d_s, "sampler-space dimension"),
      MAO_DOUBLE_KEY("sigma_img", data.sigma_img, "within-class image noise std"),
      MAO_DOUBLE_KEY("sigma_sem", data.sigma_sem, "sampler-space noise std"),
      MAO_SIZE_KEY("n_train_per_class", data.n_train_per_class, "training images per class"),
      MAO_SIZE_KEY("n_test_per_class", data.n_test_per_class, "test images per class"),
      MAO_U64_KEY("dataset_seed", data.seed, "dataset generation seed"),
      KeyHandler{{"variant", "backbone variant: text | joint"},
                 [](RunConfig& c, std::string_view v) {
                   return set_enum(c.backbone.variant, v, parse_variant);
                 },
                 [](const RunConfig& c) { return std::string(variant_name(c.backbone.variant)); }},
      MAO_SIZE_KEY("L", backbone.context_length, "prompt context length"),
      MAO_SIZE_KEY("d_token", backbone.d_token, "token embedding dimension"),
      MAO_SIZE_KEY("d", backbone.d, "joint embedding dimension"),
      MAO_DOUBLE_KEY("tau", backbone.tau, "softmax temperature"),
      MAO_U64_KEY("backbone_seed", backbone.seed, "frozen encoder seed"),
      MAO_SIZE_KEY("epochs", tune.epochs, "total tuning epochs"),
      MAO_DOUBLE_KEY("lr", tune.lr, "SGD learning rate"),
      MAO_SIZE_KEY("b", tune.b, "anchors per hard-negative batch"),
      MAO_SIZE_KEY("topk", tune.topk, "hard negatives per anchor"),
      MAO_SIZE_KEY("shots", tune.shots, "few-shot images per class"),
      MAO_U64_KEY("seed", tune.seed, "tuning seed (MAO_SEED sets it at lowest priority)"),
      KeyHandler{{"mode", "backbone | backbone_2x | mao_base_only | mao_new_only | mao_full"},
                 [](RunConfig& c, std::string_view v) { return set_enum(c.tune.mode, v, parse_mode); },
                 [](const RunConfig& c) { return std::string(mode_name(c.tune.mode)); }},
      KeyHandler{{"new_ar", "new-phase candidates: on = new classes, off = base and new"},
                 [](RunConfig& c, std::string_view v) { return set_bool(c.tune.new_ar, v); },
                 [](const RunConfig& c) { return std::string(c.tune.new_ar ? "on" : "off"); }},
      KeyHandler{{"labeler", "pseudo-labeler: foundation | tuned"},
                 [](RunConfig& c, std::string_view v) {
                   return set_enum(c.tune.labeler, v, parse_labeler);
                 },
                 [](const RunConfig& c) { return std::string(labeler_name(c.tune.labeler)); }},
      KeyHandler{{"out_dir", "run directory (a -N suffix is added if it exists)"},
                 [](RunConfig& c, std::string_view v) {
                   c.out_dir = std::string(v);
                   return true;
                 },
                 [](const RunConfig& c) { return c.out_dir; }},
  };
  return table;
}

#undef MAO_SIZE_KEY
#undef MAO_DOUBLE_KEY
#undef MAO_U64_KEY

const KeyHandler* find_handler(std::string_view key) {
  for (const KeyHandler& h : handlers()) {
    if (h.key.name == key) return &h;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  data.validate();
  backbone.validate();
  tune.validate();
  if (backbone.d_img != data.d_img) fail(ErrorCode::kConfig, "backbone d_img differs from dataset d_img");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const KeyHandler& h : handlers()) out.push_back(h.key);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value,
                      std::string_view where) {
  const KeyHandler* h = find_handler(key);
  if (h == nullptr) {
    fail(ErrorCode::kConfig, std::string(where) + ": unknown key '" + std::string(key) + "'");
  }
  if (!h->set(cfg, value)) {
    fail(ErrorCode::kConfig, std::string(where) + ": key '" + std::string(key) +
                                 "': invalid value '" + std::string(value) + "'");
  }
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  const KeyHandler* h = find_handler(key);
  if (h == nullptr) fail(ErrorCode::kConfig, "unknown key '" + std::string(key) + "'");
  return h->get(cfg);
}

RunConfig parse_config_text(std::string_view text_in, std::string_view source,
                            const std::vector<Override>& overrides,
                            std::optional<std::string> env_seed) {
  RunConfig cfg;
  if (env_seed && !env_seed->empty()) set_config_value(cfg, "seed", *env_seed, "MAO_SEED");

  const auto lines = text::split(text_in, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(source) + " line " + std::to_string(i + 1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kConfig, where + ": expected 'key = value'");
    }
    set_config_value(cfg, text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)), where);
  }
  for (const auto& [key, value] : overrides) {
    set_config_value(cfg, key, value, "override --" + key);
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<Override>& overrides,
                       std::optional<std::string> env_seed) {
  std::string contents;
  std::string source = "defaults";
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) fail(ErrorCode::kIo, "cannot read config file " + path->string());
    contents.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    source = path->string();
  }
  return parse_config_text(contents, source, overrides, std::move(env_seed));
}

std::string config_snapshot(const RunConfig& cfg) {
  std::string out;
  for (const KeyHandler& h : handlers()) {
    out += std::string(h.key.name) + " = " + h.get(cfg) + "\n";
  }
  return out;
}

Dataset resolve_dataset(const RunConfig& cfg) {
  Dataset ds = cfg.dataset.empty() ? generate(cfg.data) : load(cfg.dataset);
  return ds.has_split() ? ds : split_base_new(ds);
}

}  // namespace mao
