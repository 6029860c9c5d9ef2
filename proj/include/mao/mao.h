/* Copyright 2026 The MAO Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the MAO prompt-tuning engine. Every function returns a
 * mao_status; on failure mao_last_error() describes the problem for the
 * calling thread. Handles are opaque and owned by the caller.
 */
#ifndef MAO_MAO_H_
#define MAO_MAO_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MAO_BUILDING_LIBRARY)
#    define MAO_API __declspec(dllexport)
#  else
#    define MAO_API __declspec(dllimport)
#  endif
#else
#  define MAO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values are stable and double as CLI exit codes. */
typedef enum mao_status {
  MAO_OK = 0,
  MAO_ERR_INTERNAL = 1,
  MAO_ERR_USAGE = 2,
  MAO_ERR_CONFIG = 3,
  MAO_ERR_DEGENERATE_INPUT = 4,
  MAO_ERR_SHAPE = 5,
  MAO_ERR_VOCABULARY = 6,
  MAO_ERR_CANDIDATE_SET = 7,
  MAO_ERR_DATASET = 8,
  MAO_ERR_FORMAT = 9,
  MAO_ERR_CONSTRAINT = 10,
  MAO_ERR_STATE = 11,
  MAO_ERR_ARGUMENT = 12,
  MAO_ERR_INVARIANT = 13,
  MAO_ERR_NUMERICAL = 14,
  MAO_ERR_IO = 15,
  MAO_ERR_COMPATIBILITY = 16
} mao_status;

typedef struct mao_config mao_config;
typedef struct mao_dataset mao_dataset;
typedef struct mao_run mao_run;

MAO_API const char* mao_version(void);
MAO_API const char* mao_status_name(mao_status status);
/* Message of the last failed call on this thread; "" if none. */
MAO_API const char* mao_last_error(void);

/* ---- configuration ---- */

MAO_API size_t mao_config_key_count(void);
MAO_API const char* mao_config_key_name(size_t index);
MAO_API const char* mao_config_key_help(size_t index);

/* Defaults, then env_seed (may be NULL), then the file at path (may be
 * NULL), then the n override pairs. */
MAO_API mao_status mao_config_parse(const char* path, const char* const* keys,
                                    const char* const* values, size_t n,
                                    const char* env_seed, mao_config** out);
MAO_API mao_status mao_config_parse_text(const char* text, mao_config** out);
MAO_API void mao_config_free(mao_config* cfg);

/* String outputs: writes up to cap bytes including the terminator and sets
 * *len to the full length (without terminator). A NULL buf queries length. */
MAO_API mao_status mao_config_get(const mao_config* cfg, const char* key, char* buf,
                                  size_t cap, size_t* len);
MAO_API mao_status mao_config_snapshot(const mao_config* cfg, char* buf, size_t cap,
                                       size_t* len);

/* ---- datasets ---- */

typedef struct mao_dataset_info {
  size_t num_classes;
  size_t num_base;
  size_t num_new;
  size_t num_images;
  size_t d_img;
  size_t d_s;
} mao_dataset_info;

/* Generated from the config's spec keys, without a split. */
MAO_API mao_status mao_dataset_generate(const mao_config* cfg, mao_dataset** out);
MAO_API mao_status mao_dataset_load(const char* path, mao_dataset** out);
/* Loaded or generated per the config, with a base/new split applied. */
MAO_API mao_status mao_dataset_resolve(const mao_config* cfg, mao_dataset** out);
MAO_API mao_status mao_dataset_save(const mao_dataset* ds, const char* path);
MAO_API mao_status mao_dataset_get_info(const mao_dataset* ds, mao_dataset_info* out);
MAO_API void mao_dataset_free(mao_dataset* ds);

/* ---- tuning ---- */

typedef struct mao_metrics {
  double base_acc;
  double new_acc;
  double hm;
  size_t learnable_params;
  double seconds_per_epoch;
  size_t peak_tracked_bytes;
  double inference_items_per_second;
  double pseudo_accuracy; /* negative when no pseudo-labels were built */
  size_t b_effective;
  size_t topk_effective;
  size_t epochs_run;
} mao_metrics;

/* ds may be NULL, in which case the config's dataset is resolved. */
MAO_API mao_status mao_tune(const mao_config* cfg, const mao_dataset* ds, mao_run** out);
MAO_API mao_status mao_run_get_metrics(const mao_run* run, mao_metrics* out);
MAO_API size_t mao_run_note_count(const mao_run* run);
MAO_API const char* mao_run_note(const mao_run* run, size_t index);
/* Writes the run directory (config out_dir, suffixed if taken) and returns
 * its path. */
MAO_API mao_status mao_run_save(const mao_run* run, char* buf, size_t cap, size_t* len);
MAO_API void mao_run_free(mao_run* run);

/* ---- evaluation and diagnostics ---- */

typedef struct mao_summary {
  size_t rows;
  double base;
  double new_acc;
  double hm_of_avg;
  double avg_of_hm;
} mao_summary;

/* Re-evaluates saved run directories and writes report.csv / report.json to
 * out_dir. dataset may be NULL to use each run's own config. */
MAO_API mao_status mao_eval(const char* const* run_dirs, size_t n, const char* dataset,
                            const char* out_dir, int timing, mao_summary* out);

/* axis is "topk" or "shots". Writes the sweep CSV to out_path. */
MAO_API mao_status mao_ablate(const mao_config* cfg, const mao_dataset* ds, const char* axis,
                              const size_t* values, size_t n, const char* out_path, int timing);

typedef struct mao_diag_summary {
  double hard_density;
  double random_density;
  double hard_pca_spread;
  double random_pca_spread;
  double pseudo_accuracy; /* negative when there are no new classes */
  size_t b_effective;
  size_t topk_effective;
  int shrunk; /* nonzero if b and topk were auto-shrunk */
} mao_diag_summary;

/* Density statistics, PCA CSV/SVG and the pseudo-label CSV into out_dir. */
MAO_API mao_status mao_diag(const mao_config* cfg, const mao_dataset* ds, size_t batches,
                            const char* out_dir, mao_diag_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* MAO_MAO_H_ */
