/*
 * lsenet - patch-attention vessel segmentation network, C API.
 *
 * Every object is an opaque handle created and destroyed through this
 * interface. Functions return LSEN_OK on success; on failure they return a
 * code from lsen_status and leave a human-readable message retrievable with
 * lsen_last_error() (thread-local).
 */
#ifndef LSENET_H
#define LSENET_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LSEN_API __declspec(dllexport)
#else
#define LSEN_API __attribute__((visibility("default")))
#endif

typedef enum lsen_status {
  LSEN_OK = 0,
  LSEN_ERR_ARGUMENT = 2, /* invalid configuration, paths, shapes, usage */
  LSEN_ERR_NUMERIC = 3,  /* non-finite values during optimization */
  LSEN_ERR_IO = 4,       /* unreadable or malformed files */
  LSEN_ERR_INTERNAL = 5
} lsen_status;

typedef struct lsen_config lsen_config;   /* merged run configuration */
typedef struct lsen_model lsen_model;     /* built network with weights */
typedef struct lsen_dataset lsen_dataset; /* list of image/mask pairs */

LSEN_API const char* lsen_version(void);
LSEN_API const char* lsen_last_error(void);

/* Worker threads for all tensor math (0 = hardware default). */
LSEN_API void lsen_set_threads(int n);

/* ---- configuration ---- */

LSEN_API lsen_config* lsen_config_create(void);
LSEN_API void lsen_config_destroy(lsen_config* cfg);
/* Applies a key=value file with [section] headers. */
LSEN_API lsen_status lsen_config_load_file(lsen_config* cfg, const char* path);
/* Sets one dotted key, e.g. "model.layers", "train.lr0", "run.seed". */
LSEN_API lsen_status lsen_config_set(lsen_config* cfg, const char* key, const char* value);
/* Validates and freezes the configuration; call before building/training. */
LSEN_API lsen_status lsen_config_finalize(lsen_config* cfg);
/* Canonical text of the effective configuration (provenance echo). */
LSEN_API lsen_status lsen_config_echo(const lsen_config* cfg, char* buf, size_t len);

/* ---- model ---- */

LSEN_API lsen_status lsen_model_build(const lsen_config* cfg, lsen_model** out);
LSEN_API lsen_status lsen_model_load(const char* checkpoint_path, lsen_model** out);
LSEN_API void lsen_model_destroy(lsen_model* model);
LSEN_API lsen_status lsen_model_save(const lsen_model* model, const char* checkpoint_path);

LSEN_API int64_t lsen_model_param_count(const lsen_model* model);
/* FLOPs at the given input resolution (one MAC counted as two FLOPs). */
LSEN_API lsen_status lsen_model_flops(const lsen_model* model, int h, int w, int64_t* out);
/* Multi-line text: per-module parameter counts, totals, FLOP breakdown. */
LSEN_API lsen_status lsen_model_summary(const lsen_model* model, int h, int w, char* buf,
                                        size_t len);

/* ---- data ---- */

/* Loads root/<split>/images/ and masks/ PNG pairs. */
LSEN_API lsen_status lsen_dataset_load(const char* root, const char* split, lsen_dataset** out);
/* Generates `count` synthetic samples from cfg's [synth] section; the
 * per-sample stream is offset by `index_base` so splits stay disjoint. */
LSEN_API lsen_status lsen_dataset_synth(const lsen_config* cfg, int count, int index_base,
                                        lsen_dataset** out);
LSEN_API lsen_status lsen_dataset_save(const lsen_dataset* data, const char* root,
                                       const char* split);
LSEN_API int lsen_dataset_size(const lsen_dataset* data);
LSEN_API void lsen_dataset_destroy(lsen_dataset* data);

/* ---- toolchain ---- */

/* Trains per cfg's [train] section; writes best.ckpt, last.ckpt and
 * history.csv into out_dir. resume_path may be NULL. */
LSEN_API lsen_status lsen_train(const lsen_config* cfg, lsen_model* model,
                                const lsen_dataset* train_set, const lsen_dataset* val_set,
                                const char* out_dir, const char* resume_path);

/* Per-sample six-metric CSV rows plus the aggregate row. csv_path may be
 * NULL (no file); the aggregate row is always copied into `aggregate`. */
LSEN_API lsen_status lsen_evaluate(const lsen_model* model, const lsen_dataset* data,
                                   const char* dataset_name, const char* csv_path,
                                   char* aggregate, size_t aggregate_len);

/* Probability map and binary mask PNGs for one input image; when
 * heatmap_prefix is non-NULL, per-layer attention maps are written as
 * <prefix>_layer<i>.png. */
LSEN_API lsen_status lsen_predict(const lsen_model* model, const char* image_png,
                                  const char* prob_png, const char* mask_png,
                                  const char* heatmap_prefix);

/* End-to-end gradient verification on a reduced double-precision build
 * (2 layers, 8 channels, patch size 2, 16x16 input); writes the maximum
 * relative error. */
LSEN_API lsen_status lsen_grad_check(uint64_t seed, double* max_rel_error);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LSENET_H */
