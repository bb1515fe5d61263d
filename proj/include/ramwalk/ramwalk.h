/* ramwalk: object-permanence tracking with random walks over a learned
 * spatial memory. C interface over the C++ core.
 *
 * Every function returning rw_status leaves a human-readable message in
 * rw_last_error() (per thread) when the status is not RW_OK. Handles are
 * opaque and owned by the caller; destroy functions accept NULL. */
#ifndef RAMWALK_RAMWALK_H
#define RAMWALK_RAMWALK_H

#include <stddef.h>
#include <stdint.h>

#if defined(RAMWALK_BUILDING_LIBRARY)
#define RW_API __attribute__((visibility("default")))
#else
#define RW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rw_status {
  RW_OK = 0,
  RW_ERR_INVALID_ARGUMENT = 1, /* null pointer, bad flag value */
  RW_ERR_CONFIG = 2,           /* malformed or out-of-range configuration */
  RW_ERR_IO = 3,               /* file cannot be read or written */
  RW_ERR_FORMAT = 4,           /* corrupt, truncated or wrong-version file */
  RW_ERR_INCOMPATIBLE = 5,     /* checkpoint and dataset disagree on shapes */
  RW_ERR_INFEASIBLE = 6,       /* scenario cannot be generated */
  RW_ERR_DIVERGED = 7,         /* training produced a non-finite loss */
  RW_ERR_INTERNAL = 99
} rw_status;

typedef enum rw_log_level { RW_LOG_ERROR = 0, RW_LOG_INFO = 1, RW_LOG_DEBUG = 2 } rw_log_level;

typedef void (*rw_log_fn)(rw_log_level level, const char* message, void* user);

typedef struct rw_config rw_config;
typedef struct rw_dataset rw_dataset;
typedef struct rw_model rw_model;
typedef struct rw_report rw_report;

RW_API const char* rw_version(void);
RW_API const char* rw_last_error(void);
RW_API const char* rw_status_name(rw_status status);

/* Configuration: key/value text with [section] headers. Sections used:
 * generate, model, train, track, viz. */
RW_API rw_status rw_config_create(rw_config** out);
RW_API rw_status rw_config_parse(const char* text, rw_config** out);
RW_API rw_status rw_config_load(const char* path, rw_config** out);
RW_API rw_status rw_config_set(rw_config* config, const char* section, const char* key, const char* value);
/* Canonical text; the returned pointer stays valid until the next call on this handle. */
RW_API const char* rw_config_dump(rw_config* config);
RW_API void rw_config_destroy(rw_config* config);

/* Datasets. Sequence i of a generated dataset uses seed base_seed + i. */
RW_API rw_status rw_dataset_generate(const rw_config* config, uint64_t base_seed, size_t count, int workers,
                                     rw_dataset** out);
RW_API rw_status rw_dataset_load(const char* path, rw_dataset** out);
RW_API rw_status rw_dataset_save(const rw_dataset* dataset, const char* path);
RW_API rw_status rw_dataset_size(const rw_dataset* dataset, size_t* out);
/* Labeled (object, frame) counts per visibility state: visible, occluded, contained, carried. */
RW_API rw_status rw_dataset_state_counts(const rw_dataset* dataset, uint64_t counts[4]);
RW_API void rw_dataset_destroy(rw_dataset* dataset);

/* Models. Training reads the [model] and [train] sections; the grid size is
 * taken from the dataset. */
RW_API rw_status rw_model_train(const rw_config* config, const rw_dataset* dataset, uint64_t seed, int workers,
                                rw_log_fn log, void* user, rw_model** out);
RW_API rw_status rw_model_load(const char* path, rw_model** out);
RW_API rw_status rw_model_save(const rw_model* model, const char* path);
RW_API void rw_model_destroy(rw_model* model);

/* Tracks every sequence with the [track] settings and writes one track file
 * per sequence (seq_NNNNN.tracks) into out_dir. */
RW_API rw_status rw_track_dataset(const rw_model* model, const rw_dataset* dataset, const rw_config* config,
                                  int workers, const char* out_dir);

/* Scores the track files in tracks_dir against the dataset. */
RW_API rw_status rw_evaluate(const char* tracks_dir, const rw_dataset* dataset, rw_report** out);
RW_API rw_status rw_report_recovery(const rw_report* report, size_t* episodes, size_t* recovered);
/* Per-state frame count, mean IoU and accuracy at IoU >= 0.1; state in 0..3. */
RW_API rw_status rw_report_state(const rw_report* report, int state, size_t* frames, double* mean_iou,
                                 double* accuracy);
RW_API rw_status rw_report_id_switches(const rw_report* report, size_t* out);
/* Writes report.txt (aggregate table) and report.jsonl (one line per sequence). */
RW_API rw_status rw_report_save(const rw_report* report, const char* out_dir);
RW_API void rw_report_destroy(rw_report* report);

/* Renders seq_NNNNN_fMMM.ppm for every frame with the walker belief overlay
 * and boxes, using the [track] and [viz] sections. */
RW_API rw_status rw_viz(const rw_model* model, const rw_dataset* dataset, const rw_config* config, int workers,
                        const char* out_dir);

/* Whole commands. Each writes its outputs plus one manifest.txt into out_dir
 * (created if missing). Flags given here override config keys. */
typedef struct rw_run_options {
  const char* config_path; /* recorded in the manifest; may be NULL */
  const char* out_dir;
  const char* dataset_path;
  const char* checkpoint_path;
  const char* tracks_dir;
  uint64_t seed;
  int has_seed;
  int64_t count; /* generate only; negative means take it from the config */
  int workers;   /* <= 0 means take it from the config */
  rw_log_fn log;
  void* user;
} rw_run_options;

RW_API void rw_run_options_init(rw_run_options* options);
RW_API rw_status rw_run_generate(const rw_config* config, const rw_run_options* options);
RW_API rw_status rw_run_train(const rw_config* config, const rw_run_options* options);
RW_API rw_status rw_run_track(const rw_config* config, const rw_run_options* options);
RW_API rw_status rw_run_eval(const rw_config* config, const rw_run_options* options);
RW_API rw_status rw_run_viz(const rw_config* config, const rw_run_options* options);

#ifdef __cplusplus
}
#endif

#endif /* RAMWALK_RAMWALK_H */
