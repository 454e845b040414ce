#pragma once

#include <stddef.h>

#if defined(DIAGRAM_BUILDING_LIBRARY)
#define DIAGRAM_API __attribute__((visibility("default")))
#else
#define DIAGRAM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum diagram_status {
  DIAGRAM_OK = 0,
  DIAGRAM_ERR_INVALID_ARGUMENT = 1,
  DIAGRAM_ERR_IO = 2,
  DIAGRAM_ERR_PARSE = 3,
  DIAGRAM_ERR_SHAPE = 4,
  DIAGRAM_ERR_NUMERIC = 5,
  DIAGRAM_ERR_MISMATCH = 6,
  DIAGRAM_ERR_STATE = 7,
  DIAGRAM_ERR_INTERNAL = 99
} diagram_status;

typedef enum diagram_channel { DIAGRAM_CHANNEL_Z = 0, DIAGRAM_CHANNEL_O = 1, DIAGRAM_CHANNEL_I = 2 } diagram_channel;

typedef struct diagram_config diagram_config;
typedef struct diagram_dataset diagram_dataset;
typedef struct diagram_embeddings diagram_embeddings;
typedef struct diagram_report diagram_report;

// Called once per finished epoch. `phase` is "node" or "edge".
typedef void (*diagram_progress_fn)(const char* phase, size_t epoch, double mean_loss, double seconds, void* user);

DIAGRAM_API const char* diagram_version(void);
// Message for the most recent failed call on this thread ("" if none).
DIAGRAM_API const char* diagram_last_error(void);
DIAGRAM_API const char* diagram_status_name(diagram_status status);
// Frees strings returned through char** out-parameters.
DIAGRAM_API void diagram_string_free(char* s);

// Configuration: defaults, then an optional key-value file, then overrides.
DIAGRAM_API diagram_status diagram_config_create(diagram_config** out);
DIAGRAM_API void diagram_config_destroy(diagram_config* cfg);
DIAGRAM_API diagram_status diagram_config_load_file(diagram_config* cfg, const char* path);
DIAGRAM_API diagram_status diagram_config_set(diagram_config* cfg, const char* key, const char* value);
DIAGRAM_API diagram_status diagram_config_get(const diagram_config* cfg, const char* key, char** value);
DIAGRAM_API diagram_status diagram_config_to_json(const diagram_config* cfg, char** json);
DIAGRAM_API diagram_status diagram_config_to_text(const diagram_config* cfg, char** text);
DIAGRAM_API diagram_status diagram_config_validate(const diagram_config* cfg);

// Datasets resolved from the configuration (dataset / content / cites / features).
DIAGRAM_API diagram_status diagram_dataset_load(const diagram_config* cfg, diagram_dataset** out);
DIAGRAM_API void diagram_dataset_destroy(diagram_dataset* ds);
DIAGRAM_API diagram_status diagram_dataset_counts(const diagram_dataset* ds, size_t* nodes, size_t* edges,
                                                  size_t* features, size_t* labels);
DIAGRAM_API diagram_status diagram_dataset_summary_json(const diagram_dataset* ds, char** json);
DIAGRAM_API diagram_status diagram_dataset_summary_text(const diagram_dataset* ds, char** text);
// Writes edges.tsv, features.tsv and labels.tsv.
DIAGRAM_API diagram_status diagram_dataset_export(const diagram_dataset* ds, const char* dir);

// Trains per the configuration and writes artifacts under its `out`
// directory. `summary_json` (optional) lists the files written.
DIAGRAM_API diagram_status diagram_train(const diagram_config* cfg, diagram_progress_fn progress, void* user,
                                         char** summary_json);

DIAGRAM_API diagram_status diagram_embeddings_load(const char* path, diagram_embeddings** out);
DIAGRAM_API void diagram_embeddings_destroy(diagram_embeddings* emb);
// binary != 0 writes the binary format.
DIAGRAM_API diagram_status diagram_embeddings_save(const diagram_embeddings* emb, const char* path, int binary);
DIAGRAM_API diagram_status diagram_embeddings_shape(const diagram_embeddings* emb, size_t* nodes, size_t* dim);
DIAGRAM_API diagram_status diagram_embeddings_row(const diagram_embeddings* emb, diagram_channel channel, size_t row,
                                                  double* values, size_t capacity);
// Header fields: "mode", "config", "dataset", or "id:<row>".
DIAGRAM_API diagram_status diagram_embeddings_meta(const diagram_embeddings* emb, const char* field, char** value);

// kind: "reconstruct", "linkpred" or "classify".
DIAGRAM_API diagram_status diagram_eval(const diagram_config* cfg, const char* kind, const diagram_embeddings* emb,
                                        diagram_report** out);
DIAGRAM_API void diagram_report_destroy(diagram_report* report);
DIAGRAM_API diagram_status diagram_report_json(const diagram_report* report, char** json);
DIAGRAM_API diagram_status diagram_report_csv(const diagram_report* report, char** csv);
// Writes <kind>.json, <kind>.csv (and <kind>_plot.csv for linkpred) into dir.
DIAGRAM_API diagram_status diagram_report_write(const diagram_report* report, const char* dir);

#ifdef __cplusplus
}
#endif
