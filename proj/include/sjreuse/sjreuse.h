#ifndef SJREUSE_H
#define SJREUSE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(SJR_BUILDING_LIBRARY)
#define SJR_API __attribute__((visibility("default")))
#else
#define SJR_API
#endif

/* Status codes. Every call that can fail returns one; the message of the
   last failure on the calling thread is kept for sjr_last_error_message. */
typedef enum sjr_status {
  SJR_OK = 0,
  SJR_INVALID_ARGUMENT = 1,
  SJR_IO = 2,
  SJR_PARSE = 3,
  SJR_DEGENERATE_INPUT = 4,
  SJR_EMPTY_HISTOGRAM = 5,
  SJR_DOMAIN_MISMATCH = 6,
  SJR_OUT_OF_DOMAIN = 7,
  SJR_EMPTY_SAMPLE = 8,
  SJR_FORMAT = 9,
  SJR_SHAPE_MISMATCH = 10,
  SJR_NON_FINITE_LOSS = 11,
  SJR_DUPLICATE_ID = 12,
  SJR_NOT_FOUND = 13,
  SJR_EMPTY_REPOSITORY = 14,
  SJR_CAPACITY = 15,
  SJR_LOCKED = 16,
  SJR_INTERNAL = 17
} sjr_status;

typedef struct sjr_engine sjr_engine;
typedef struct sjr_partitioner sjr_partitioner;

SJR_API const char* sjr_status_string(int status);
SJR_API const char* sjr_last_error_message(void);
/* Releases strings returned through char** out parameters. */
SJR_API void sjr_free_string(char* s);
/* 0 debug, 1 info, 2 warning, 3 error, 4 off. */
SJR_API int sjr_set_log_level(int level);

/* config_path may be NULL for defaults. */
SJR_API int sjr_engine_open(const char* config_path, sjr_engine** out);
/* Overrides one config key, same syntax as the config file. */
SJR_API int sjr_engine_set(sjr_engine* e, const char* key, const char* value);
SJR_API void sjr_engine_close(sjr_engine* e);
/* Effective configuration as key = value text. */
SJR_API int sjr_engine_config(sjr_engine* e, char** out_text);

/* Results come back as JSON text in *out_json. */
SJR_API int sjr_ingest(sjr_engine* e, const char* id, const char* csv_path, char** out_json);
/* spec_json: {"kind":"uniform|gaussian|enlarge","id":..,"n":..,"region":[..],
   "center":[x,y],"sigma":..,"source":..,"resolution":..,"seed":..} */
SJR_API int sjr_generate(sjr_engine* e, const char* spec_json, char** out_json);
/* datasets: comma-separated ids or NULL for every ingested dataset.
   joins: "left:right,..." or NULL for a seeded cycle over the datasets. */
SJR_API int sjr_offline(sjr_engine* e, const char* datasets, const char* joins, char** out_json);
/* theta < 0 uses the configured theta. pairs_csv may be NULL. */
SJR_API int sjr_join(sjr_engine* e, const char* left, const char* right, double theta,
                     int force_repartition, const char* pairs_csv, char** out_json);
SJR_API int sjr_bench(sjr_engine* e, const char* joins, double theta, const char* out_dir,
                      char** out_json);
SJR_API int sjr_retrain(sjr_engine* e, char** out_json);
/* best_match plus decision only; *out_json holds sim_max, matched id and
   latencies. */
SJR_API int sjr_lookup(sjr_engine* e, const char* left, const char* right, char** out_json);

SJR_API int sjr_partitioner_load(const char* path, sjr_partitioner** out);
SJR_API int sjr_partitioner_route(const sjr_partitioner* p, double x, double y, uint32_t* block);
SJR_API size_t sjr_partitioner_block_count(const sjr_partitioner* p);
SJR_API void sjr_partitioner_free(sjr_partitioner* p);

/* Jensen-Shannon divergence (log base 2) of two dense count vectors. */
SJR_API int sjr_jsd(const double* p, const double* q, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
