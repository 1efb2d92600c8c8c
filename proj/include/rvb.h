#ifndef RVB_H
#define RVB_H

/* C interface to the RvB game engine.
 *
 * Every function returns an rvb_status. On failure the message of the most
 * recent error on the calling thread is available from rvb_last_error().
 * Strings returned through char** out-parameters are owned by the caller
 * and released with rvb_string_free(). */

#include <stdint.h>

#if defined(_WIN32)
#define RVB_API __declspec(dllexport)
#else
#define RVB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rvb_status {
  RVB_OK = 0,
  RVB_ERR_INPUT = 2,   /* bad config, scenario, archive or argument */
  RVB_ERR_RUNTIME = 3  /* failure while executing a game */
} rvb_status;

typedef struct rvb_config rvb_config;
typedef struct rvb_run rvb_run;

RVB_API const char* rvb_last_error(void);
/* Error category name, e.g. "ScenarioError"; empty when none. */
RVB_API const char* rvb_last_error_kind(void);
RVB_API void rvb_string_free(char* s);

RVB_API rvb_status rvb_config_load(const char* path, rvb_config** out);
RVB_API rvb_status rvb_config_set_seed(rvb_config* cfg, uint64_t seed);
RVB_API rvb_status rvb_config_set_max_epoch(rvb_config* cfg, int max_epoch);
RVB_API rvb_status rvb_config_set_count_delay(rvb_config* cfg, int count_delay);
/* Name used for the default run directory. */
RVB_API rvb_status rvb_config_name(const rvb_config* cfg, char** out);
RVB_API void rvb_config_free(rvb_config* cfg);

/* Runs the game and streams the archive into out_dir (NULL keeps it in
 * memory). A run that ends in ExecutionFailure still returns RVB_OK; check
 * rvb_run_stop_kind(). */
RVB_API rvb_status rvb_run_execute(const rvb_config* cfg, const char* out_dir, rvb_run** out);
RVB_API rvb_status rvb_run_load(const char* path, rvb_run** out);
RVB_API rvb_status rvb_run_save(const rvb_run* run, const char* out_dir);
RVB_API void rvb_run_free(rvb_run* run);

RVB_API rvb_status rvb_run_stop_kind(const rvb_run* run, char** out);
/* One line: "stop=<kind> epoch=<k> <final metrics>". */
RVB_API rvb_status rvb_run_summary(const rvb_run* run, char** out);

/* format: "tabular" or "records"; aat_scope: "total" or "inner" (NULL = total). */
RVB_API rvb_status rvb_run_metrics(const rvb_run* run, const char* format, const char* aat_scope, char** out);
/* prices_path may be NULL; when given, a cost estimate is appended. */
RVB_API rvb_status rvb_run_report(const rvb_run* run, const char* aat_scope, const char* prices_path,
                                  char** out);
/* Writes metrics.csv, metrics.jsonl, crde.csv and attempts.csv as applicable. */
RVB_API rvb_status rvb_run_export(const rvb_run* run, const char* out_dir, const char* aat_scope);

/* *pass is 1 when the archive reproduces; detail names the first divergence. */
RVB_API rvb_status rvb_replay(const char* path, int* pass, char** detail);
RVB_API rvb_status rvb_validate_scenario(const char* path, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* RVB_H */
