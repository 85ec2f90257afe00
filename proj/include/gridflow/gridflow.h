#ifndef GRIDFLOW_GRIDFLOW_H
#define GRIDFLOW_GRIDFLOW_H

/* C interface of libgridflow. Every call returns a gf_status; on failure the
 * message is available from gf_last_error() on the calling thread. Strings
 * returned through char** are heap allocated and released with gf_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define GF_API __attribute__((visibility("default")))
#else
#define GF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gf_status {
  GF_OK = 0,
  GF_DIMENSION_MISMATCH,
  GF_MISSING_OBSERVABLE,
  GF_INVALID_VALUE,
  GF_UNKNOWN_UNIT,
  GF_PARSE_ERROR,
  GF_DUPLICATE_RESOURCE,
  GF_INVALID_DESCRIPTOR,
  GF_UNKNOWN_RESOURCE,
  GF_RESOURCE_WITHDRAWN,
  GF_UNKNOWN_JOB,
  GF_UNBOUND_PLACEHOLDER,
  GF_MISSING_INPUT,
  GF_STORAGE_FULL,
  GF_UNKNOWN_KEY,
  GF_INTEGRITY_ERROR,
  GF_UNKNOWN_RUN,
  GF_UNKNOWN_CHECKPOINT,
  GF_STRUCTURAL_ERROR,
  GF_SYNTAX_ERROR,
  GF_UNSOUND_WORKFLOW,
  GF_NOT_SERIES_PARALLEL,
  GF_NO_RESOURCE,
  GF_LICENSE_VIOLATION,
  GF_ACTIVITY_FAILED,
  GF_ITERATION_LIMIT,
  GF_GUARD_EVALUATION_ERROR,
  GF_NOTHING_TO_RESUME,
  GF_BAD_PARAMS,
  GF_NO_FREE_SITES,
  GF_IO_ERROR,
  GF_INTERNAL
} gf_status;

/* Kind of failure a status reports, for exit-code style dispatch. */
typedef enum gf_status_class {
  GF_CLASS_OK = 0,
  GF_CLASS_USER = 1,    /* bad input: syntax, unsound workflow, license, unknown ids */
  GF_CLASS_RUNTIME = 2, /* a run or a stored object failed */
  GF_CLASS_INTERNAL = 3
} gf_status_class;

typedef struct gf_context gf_context;
typedef struct gf_workflow gf_workflow;

GF_API const char* gf_status_name(gf_status status);
GF_API gf_status_class gf_status_classify(gf_status status);
GF_API const char* gf_last_error(void);
GF_API void gf_free(void* p);

/* Store directory holding runs, blobs and the resource registry. The
 * simulated grid's resources are always registered. */
GF_API gf_status gf_context_open(const char* store_dir, gf_context** out);
GF_API void gf_context_close(gf_context* ctx);

/* Registers and persists a resource descriptor given as XML text. */
GF_API gf_status gf_register_resource(gf_context* ctx, const char* xml, char** out_id);
/* One resource id per line, in registration order. */
GF_API gf_status gf_list_resources(gf_context* ctx, char** out);

GF_API gf_status gf_workflow_parse(const char* dsl_text, gf_workflow** out);
GF_API gf_status gf_workflow_case_study(gf_workflow** out);
GF_API void gf_workflow_free(gf_workflow* wf);

/* Writes "sound" or one finding per line (a JSON object when as_json). */
GF_API gf_status gf_workflow_verify(const gf_workflow* wf, int as_json, int* out_sound, char** out);
/* format: "xml", "plan", "dot" or "dsl". */
GF_API gf_status gf_workflow_export(const gf_workflow* wf, const char* format, char** out);

typedef struct gf_submit_options {
  const char* user;            /* "ID:academic" or "ID:commercial"; NULL for the default */
  const char* const* params;   /* "key=value" or "activity.key=value" */
  size_t n_params;
  const char* const* faults;   /* "ACTIVITY:N" */
  size_t n_faults;
  uint64_t seed;
  int max_iterations;          /* 0 for the default */
} gf_submit_options;

/* Binds and executes. *out_run_id is set whenever a run was created, also
 * when the run itself failed (the status then reports that failure). */
GF_API gf_status gf_submit(gf_context* ctx, const gf_workflow* wf, const gf_submit_options* options, char** out_run_id);
GF_API gf_status gf_resume(gf_context* ctx, const char* run_id);
GF_API gf_status gf_rollback(gf_context* ctx, const char* run_id, const char* activity);

/* Run report; deterministic redacts timestamps. */
GF_API gf_status gf_report(gf_context* ctx, const char* run_id, int as_json, int deterministic, char** out);
/* Stored keys of a run, checkpoints marked. */
GF_API gf_status gf_store_ls(gf_context* ctx, const char* run_id, int as_json, char** out);
/* Ids of all runs, one per line. */
GF_API gf_status gf_list_runs(gf_context* ctx, char** out);

/* Runs a mock application standalone. input is a canonical dataset text or
 * NULL; the result is the native text, or the adapted canonical dataset
 * when canonical is nonzero. */
GF_API gf_status gf_mock(const char* name, const char* input, const char* const* params, size_t n_params, int canonical,
                  char** out);
/* Mock names, one per line. */
GF_API gf_status gf_mock_names(char** out);

#ifdef __cplusplus
}
#endif

#endif
