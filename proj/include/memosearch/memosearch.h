#ifndef MEMOSEARCH_MEMOSEARCH_H
#define MEMOSEARCH_MEMOSEARCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define MS_API __attribute__((visibility("default")))
#else
#define MS_API
#endif

/* Status codes double as process exit codes. */
typedef enum ms_status {
  MS_OK = 0,
  MS_ERR_OTHER = 1,
  MS_ERR_CONFIG = 2,
  MS_ERR_EXAM = 3,
  MS_ERR_CORRUPT = 4
} ms_status;

/* Holds the text output and error message of the last call. Not thread safe;
 * use one context per thread. */
typedef struct ms_context ms_context;

MS_API ms_context* ms_context_new(void);
MS_API void ms_context_free(ms_context* ctx);

/* Valid until the next call on the same context. Never NULL. */
MS_API const char* ms_last_error(const ms_context* ctx);
MS_API const char* ms_last_output(const ms_context* ctx);

MS_API const char* ms_version(void);

/* trace, debug, info, warn, error, off */
MS_API int ms_set_log_level(ms_context* ctx, const char* level);

/* mode and run_dir may be NULL to use the config file's values. */
MS_API int ms_search(ms_context* ctx, const char* config_path, const char* mode, const char* run_dir);

/* config_path may be NULL; when given its search settings must match. */
MS_API int ms_resume(ms_context* ctx, const char* run_dir, const char* config_path);

typedef struct ms_eval_options {
  const char* const* candidate_argv;
  size_t candidate_argc;
  const char* batches_path;
  const char* config_path;  /* may be NULL */
  const char* const* runner_argv; /* NULL: sim landscape runner */
  size_t runner_argc;
  int skip_exam;
  int json;
} ms_eval_options;

MS_API int ms_eval(ms_context* ctx, const ms_eval_options* options);

/* format: "text", "dot" or "json" */
MS_API int ms_tree(ms_context* ctx, const char* run_dir, const char* format);

/* config_path and out_path may be NULL. */
MS_API int ms_sim_batch(ms_context* ctx, const char* config_path, uint64_t first_seed, int count,
                        const char* out_path);
MS_API int ms_sim_write_batches(ms_context* ctx, const char* config_path, const char* out_path);

/* Policy formulas. Return MS_ERR_CONFIG for arguments outside the domain. */
MS_API int ms_ucb_eval(ms_context* ctx, double mean, int eval_count, int total_evals, double eval_confidence,
                       double* out);
MS_API int ms_lcb_eval(ms_context* ctx, double mean, int eval_count, int total_evals, double confidence,
                       double* out);
MS_API int ms_local_potential(ms_context* ctx, double mean, double root_mean, double cumulative_improvement,
                              int child_count, double prior_strength, double prior_pseudocount, double* out);
MS_API int ms_ucb_gen(ms_context* ctx, double mean, double potential, int child_count, int total_evals,
                      double gen_confidence, double prior_pseudocount, double* out);

#ifdef __cplusplus
}
#endif

#endif
