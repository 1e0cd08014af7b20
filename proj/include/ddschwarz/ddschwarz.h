/* C interface of the ddschwarz library: domain-decomposition solvers for
 * sparse nonlinear systems on structured grids.
 *
 * Conventions:
 *   - Every fallible call returns a dds_status; DDS_OK is 0.
 *   - On failure, dds_last_error() returns a thread-local message describing
 *     the most recent error in the calling thread.
 *   - Strings returned through char** parameters are heap-allocated; release
 *     them with dds_string_free.
 *   - Objects are opaque handles created by *_create and released by the
 *     matching *_destroy (safe on NULL).
 */

#ifndef DDSCHWARZ_H
#define DDSCHWARZ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DDS_API __declspec(dllexport)
#else
#define DDS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dds_status {
    DDS_OK = 0,
    DDS_ERR_INVALID_ARGUMENT = 1, /* bad sizes, indices or option values */
    DDS_ERR_SINGULAR = 2,         /* a factorization failed */
    DDS_ERR_SOLVE_FAILURE = 3,    /* an iterative solve did not converge */
    DDS_ERR_CONFIG = 4,           /* malformed configuration input */
    DDS_ERR_INTERNAL = 5          /* unexpected exception */
} dds_status;

DDS_API const char* dds_version(void);

/* Message of the last failing call in this thread; empty string if none. The
 * pointer stays valid until the next failing call in the same thread. */
DDS_API const char* dds_last_error(void);

DDS_API void dds_string_free(char* s);

/* ---- Grid ------------------------------------------------------------- */

typedef struct dds_grid dds_grid;

/* Structured grid of interior unknowns, numbered with the x index fastest.
 * dim is 1, 2 or 3; points_per_axis holds dim entries. */
DDS_API dds_status dds_grid_create(int dim, const int32_t* points_per_axis, double spacing,
                                   dds_grid** out);
DDS_API void dds_grid_destroy(dds_grid* g);
DDS_API int64_t dds_grid_size(const dds_grid* g);

/* ---- Problems --------------------------------------------------------- */

typedef struct dds_problem dds_problem;

/* Built-in catalogue. spec_json example:
 *   {"id": "forchheimer", "points": [999], "gamma": 1.0}
 * Valid ids: poisson, forchheimer, nldiffusion. Spacing is 1/(n+1) per axis
 * on the unit domain. */
DDS_API dds_status dds_problem_create(const char* spec_json, dds_problem** out);

/* User-defined residual F(u) and Jacobian with a fixed sparsity pattern.
 * residual writes F(u) (dimension entries) to out. jacobian writes the
 * Jacobian values at u in the order of the pattern's column indices
 * (nnz entries). Both receive the user pointer untouched. Callbacks must not
 * call back into the library and must tolerate concurrent invocations when
 * the problem is used with more than one thread. */
typedef void (*dds_residual_fn)(const double* u, double* out, void* user);
typedef void (*dds_jacobian_fn)(const double* u, double* values, void* user);

DDS_API dds_status dds_problem_create_custom(int64_t dimension, const int32_t* row_offsets,
                                             const int32_t* cols, dds_residual_fn residual,
                                             dds_jacobian_fn jacobian, void* user,
                                             dds_problem** out);

DDS_API void dds_problem_destroy(dds_problem* p);
DDS_API int64_t dds_problem_dimension(const dds_problem* p);

/* Evaluates F(u); u and out hold dimension entries. */
DDS_API dds_status dds_problem_residual(const dds_problem* p, const double* u, double* out);

/* ---- Decomposition context -------------------------------------------- */

typedef struct dds_context dds_context;

/* Overlapping decomposition of the grid into a Cartesian arrangement of
 * subdomain blocks (subdomains_per_axis holds one entry per grid axis),
 * each extended by overlap_layers layers per side, plus the interface
 * skeleton induced by the problem's sparsity pattern. */
DDS_API dds_status dds_context_create(const dds_grid* g, const dds_problem* p,
                                      const int32_t* subdomains_per_axis, int overlap_layers,
                                      int threads, dds_context** out);
DDS_API void dds_context_destroy(dds_context* c);
DDS_API int dds_context_subdomain_count(const dds_context* c);
DDS_API int64_t dds_context_skeleton_size(const dds_context* c);

/* JSON description: per-subdomain sizes, overlap, skeleton size and indices. */
DDS_API dds_status dds_context_summary_json(const dds_context* c, char** out_json);

/* ---- Experiments ------------------------------------------------------ */

typedef struct dds_run_result dds_run_result;

/* Runs the methods listed in the JSON configuration (same schema as the
 * ddsolve CLI). When out_dir is non-NULL, writes one <method>.csv per method
 * plus summary.json and decomposition.json there. threads_override > 0 and
 * seed_override >= 0 replace the corresponding configuration values. */
DDS_API dds_status dds_run(const char* config_json, const char* out_dir, int threads_override,
                           long long seed_override, dds_run_result** out);

DDS_API void dds_run_result_destroy(dds_run_result* r);
DDS_API int dds_run_result_method_count(const dds_run_result* r);

/* Pointer valid while the result lives. Index out of range returns NULL. */
DDS_API const char* dds_run_result_method_id(const dds_run_result* r, int i);

DDS_API int dds_run_result_converged(const dds_run_result* r, int i);
DDS_API int dds_run_result_diverged(const dds_run_result* r, int i);
DDS_API int dds_run_result_iterations(const dds_run_result* r, int i);
DDS_API double dds_run_result_final_error(const dds_run_result* r, int i);
DDS_API double dds_run_result_final_residual(const dds_run_result* r, int i);
DDS_API dds_status dds_run_result_history_csv(const dds_run_result* r, int i, char** out_csv);
DDS_API dds_status dds_run_result_summary_json(const dds_run_result* r, char** out_json);

/* ---- Self checks ------------------------------------------------------ */

/* Runs the invariant battery. all_passed receives 1/0; out_report (optional)
 * receives the per-check report text. */
DDS_API dds_status dds_verify(int* all_passed, char** out_report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DDSCHWARZ_H */
