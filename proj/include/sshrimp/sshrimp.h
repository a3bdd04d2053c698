/*
 * sshrimp - spike-and-slab sequential hierarchical regression imputation.
 *
 * C interface to the imputation engine: clustered datasets with missing
 * masks, multiple imputation via per-variable Gibbs samplers, Rubin-rule
 * pooling, the Monte Carlo study harness, and the sampler self-tests.
 *
 * Conventions: every fallible function returns sshrimp_status; on failure
 * sshrimp_last_error() holds a message for the calling thread. Objects are
 * opaque handles released with their matching _free function. Strings
 * returned through char** are heap-allocated and released with
 * sshrimp_string_free.
 */

#ifndef SSHRIMP_H
#define SSHRIMP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sshrimp_status {
  SSHRIMP_OK = 0,
  SSHRIMP_ERR_IO = 1,       /* file missing/unreadable/unwritable */
  SSHRIMP_ERR_PARSE = 2,    /* malformed CSV or JSON */
  SSHRIMP_ERR_INVALID = 3,  /* invalid argument or configuration */
  SSHRIMP_ERR_NUMERIC = 4,  /* numeric failure inside a sampler */
  SSHRIMP_ERR_INTERNAL = 5
} sshrimp_status;

typedef struct sshrimp_dataset sshrimp_dataset;
typedef struct sshrimp_imputation sshrimp_imputation;
typedef struct sshrimp_table sshrimp_table;

const char* sshrimp_version(void);
/* Message from the most recent failing call on this thread. */
const char* sshrimp_last_error(void);

void sshrimp_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Datasets.                                                           */
/*                                                                     */
/* options_json (all fields optional):                                 */
/*   {                                                                 */
/*     "missing_token": "NA",                                          */
/*     "cluster_column": "cluster",   // default: first column         */
/*     "infer_binary": false,                                          */
/*     "variables": [{"name": "...", "scale": "continuous"|"binary",   */
/*                    "policy": "undetermined"|"forced"}, ...]         */
/*   }                                                                 */

sshrimp_status sshrimp_dataset_load_csv(const char* path,
                                        const char* options_json,
                                        sshrimp_dataset** out);
sshrimp_status sshrimp_dataset_save_csv(const sshrimp_dataset* ds,
                                        const char* path);
void sshrimp_dataset_free(sshrimp_dataset* ds);

int sshrimp_dataset_clusters(const sshrimp_dataset* ds);
int sshrimp_dataset_variables(const sshrimp_dataset* ds);
int64_t sshrimp_dataset_rows(const sshrimp_dataset* ds);
int64_t sshrimp_dataset_missing_cells(const sshrimp_dataset* ds);

/* ------------------------------------------------------------------ */
/* Multiple imputation.                                                */
/*                                                                     */
/* options_json (all fields optional):                                 */
/*   {                                                                 */
/*     "seed": 1, "copies": 5, "cycles": 10, "inner_iters": 20,        */
/*     "include_intercept": true, "standardize": false,                */
/*     "sigma_e_mode": "conjugate"|"appendix-literal",                 */
/*     "scan": "ascending"|"random",                                   */
/*     "threads": 1,              // 0 = all cores                     */
/*     "hyper": {"a_w":1,"b_w":1,"nu_b":1,"nu_e":1}                    */
/*   }                                                                 */

sshrimp_status sshrimp_impute(const sshrimp_dataset* ds,
                              const char* options_json,
                              sshrimp_imputation** out);
int sshrimp_imputation_copies(const sshrimp_imputation* imp);
/* Returns a fresh dataset handle for one completed copy. */
sshrimp_status sshrimp_imputation_copy(const sshrimp_imputation* imp,
                                       int index, sshrimp_dataset** out);
sshrimp_status sshrimp_imputation_manifest(const sshrimp_imputation* imp,
                                           char** json_out);
sshrimp_status sshrimp_imputation_trace_csv(const sshrimp_imputation* imp,
                                            char** csv_out);
void sshrimp_imputation_free(sshrimp_imputation* imp);

/* ------------------------------------------------------------------ */
/* Monte Carlo study (clustered banded-Gaussian data, sequential MAR   */
/* deletion, logistic analyst model, SHRIMP vs complete-case arms).    */
/*                                                                     */
/* options_json (all fields optional):                                 */
/*   {                                                                 */
/*     "seed": 1, "replicates": 100, "m": 10, "d": 10,                 */
/*     "copies": 10, "cycles": 10, "inner_iters": 20,                  */
/*     "alpha_mis": -3, "beta_mis": 1, "p_first": 0.1,                 */
/*     "analyst_iters": 800, "analyst_burnin": 300,                    */
/*     "arms": "cc,shrimp", "threads": 1                               */
/*   }                                                                 */
/* Emits the metrics table (coefficient, method, true_value, PB, RMSE, */
/* SE, CR, FMI) and per-replicate raw records.                         */

sshrimp_status sshrimp_simulate(const char* options_json,
                                sshrimp_table** metrics_out,
                                sshrimp_table** records_out);

/* ------------------------------------------------------------------ */
/* Rubin pooling.                                                      */

typedef struct sshrimp_pooled {
  double q_bar;
  double u_bar;
  double b_between;
  double t_total;
  double df; /* +inf when the between-imputation variance is zero */
  double ci_low;
  double ci_high;
  double fmi;
} sshrimp_pooled;

sshrimp_status sshrimp_pool(const double* estimates, const double* ses,
                            int copies, sshrimp_pooled* out);

/* Pools a table with columns (copy, coefficient, estimate, se) into one
 * row per coefficient: estimate, se, ci_low, ci_high, p_value, fmi, df. */
sshrimp_status sshrimp_pool_table(const sshrimp_table* in,
                                  sshrimp_table** out);

/* ------------------------------------------------------------------ */
/* Tables: rectangular string cells with a header row.                 */

sshrimp_status sshrimp_table_load_csv(const char* path, sshrimp_table** out);
sshrimp_status sshrimp_table_save_csv(const sshrimp_table* table,
                                      const char* path);
sshrimp_status sshrimp_table_to_csv(const sshrimp_table* table,
                                    char** csv_out);
int sshrimp_table_rows(const sshrimp_table* table);    /* excludes header */
int sshrimp_table_columns(const sshrimp_table* table);
/* Borrowed pointers, valid while the table lives. row -1 = header. */
const char* sshrimp_table_cell(const sshrimp_table* table, int row, int col);
void sshrimp_table_free(sshrimp_table* table);

/* ------------------------------------------------------------------ */
/* Self-test: PG sampler suite plus both Geweke joint-distribution     */
/* tests.                                                              */
/*                                                                     */
/* options_json: {"seed": ..., "quick": false, "inject_fault": false}  */
/* `failures_out` receives the number of failed checks; the report     */
/* lists every check with its statistic.                               */

sshrimp_status sshrimp_selftest(const char* options_json, char** report_out,
                                int* failures_out);

#ifdef __cplusplus
}
#endif

#endif /* SSHRIMP_H */
