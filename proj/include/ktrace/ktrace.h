#ifndef KTRACE_KTRACE_H
#define KTRACE_KTRACE_H

/* C interface to the knowledge-tracing workbench.
 *
 * Every function returns a ktrace_status; on failure the message for the
 * calling thread is available from ktrace_last_error() until the next call.
 * Handles are opaque and owned by the caller, who releases them with the
 * matching *_free function. Strings returned through char** are released
 * with ktrace_string_free; const char* results are borrowed from the handle.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(KTRACE_BUILDING_LIBRARY)
#    define KTRACE_API __declspec(dllexport)
#  else
#    define KTRACE_API __declspec(dllimport)
#  endif
#else
#  define KTRACE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ktrace_status {
    KTRACE_OK = 0,
    KTRACE_MISSING_COLUMN,
    KTRACE_BAD_BOOLEAN,
    KTRACE_BAD_NUMBER,
    KTRACE_DUPLICATE_ATTEMPT_KEY,
    KTRACE_DUPLICATE_ORDER_INDEX,
    KTRACE_NOT_FIRST_ATTEMPT,
    KTRACE_UNKNOWN_SKILL,
    KTRACE_SCORE_OUT_OF_RANGE,
    KTRACE_DUPLICATE_KEY,
    KTRACE_DEGENERATE_DENOMINATOR,
    KTRACE_EMPTY_DATA,
    KTRACE_INDEX_OUT_OF_RANGE,
    KTRACE_NON_FINITE_LOSS,
    KTRACE_BAD_CHECKPOINT,
    KTRACE_ZERO_VARIANCE,
    KTRACE_TOO_FEW_PAIRS,
    KTRACE_SINGULAR_CORRELATION_MATRIX,
    KTRACE_INVALID_CONFIG,
    KTRACE_MALFORMED_REPORT,
    KTRACE_IO_ERROR,
    KTRACE_INVALID_ARGUMENT,
    KTRACE_INTERNAL_ERROR
} ktrace_status;

typedef struct ktrace_report ktrace_report;
typedef struct ktrace_dataset ktrace_dataset;

KTRACE_API const char* ktrace_version(void);
KTRACE_API const char* ktrace_status_name(ktrace_status status);
/* Message of the last failed call on this thread; "" if none. */
KTRACE_API const char* ktrace_last_error(void);
KTRACE_API void ktrace_string_free(char* text);

/* --- pipeline --- */

/* scenario: "default" or "mastery-saturation". Writes interactions.csv,
 * posttest.csv and ground_truth.csv into out_dir. */
KTRACE_API ktrace_status ktrace_simulate(const char* scenario, uint64_t seed, const char* out_dir);

typedef struct ktrace_run_options {
    const char* out_dir; /* overrides the config's output path when non-NULL */
    int has_seed;        /* nonzero: seed overrides the config's global seed */
    uint64_t seed;
} ktrace_run_options;

/* Runs the full pipeline described by the config file. options and
 * report_out may be NULL. */
KTRACE_API ktrace_status ktrace_run(const char* config_path, const ktrace_run_options* options,
                                    ktrace_report** report_out);

/* --- reports --- */

KTRACE_API ktrace_status ktrace_report_load(const char* path, ktrace_report** report_out);
KTRACE_API void ktrace_report_free(ktrace_report* report);

/* Plain-text tables; negate_t flips the displayed sign of t, as does a
 * report written with table2_signs set. */
KTRACE_API ktrace_status ktrace_report_render(const ktrace_report* report, int negate_t, char** text_out);

KTRACE_API size_t ktrace_report_estimator_count(const ktrace_report* report);
KTRACE_API const char* ktrace_report_estimator(const ktrace_report* report, size_t index);
KTRACE_API size_t ktrace_report_skill_count(const ktrace_report* report);
KTRACE_API const char* ktrace_report_skill(const ktrace_report* report, size_t index);

/* *defined is 0 when r is undefined for the cell (then *r is NaN). */
KTRACE_API ktrace_status ktrace_report_correlation(const ktrace_report* report, const char* skill,
                                                   const char* estimator, double* r, int* defined);

typedef struct ktrace_comparison {
    const char* skill;
    const char* estimator_a;
    const char* estimator_b;
    double t; /* NaN when undefined */
    int t_defined;
    int df;
    double p;
    int significant;
} ktrace_comparison;

KTRACE_API size_t ktrace_report_comparison_count(const ktrace_report* report);
KTRACE_API ktrace_status ktrace_report_comparison(const ktrace_report* report, size_t index,
                                                  ktrace_comparison* out);

/* --- datasets --- */

KTRACE_API ktrace_status ktrace_dataset_load(const char* interactions_path, ktrace_dataset** dataset_out);
KTRACE_API void ktrace_dataset_free(ktrace_dataset* dataset);
KTRACE_API size_t ktrace_dataset_record_count(const ktrace_dataset* dataset);
KTRACE_API size_t ktrace_dataset_first_attempt_count(const ktrace_dataset* dataset);
KTRACE_API size_t ktrace_dataset_student_count(const ktrace_dataset* dataset);
KTRACE_API size_t ktrace_dataset_skill_count(const ktrace_dataset* dataset);
KTRACE_API const char* ktrace_dataset_skill(const ktrace_dataset* dataset, size_t index);

/* --- statistics --- */

KTRACE_API ktrace_status ktrace_pearson(const double* x, const double* y, size_t n, double* r_out);
KTRACE_API ktrace_status ktrace_dependent_corr_t(double r_ay, double r_by, double r_ab, int n, double* t_out,
                                                 int* df_out);
KTRACE_API ktrace_status ktrace_p_from_t(double t, int df, double* p_out);

#ifdef __cplusplus
}
#endif

#endif /* KTRACE_KTRACE_H */
