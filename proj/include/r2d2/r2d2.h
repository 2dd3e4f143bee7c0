#ifndef R2D2_R2D2_H
#define R2D2_R2D2_H

#include <stddef.h>
#include <stdint.h>

#if defined(R2D2_BUILDING)
#define R2D2_API __attribute__((visibility("default")))
#else
#define R2D2_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum {
  R2D2_OK = 0,
  R2D2_ERR_INTERNAL = 1,
  R2D2_ERR_INPUT = 2,      /* bad data, config or parameters; degenerate prior */
  R2D2_ERR_SAMPLER = 3,    /* sampler failure (e.g. singular conditional) */
  R2D2_ERR_SIMULATION = 4  /* more than 20% of simulation fits failed */
} r2d2_status;

typedef struct r2d2_config r2d2_config;
typedef struct r2d2_fit r2d2_fit;
typedef struct r2d2_dataset r2d2_dataset;

/* Message of the last failing call on this thread ("" if none). */
R2D2_API const char* r2d2_last_error(void);
R2D2_API const char* r2d2_version(void);

/* --- configuration ------------------------------------------------------ */
R2D2_API r2d2_status r2d2_config_new(r2d2_config** out);
R2D2_API r2d2_status r2d2_config_load(const char* path, r2d2_config** out);
R2D2_API r2d2_status r2d2_config_from_json(const char* text, r2d2_config** out);
/* Integral values are stored as integers. */
R2D2_API r2d2_status r2d2_config_set_number(r2d2_config* cfg, const char* key, double value);
R2D2_API r2d2_status r2d2_config_set_string(r2d2_config* cfg, const char* key, const char* value);
R2D2_API r2d2_status r2d2_config_set_bool(r2d2_config* cfg, const char* key, int value);
/* Any JSON value, e.g. "[1, 1, 1]". */
R2D2_API r2d2_status r2d2_config_set_json(r2d2_config* cfg, const char* key, const char* json_value);
R2D2_API void r2d2_config_free(r2d2_config* cfg);

/* --- commands ---------------------------------------------------------- */
/* Writes artifacts when the config has "out". `fit` may be NULL. */
R2D2_API r2d2_status r2d2_run_fit(const r2d2_config* cfg, r2d2_fit** fit);
/* Either output pointer may be NULL. */
R2D2_API r2d2_status r2d2_run_prior_check(const r2d2_config* cfg, double* mean_gap, double* ks_distance);
R2D2_API r2d2_status r2d2_run_simulate(const r2d2_config* cfg);

/* --- fit results --------------------------------------------------------- */
R2D2_API size_t r2d2_fit_num_draws(const r2d2_fit* fit);
R2D2_API size_t r2d2_fit_num_params(const r2d2_fit* fit);
/* NULL when out of range; valid until the fit is freed. */
R2D2_API const char* r2d2_fit_param_name(const r2d2_fit* fit, size_t index);
R2D2_API r2d2_status r2d2_fit_draw(const r2d2_fit* fit, size_t row, size_t param, double* value);
R2D2_API r2d2_status r2d2_fit_summary(const r2d2_fit* fit, const char* param, double* median, double* ci_low,
                                      double* ci_high, double* ess);
R2D2_API r2d2_status r2d2_fit_acceptance(const r2d2_fit* fit, size_t chain, double* phi_rate, double* rho_rate);
R2D2_API void r2d2_fit_free(r2d2_fit* fit);

/* --- data sets ----------------------------------------------------------- */
R2D2_API r2d2_status r2d2_dataset_load(const char* path, r2d2_dataset** out);
R2D2_API size_t r2d2_dataset_n(const r2d2_dataset* ds);
R2D2_API size_t r2d2_dataset_p(const r2d2_dataset* ds);
R2D2_API size_t r2d2_dataset_levels(const r2d2_dataset* ds);
R2D2_API void r2d2_dataset_free(r2d2_dataset* ds);

/* --- numerics ------------------------------------------------------------ */
R2D2_API r2d2_status r2d2_gbp_cdf(double x, double a, double b, double c, double d, double* out);
R2D2_API r2d2_status r2d2_w_prior_moments(double a, double b, double alpha, double beta, double* mean,
                                          double* variance);
R2D2_API r2d2_status r2d2_ess(const double* chain, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
