#ifndef GEXP_GEXP_H
#define GEXP_GEXP_H

/* C interface to the G-expectation control library. Every function returns a
 * gexp_status; on failure gexp_last_error() describes the problem for the
 * calling thread. Handles are opaque and owned by the caller. */

#include <stddef.h>
#include <stdint.h>

#if defined(GEXP_BUILDING_LIBRARY)
#define GEXP_API __attribute__((visibility("default")))
#else
#define GEXP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gexp_status {
    GEXP_OK = 0,
    GEXP_INVALID_ARGUMENT = 1,
    GEXP_NON_SYMMETRIC = 2,
    GEXP_NON_FINITE = 3,
    GEXP_CFL_VIOLATION = 4,
    GEXP_UNKNOWN_NAME = 5,
    GEXP_SIZE_MISMATCH = 6,
    GEXP_PRECONDITION = 7,
    GEXP_IO = 8,
    GEXP_INTERNAL = 99
} gexp_status;

GEXP_API const char* gexp_last_error(void);
GEXP_API const char* gexp_status_name(gexp_status status);

typedef struct gexp_uncertainty {
    double sigma_min_sq;
    double sigma_max_sq;
    size_t dimension;
} gexp_uncertainty;

typedef struct gexp_grid {
    size_t t_steps;
    double t_start;
    double t_end;
    double x_min;
    double x_max;
    size_t x_steps;
    size_t vol_levels;
} gexp_grid;

/* Terminal payoff by catalog name (x2, neg-x2, call, neg-abs, linear, const,
 * clamp, tanh, cos). clamp <= 0 means unclamped. */
typedef struct gexp_payoff {
    const char* name;
    double clamp;
    double param;
} gexp_payoff;

typedef struct gexp_problem gexp_problem;
typedef struct gexp_field gexp_field;
typedef struct gexp_bsde gexp_bsde;
typedef struct gexp_paths gexp_paths;

/* G(A) for a row-major symmetric d x d matrix, d = u->dimension. */
GEXP_API gexp_status gexp_eval_g(const gexp_uncertainty* u, const double* a, size_t len, double* out);

/* Structural checks plus the explicit-scheme bound sigma_max_sq * dt <= dx^2. */
GEXP_API gexp_status gexp_grid_check(const gexp_uncertainty* u, const gexp_grid* grid);

/* Grid refinement: dt/2 and dx/sqrt(2); time-only refinement halves dt. */
GEXP_API gexp_status gexp_grid_refine(const gexp_grid* in, gexp_grid* out);
GEXP_API gexp_status gexp_grid_refine_time(const gexp_grid* in, gexp_grid* out);

/* ---- problems ---- */

GEXP_API gexp_status gexp_problem_create(const char* name, const char* const* keys, const char* const* values,
                                         size_t count, gexp_problem** out);
GEXP_API void gexp_problem_destroy(gexp_problem* p);
GEXP_API gexp_status gexp_problem_controls(const gexp_problem* p, double* out, size_t capacity, size_t* count);
GEXP_API gexp_status gexp_problem_terminal(const gexp_problem* p, double x, double* out);

typedef struct gexp_check {
    char name[32];
    int passed;
    double worst;
} gexp_check;

/* Samples the structural hypotheses; fills up to `capacity` records. */
GEXP_API gexp_status gexp_problem_validate(const gexp_problem* p, size_t samples, uint64_t seed, gexp_check* checks,
                                           size_t capacity, size_t* count);

/* ---- G-heat equation and lattice expectation ---- */

GEXP_API gexp_status gexp_gheat_solve(const gexp_uncertainty* u, const gexp_payoff* payoff, const gexp_grid* grid,
                                      gexp_field** out);
/* u(t_end, x) of the forward heat field. */
GEXP_API gexp_status gexp_gheat_value(const gexp_field* f, double x, double* out);
GEXP_API gexp_status gexp_lattice_expectation(const gexp_uncertainty* u, const gexp_grid* grid,
                                              const gexp_payoff* payoff, double* out);

/* ---- forward simulation ---- */

/* Piecewise-constant scenario: levels[k] for k < steps; constant control. */
GEXP_API gexp_status gexp_simulate(const gexp_problem* p, const gexp_uncertainty* u, const double* levels,
                                   size_t steps, double control, double x0, size_t n_paths, uint64_t seed,
                                   gexp_paths** out);
GEXP_API void gexp_paths_destroy(gexp_paths* paths);
GEXP_API gexp_status gexp_paths_terminal(const gexp_paths* paths, size_t path, double* x, double* b, double* qv);
GEXP_API gexp_status gexp_paths_write_csv(const gexp_paths* paths, const char* file);

/* Max over constant scenarios at the m levels of Gamma_disc of the Monte Carlo
 * mean of payoff(X_T). */
GEXP_API gexp_status gexp_worst_case(const gexp_problem* p, const gexp_uncertainty* u, size_t levels, size_t steps,
                                     const gexp_payoff* payoff, double control, double x0, size_t n_paths,
                                     uint64_t seed, double* value, double* std_error, size_t* scenario);

/* ---- G-BSDE ---- */

GEXP_API gexp_status gexp_bsde_solve(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid,
                                     double control, int picard, gexp_bsde** out);
GEXP_API void gexp_bsde_destroy(gexp_bsde* b);
GEXP_API gexp_status gexp_bsde_root(const gexp_bsde* b, double x, double* y);
GEXP_API gexp_status gexp_bsde_k_check(const gexp_bsde* b, double* k0, double* max_increment, double* residual);
GEXP_API gexp_status gexp_bsde_write_csv(const gexp_bsde* b, const char* file);

/* ---- value function and HJB ---- */

GEXP_API gexp_status gexp_value_function(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid,
                                         size_t threads, gexp_field** out);
GEXP_API gexp_status gexp_hjb_solve(const gexp_problem* p, const gexp_uncertainty* u, const gexp_grid* grid,
                                    size_t threads, gexp_field** out);
GEXP_API void gexp_field_destroy(gexp_field* f);
GEXP_API gexp_status gexp_field_grid(const gexp_field* f, gexp_grid* out);
GEXP_API gexp_status gexp_field_value(const gexp_field* f, size_t k, size_t i, double* out);
/* Linear interpolation of layer k at x. */
GEXP_API gexp_status gexp_field_interpolate(const gexp_field* f, size_t k, double x, double* out);
GEXP_API gexp_status gexp_field_write_csv(const gexp_field* f, const char* file);
/* Sup-norm difference over nodes at least `margin` cells from either edge. */
GEXP_API gexp_status gexp_field_distance(const gexp_field* a, const gexp_field* b, size_t margin, double* out);
/* 1 when both fields hold bit-identical values and controls. */
GEXP_API gexp_status gexp_field_identical(const gexp_field* a, const gexp_field* b, int* out);

GEXP_API gexp_status gexp_dpp_residual(const gexp_problem* p, const gexp_uncertainty* u, const gexp_field* f,
                                       const size_t* deltas, size_t count, size_t threads, double* residuals);

typedef struct gexp_regularity {
    double lipschitz_x;
    double holder_t;
    double growth;
} gexp_regularity;

GEXP_API gexp_status gexp_regularity_report(const gexp_field* f, gexp_regularity* out);
GEXP_API gexp_status gexp_viscosity_residual(const gexp_field* f, const gexp_problem* p, const gexp_uncertainty* u,
                                             double* max_abs, double* mean_abs);

/* ---- local operators ---- */

/* phi(t, x) = c0 + c1 (x - x0) + c2 (x - x0)^2 + ct (t - t0) */
typedef struct gexp_test_function {
    double t0, x0, c0, c1, c2, ct;
} gexp_test_function;

GEXP_API gexp_status gexp_eval_F0(const gexp_problem* p, const gexp_uncertainty* u, const gexp_test_function* phi,
                                  double t, double x, double y, double z, double* out);
GEXP_API gexp_status gexp_local_ode_probe(const gexp_problem* p, const gexp_uncertainty* u,
                                          const gexp_test_function* phi, double t, double x, double delta,
                                          double* out);
GEXP_API gexp_status gexp_local_comparison(const gexp_problem* p, const gexp_uncertainty* u,
                                           const gexp_test_function* phi, double t, double x, double delta,
                                           double control, size_t steps, size_t levels, double* y1, double* y2,
                                           double* semigroup);
GEXP_API gexp_status gexp_loglog_slope(const double* h, const double* error, size_t count, double* out);

#ifdef __cplusplus
}
#endif

#endif
