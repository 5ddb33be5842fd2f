#ifndef DDIQC_H
#define DDIQC_H

/*
 * C interface of the ddiqc shared library: data-driven finite-horizon
 * input-output analysis of discrete-time LTI systems from one measured
 * trajectory, plus exact model-based oracles.
 *
 * Conventions:
 *  - Every fallible function returns a ddiqc_status; DDIQC_OK means the out
 *    parameters were written. Any other status leaves them untouched and
 *    stores a human-readable message readable via ddiqc_last_error()
 *    (thread-local).
 *  - Objects are opaque handles created by the library and released with
 *    the matching *_free function (free functions accept NULL).
 *  - Matrices cross the boundary as dense row-major double arrays with
 *    dimensions passed or queried explicitly.
 *  - Noise arguments describe output measurement noise for the relaxed
 *    verification test: kind 0 = multiplicative uniform (level = epsilon
 *    bar), kind 1 = additive Gaussian (level = sigma); `samples` is the
 *    number K of averaged noise instances; level 0 disables the
 *    relaxation.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define DDIQC_VERSION_STRING "0.1.0"

typedef enum ddiqc_status {
    DDIQC_OK = 0,
    DDIQC_ERR_IO = 1,       /* file system or parse failure */
    DDIQC_ERR_PREMISE = 2,  /* analysis premise violated, or the data is
                               degenerate / the quantity unbounded on it */
    DDIQC_ERR_ARGUMENT = 3, /* inconsistent dimensions, ranges, or flags */
    DDIQC_ERR_NUMERIC = 4   /* non-finite values or failed decomposition */
} ddiqc_status;

typedef struct ddiqc_trajectory ddiqc_trajectory;
typedef struct ddiqc_model ddiqc_model;
typedef struct ddiqc_report ddiqc_report;

const char* ddiqc_version(void);

/* Message of the most recent failure on this thread; "" if none. The
 * pointer stays valid until the next library call on the same thread. */
const char* ddiqc_last_error(void);

/* --- trajectories (N samples, m inputs, p outputs) --- */

ddiqc_status ddiqc_trajectory_create(int n_samples, int m, int p,
                                     const double* u_row_major,
                                     const double* y_row_major,
                                     ddiqc_trajectory** out);
ddiqc_status ddiqc_trajectory_load_csv(const char* path, ddiqc_trajectory** out);
ddiqc_status ddiqc_trajectory_save_csv(const ddiqc_trajectory* traj,
                                       const char* path);
int ddiqc_trajectory_length(const ddiqc_trajectory* traj);
int ddiqc_trajectory_inputs(const ddiqc_trajectory* traj);
int ddiqc_trajectory_outputs(const ddiqc_trajectory* traj);
/* Either destination may be NULL; sizes are N*m and N*p doubles. */
ddiqc_status ddiqc_trajectory_data(const ddiqc_trajectory* traj,
                                   double* u_row_major, double* y_row_major);
void ddiqc_trajectory_free(ddiqc_trajectory* traj);

/* --- state-space models x+ = Ax + Bu, y = Cx + Du --- */

ddiqc_status ddiqc_model_create(int n, int m, int p, const double* A_row_major,
                                const double* B_row_major,
                                const double* C_row_major,
                                const double* D_row_major, ddiqc_model** out);
ddiqc_status ddiqc_model_load_json(const char* path, ddiqc_model** out);
ddiqc_status ddiqc_model_save_json(const ddiqc_model* model, const char* path);
/* Seeded random internally-stable minimal system (deterministic per seed). */
ddiqc_status ddiqc_model_random(int n, int m, int p, uint64_t seed,
                                double spectral_radius, ddiqc_model** out);
int ddiqc_model_order(const ddiqc_model* model);
int ddiqc_model_inputs(const ddiqc_model* model);
int ddiqc_model_outputs(const ddiqc_model* model);
/* Row-major copies; any destination may be NULL. Sizes n*n, n*m, p*n, p*m. */
ddiqc_status ddiqc_model_data(const ddiqc_model* model, double* A_row_major,
                              double* B_row_major, double* C_row_major,
                              double* D_row_major);
ddiqc_status ddiqc_model_hinf_norm(const ddiqc_model* model, double* out);
/* Zero-initial-state response to u (n_samples x m, row-major); the result
 * trajectory pairs the input with the simulated output. */
ddiqc_status ddiqc_model_simulate(const ddiqc_model* model, int n_samples,
                                  int m, const double* u_row_major,
                                  ddiqc_trajectory** out);
void ddiqc_model_free(ddiqc_model* model);

/* --- data-driven analyses ---
 *
 * All of them window the trajectory with horizon L and zero-prefix length
 * nu (0 <= nu < L) as in the finite-horizon verification test. delta_out
 * (nullable) receives the averaged noise margin actually used (0 when the
 * noise level is 0). */

/* Tightest data-certified L2-gain bound ||y|| <= gamma ||u||. */
ddiqc_status ddiqc_gain_estimate(const ddiqc_trajectory* traj, int L, int nu,
                                 double tol, int noise_kind, double noise_level,
                                 int noise_samples, uint64_t noise_seed,
                                 double* gamma_out, double* delta_out);

/* Tightest data-certified passivity index (input side: sum u'y +
 * rho |u|^2 >= 0; output side: sum u'y + rho |y|^2 >= 0). Noise relaxation
 * is supported on the input side only. */
ddiqc_status ddiqc_passivity_estimate(const ddiqc_trajectory* traj, int L,
                                      int nu, int output_side, double tol,
                                      int noise_kind, double noise_level,
                                      int noise_samples, uint64_t noise_seed,
                                      double* rho_out, double* delta_out);

/* Verification of a fixed dissipativity level; decision_out gets 0/1. */
ddiqc_status ddiqc_verify_gain(const ddiqc_trajectory* traj, int L, int nu,
                               double gamma, double psd_tol, int noise_kind,
                               double noise_level, int noise_samples,
                               uint64_t noise_seed, int* decision_out,
                               double* min_eigenvalue_out, double* delta_out);
ddiqc_status ddiqc_verify_passivity(const ddiqc_trajectory* traj, int L, int nu,
                                    int output_side, double rho, double psd_tol,
                                    int noise_kind, double noise_level,
                                    int noise_samples, uint64_t noise_seed,
                                    int* decision_out, double* min_eigenvalue_out,
                                    double* delta_out);
/* C is p x m row-major: tests ||y - C u|| <= gamma ||u||. */
ddiqc_status ddiqc_verify_cone(const ddiqc_trajectory* traj, int L, int nu,
                               const double* C_row_major, double gamma,
                               double psd_tol, int noise_kind,
                               double noise_level, int noise_samples,
                               uint64_t noise_seed, int* decision_out,
                               double* min_eigenvalue_out, double* delta_out);

/* Averaged noise margin of the gain-family test (Algorithm-style
 * relaxation threshold); independent of the tested gamma. */
ddiqc_status ddiqc_noise_margin(const ddiqc_trajectory* traj, int L, int nu,
                                int noise_kind, double noise_level,
                                int noise_samples, uint64_t noise_seed,
                                double* delta_out);

/* Tightest data-certified cone ||y - C u|| <= gamma ||u||; C_out receives
 * p*m row-major doubles. */
ddiqc_status ddiqc_tightest_cone(const ddiqc_trajectory* traj, int L, int nu,
                                 double opt_tol, double* C_out,
                                 double* gamma_out);

/* Number of scalar basis functions described by (n_lambdas, chain_order):
 * chain_order >= 1 with one lambda selects the chain basis
 * (1, (z+lambda)^{-1}, ..., (z+lambda)^{-chain_order}); chain_order 0
 * selects the pole basis (1, (z+lambda_1)^{-1}, ..., (z+lambda_k)^{-1}). */
int ddiqc_basis_size(int n_lambdas, int chain_order);

/* Certified low-order approximation of the unknown system in the span of
 * the selected basis. coeffs_out receives basis_size p*m row-major blocks
 * (the expansion coefficients); model_out (nullable) the realized model. */
ddiqc_status ddiqc_loworder_approximation(const ddiqc_trajectory* traj, int L,
                                          int nu, const double* lambdas,
                                          int n_lambdas, int chain_order,
                                          double opt_tol, double* coeffs_out,
                                          double* gamma_out,
                                          ddiqc_model** model_out);

/* Finite-to-infinite-horizon gain certificate for FIR systems of length
 * fir_length: gamma_inf_out = gamma_L / (1 - 20 fir_length / L); requires
 * L >= 20 fir_length (equality yields +inf). With a model supplied, a
 * 4096-point determinant sweep checks the invertibility premise on the
 * unit circle; valid_out reports it (nullable pointers allowed). */
ddiqc_status ddiqc_fir_gain_bound(double gamma_L, int L, int fir_length,
                                  const ddiqc_model* model_or_null,
                                  double* gamma_inf_out, int* valid_out,
                                  double* det_min_modulus_out);

/* Finite-section norms sigma_max(T_L(G)) for each horizon, the H-infinity
 * reference, and the fitted log-log decay slope of the gap (slope_defined
 * 0 when fewer than two usable points remain). */
ddiqc_status ddiqc_toeplitz_norm_curve(const ddiqc_model* model,
                                       const int* horizons, int n_horizons,
                                       double* sigmas_out, double* hinf_out,
                                       double* slope_out, int* slope_defined_out);

/* --- command driver ---
 *
 * Runs one CLI subcommand (argv excludes the program name). exit_code_out
 * receives the process exit code (0 success, 1 I/O or numeric failure,
 * 2 premise violation / degenerate data, 3 usage); report_out (nullable)
 * receives the texts the command would print. The status is DDIQC_OK
 * whenever the command ran, regardless of its exit code. */
ddiqc_status ddiqc_run_command(int argc, const char* const* argv,
                               int* exit_code_out, ddiqc_report** report_out);
const char* ddiqc_report_text(const ddiqc_report* report);  /* stdout text */
const char* ddiqc_report_error(const ddiqc_report* report); /* stderr text */
void ddiqc_report_free(ddiqc_report* report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DDIQC_H */
