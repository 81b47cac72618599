#ifndef NVNE_H
#define NVNE_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NvneStatus {
  NVNE_STATUS_OK = 0,
  NVNE_STATUS_NULL_POINTER = 1,
  /**
   * Bad size, non-finite input or invalid UTF-8.
   */
  NVNE_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The input is not a valid Hermitian operator or density matrix.
   */
  NVNE_STATUS_INVALID_MATRIX = 3,
  /**
   * A parameter lies outside the mathematical domain.
   */
  NVNE_STATUS_DOMAIN = 4,
  /**
   * The numerics failed (eigen-solver, missing signal, ...).
   */
  NVNE_STATUS_NUMERICAL = 5,
  /**
   * A scenario config could not be parsed or validated.
   */
  NVNE_STATUS_CONFIG = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  NVNE_STATUS_PANIC = 7,
} NvneStatus;

/**
 * Opaque density matrix.
 */
typedef struct NvneDensity NvneDensity;

/**
 * Opaque Hermitian operator.
 */
typedef struct NvneHamiltonian NvneHamiltonian;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when there is no error.
 */
size_t nvne_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nvne_version(void);

/**
 * Validates a density matrix from row-major parts; `im` may be null.
 */
enum NvneStatus nvne_density_new(const double *re,
                                 const double *im,
                                 size_t dim,
                                 struct NvneDensity **out);

/**
 * Two-level state with eigenvalues `lam`, `1 - lam` and Bloch angles.
 */
enum NvneStatus nvne_density_new_bloch(double lam,
                                       double phi,
                                       double psi,
                                       struct NvneDensity **out);

void nvne_density_free(struct NvneDensity *rho);

/**
 * Dimension of the state, 0 for a null handle.
 */
size_t nvne_density_dim(const struct NvneDensity *rho);

/**
 * Writes `dim * dim` row-major entries into `re` and `im`.
 */
enum NvneStatus nvne_density_entries(const struct NvneDensity *rho, double *re, double *im);

/**
 * Writes the `dim` eigenvalues in ascending order.
 */
enum NvneStatus nvne_density_eigenvalues(const struct NvneDensity *rho, double *out, size_t len);

/**
 * `C_n = Tr ρ^n`.
 */
enum NvneStatus nvne_casimir(const struct NvneDensity *rho, uint32_t n, double *out);

/**
 * Tsallis entropy `S_q`; von Neumann entropy at `q = 1`.
 */
enum NvneStatus nvne_tsallis_entropy(const struct NvneDensity *rho, double q, double *out);

/**
 * Trace distance `½‖a - b‖₁`.
 */
enum NvneStatus nvne_trace_distance(const struct NvneDensity *a,
                                    const struct NvneDensity *b,
                                    double *out);

/**
 * Validates a Hermitian operator from row-major parts; `im` may be null.
 */
enum NvneStatus nvne_hamiltonian_new(const double *re,
                                     const double *im,
                                     size_t dim,
                                     struct NvneHamiltonian **out);

/**
 * `H = -μ σz`.
 */
enum NvneStatus nvne_hamiltonian_new_spin_z(double mu, struct NvneHamiltonian **out);

void nvne_hamiltonian_free(struct NvneHamiltonian *h);

/**
 * One midpoint step of `i dρ/dt = [H, ρ^q]`; the result is a new handle.
 */
enum NvneStatus nvne_step(const struct NvneDensity *rho,
                          const struct NvneHamiltonian *h,
                          double q,
                          double dt,
                          struct NvneDensity **out);

/**
 * Integrates to `t_final` and returns the final state. `energy_drift`, if
 * not null, receives the largest relative drift of `Tr ρ^q H`.
 */
enum NvneStatus nvne_evolve(const struct NvneDensity *rho,
                            const struct NvneHamiltonian *h,
                            double q,
                            double dt,
                            double t_final,
                            struct NvneDensity **out,
                            double *energy_drift);

/**
 * Precession frequency `2μ(f(λ) - f(1-λ))/(2λ - 1)` of a spin with
 * `f(x) = x^q`.
 */
enum NvneStatus nvne_larmor_frequency(double q, double mu, double lam, double *out);

/**
 * Spin equilibrium: larger eigenvalue and `∂²F/∂λ²` there.
 */
enum NvneStatus nvne_spin_equilibrium(double q,
                                      double beta,
                                      double mu,
                                      double *lam,
                                      double *second_derivative);

/**
 * Runs a JSON scenario config. `passed` receives 1 if every check passed;
 * `report_json`, if not null, receives the report, to be released with
 * [`nvne_string_free`]. Nothing is written to disk.
 */
enum NvneStatus nvne_run_scenario(const char *config_json, int32_t *passed, char **report_json);

/**
 * Releases a string returned by this library.
 */
void nvne_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NVNE_H */
