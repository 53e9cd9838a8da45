#ifndef WIRETAP_OUTAGE_H
#define WIRETAP_OUTAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum {
  WO_STATUS_OK = 0,
  WO_STATUS_NULL_POINTER = 1,
  WO_STATUS_INVALID_UTF8 = 2,
  WO_STATUS_INVALID_JSON = 3,
  WO_STATUS_INVALID_DISTRIBUTION = 4,
  WO_STATUS_INVALID_ARGUMENT = 5,
  WO_STATUS_INFEASIBLE_RATE = 6,
  WO_STATUS_INFEASIBLE_OUTAGE = 7,
  WO_STATUS_NO_CONVERGENCE = 8,
  WO_STATUS_DOMAIN_ERROR = 9,
  WO_STATUS_SIMULATION_INFEASIBLE = 10,
  WO_STATUS_NON_INTEGRABLE = 11,
  WO_STATUS_PANIC = 12,
} WoStatus;

/**
 * Transmitter channel knowledge used by [`wo_solve_capacity`].
 */
typedef enum {
  WO_CSI_FULL = 0,
  WO_CSI_MAIN = 1,
} WoCsi;

/**
 * Opaque fading law.
 */
typedef struct WoDistribution WoDistribution;

/**
 * Opaque solved capacity.
 */
typedef struct WoSolution WoSolution;

/**
 * Scalar summary of a [`WoSolution`].
 */
typedef struct {
  double capacity;
  double lambda;
  /**
   * NaN when the solver has no such multiplier.
   */
  double k;
  /**
   * NaN when the solver has no such threshold.
   */
  double threshold_c;
  double r_max;
  double expected_rs;
  double expected_power;
  double channel_outage_prob;
  double var_rs;
  double eps;
  double p_avg;
} WoCapacitySummary;

/**
 * Statistics of one simulated key-buffer trace.
 */
typedef struct {
  double rate_r;
  double buffer_m;
  double loss_ratio;
  double eps_prime;
  double eps_prime_stderr;
  double key_outage_freq;
  double channel_outage_freq;
  double artificial_outage_freq;
  double final_q;
  double mean_rs;
  double identity_residual;
} WoQueueStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *wo_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void wo_string_free(char *s);

/**
 * Builds a fading law from its JSON descriptor, e.g.
 * `{"kind":"continuous","marginal_m":{"family":"exponential","mean":2},"marginal_e":{"family":"exponential","mean":1}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
WoStatus wo_distribution_from_json(const char *json,
                                   WoDistribution **out);

/**
 * Independent exponential gains with the given means.
 *
 * # Safety
 * `out` must be writable.
 */
WoStatus wo_distribution_rayleigh(double mean_m, double mean_e, WoDistribution **out);

/**
 * Independent chi-square gains with `degrees` degrees of freedom and the given means.
 *
 * # Safety
 * `out` must be writable.
 */
WoStatus wo_distribution_chi_square(double degrees,
                                    double mean_m,
                                    double mean_e,
                                    WoDistribution **out);

/**
 * Discrete law from parallel arrays of `len` atoms.
 *
 * # Safety
 * The three arrays must hold `len` values and `out` must be writable.
 */
WoStatus wo_distribution_discrete(const double *h_m,
                                  const double *h_e,
                                  const double *prob,
                                  size_t len,
                                  WoDistribution **out);

/**
 * # Safety
 * `dist` must come from a `wo_distribution_*` constructor and not have been freed.
 */
void wo_distribution_free(WoDistribution *dist);

/**
 * Solves the ε-capacity under full or main-channel CSI.
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
WoStatus wo_solve_capacity(const WoDistribution *dist,
                           double p_avg,
                           double eps,
                           WoCsi csi,
                           WoSolution **out);

/**
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
WoStatus wo_solution_summary(const WoSolution *sol, WoCapacitySummary *out);

/**
 * JSON form of a solution; release it with [`wo_string_free`].
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
WoStatus wo_solution_to_json(const WoSolution *sol, char **out);

/**
 * # Safety
 * `sol` must come from [`wo_solve_capacity`] and not have been freed.
 */
void wo_solution_free(WoSolution *sol);

/**
 * Simulates one key-buffer trace at rate `rate_r` with the optimal full-CSI
 * policy for that rate.
 *
 * # Safety
 * `dist` must be a live handle and `out` writable.
 */
WoStatus wo_simulate(const WoDistribution *dist,
                     double p_avg,
                     double eps,
                     double rate_r,
                     double buffer_m,
                     uint64_t horizon,
                     uint64_t seed,
                     uint64_t stream_id,
                     WoQueueStats *out);

/**
 * Buffer size sufficient for outage `eps_prime` at capacity `capacity_c`.
 *
 * # Safety
 * `out` must be writable.
 */
WoStatus wo_buffer_bound(double capacity_c,
                         double eps,
                         double eps_prime,
                         double var_rs,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIRETAP_OUTAGE_H */
