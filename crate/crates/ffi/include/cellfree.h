#ifndef CELLFREE_H
#define CELLFREE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_ARGUMENT = 2,
  // Configuration or scheme requirements violated.
  CF_STATUS_VALIDATION = 3,
  // No power allocation reaches a positive SINR.
  CF_STATUS_INFEASIBLE = 4,
  // Output buffer shorter than required; nothing was written.
  CF_STATUS_BUFFER_TOO_SMALL = 5,
  CF_STATUS_PANIC = 6,
  CF_STATUS_INTERNAL = 7,
} CfStatus;

// Precoding scheme selector.
typedef enum CfScheme {
  CF_SCHEME_CB = 0,
  CF_SCHEME_NCB = 1,
  CF_SCHEME_ECB = 2,
  CF_SCHEME_CBDT = 3,
} CfScheme;

// System parameters.
typedef struct CfConfig CfConfig;

// Max-min fairness solution.
typedef struct CfMmf CfMmf;

// Closed-form evaluation of one allocation.
typedef struct CfReport CfReport;

// One network realization.
typedef struct CfSnapshot CfSnapshot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len - 1` bytes) and returns its full length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t cf_last_error(char *buf, uintptr_t len);

// Library version as a static NUL-terminated string.
const char *cf_version(void);

// Default system parameters.
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum CfStatus cf_config_default(struct CfConfig **out);

// Parses parameters from the JSON experiment format used by the CLI
// (keys such as `M`, `N`, `K`, `tau_up`; experiment-only keys are ignored).
//
// # Safety
// `json` must be a NUL-terminated string; `out` a valid handle slot.
enum CfStatus cf_config_from_json(const char *json, struct CfConfig **out);

// # Safety
// `cfg` must be null or a handle from this library, not yet freed.
void cf_config_free(struct CfConfig *cfg);

// Number of APs, antennas per AP and users.
//
// # Safety
// `cfg` must be a live handle; outputs may be null.
enum CfStatus cf_config_dims(const struct CfConfig *cfg,
                             uintptr_t *num_aps,
                             uintptr_t *antennas,
                             uintptr_t *num_users);

// Draws the snapshot of `seed` under `cfg`.
//
// # Safety
// `cfg` must be a live handle; `out` a valid handle slot.
enum CfStatus cf_snapshot_build(const struct CfConfig *cfg, uint64_t seed, struct CfSnapshot **out);

// # Safety
// `snap` must be null or a live handle.
void cf_snapshot_free(struct CfSnapshot *snap);

// # Safety
// `snap` must be a live handle; outputs may be null.
enum CfStatus cf_snapshot_dims(const struct CfSnapshot *snap,
                               uintptr_t *num_aps,
                               uintptr_t *num_users);

// Large-scale fading, `M * K` values.
//
// # Safety
// `snap` must be a live handle; `buf` must hold `len` doubles.
enum CfStatus cf_snapshot_beta(const struct CfSnapshot *snap, double *buf, uintptr_t len);

// Estimate mean-square `gamma`, `M * K` values.
//
// # Safety
// As [`cf_snapshot_beta`].
enum CfStatus cf_snapshot_gamma(const struct CfSnapshot *snap, double *buf, uintptr_t len);

// Maximal-ratio power coefficients of `scheme` (a [`CfScheme`] value).
//
// # Safety
// Handles must be live; `eta` must hold `len` doubles.
enum CfStatus cf_power_maximal_ratio(const struct CfSnapshot *snap,
                                     const struct CfConfig *cfg,
                                     int32_t scheme,
                                     double *eta,
                                     uintptr_t len);

// Closed-form SINR and SE of the row-major allocation `eta`.
//
// # Safety
// Handles must be live; `eta` must hold `len` doubles; `out` a valid slot.
enum CfStatus cf_evaluate(const struct CfSnapshot *snap,
                          const struct CfConfig *cfg,
                          int32_t scheme,
                          const double *eta,
                          uintptr_t len,
                          struct CfReport **out);

// # Safety
// `report` must be null or a live handle.
void cf_report_free(struct CfReport *report);

// # Safety
// `report` must be a live handle.
uintptr_t cf_report_num_users(const struct CfReport *report);

// Per-user SINR (linear), `K` values.
//
// # Safety
// `report` must be live; `buf` must hold `len` doubles.
enum CfStatus cf_report_sinr(const struct CfReport *report, double *buf, uintptr_t len);

// Per-user SE in bit/s/Hz, `K` values.
//
// # Safety
// As [`cf_report_sinr`].
enum CfStatus cf_report_se(const struct CfReport *report, double *buf, uintptr_t len);

// Max-min fairness power control for CB, NCB or ECB. `bisect_tol <= 0`
// selects the default tolerance.
//
// # Safety
// Handles must be live; `out` a valid slot.
enum CfStatus cf_mmf_solve(const struct CfSnapshot *snap,
                           const struct CfConfig *cfg,
                           int32_t scheme,
                           double bisect_tol,
                           struct CfMmf **out);

// # Safety
// `sol` must be null or a live handle.
void cf_mmf_free(struct CfMmf *sol);

// Achieved common SINR (linear).
//
// # Safety
// `sol` must be live; `nu` writable.
enum CfStatus cf_mmf_nu(const struct CfMmf *sol, double *nu);

// Power coefficients of the solution, `M * K` row-major values.
//
// # Safety
// `sol` must be live; `buf` must hold `len` doubles.
enum CfStatus cf_mmf_eta(const struct CfMmf *sol, double *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLFREE_H */
