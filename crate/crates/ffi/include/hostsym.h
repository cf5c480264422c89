#ifndef HOSTSYM_H
#define HOSTSYM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  // Rejected parameters, configuration or input text.
  HS_STATUS_INVALID_ARGUMENT = 2,
  HS_STATUS_NO_EQUILIBRIUM = 3,
  // Integration or solver failure.
  HS_STATUS_NUMERICAL = 4,
  HS_STATUS_IO = 5,
  // Output buffer too small.
  HS_STATUS_BUFFER_TOO_SMALL = 6,
  HS_STATUS_PANIC = 7,
  HS_STATUS_FAILURE = 8,
} HsStatus;

// Opaque simulator handle.
typedef struct HsSimulator HsSimulator;

// Model constants. `infection` points at a row-major `kappa * kappa` matrix whose entry
// `(i, j)` is the rate at which symbiont `j + 1` infects host `i + 1`.
typedef struct HsModel {
  size_t kappa;
  double lambda;
  double g;
  const double *infection;
  size_t r1;
  size_t r2;
  // Threshold for the threshold host rule; 0 selects the linear rule.
  uint32_t theta;
} HsModel;

// `halo == 0` gives the torus `(Z mod side)^dimension`; otherwise a one-dimensional segment
// with `halo` frozen sites at each end.
typedef struct HsGeometry {
  size_t dimension;
  size_t side;
  size_t halo;
} HsGeometry;

typedef struct HsSiteState {
  uint8_t host;
  // 0 when the host is unassociated.
  uint8_t symbiont;
} HsSiteState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length of the last error message on this thread, excluding the terminator.
size_t hs_last_error_length(void);

// Copies the last error message, NUL-terminated and truncated to `capacity - 1` bytes.
// Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `capacity` writes.
size_t hs_last_error_message(char *buf, size_t capacity);

// Static NUL-terminated version string.
const char *hs_version(void);

// Creates a simulator from `site_count` row-major site states, drawing randomness from
// replicate stream `replicate` of `seed`.
//
// # Safety
// Pointers must be valid; `states` must hold `site_count` entries.
enum HsStatus hs_simulator_new(const struct HsModel *model,
                               struct HsGeometry geometry,
                               const struct HsSiteState *states,
                               size_t site_count,
                               uint64_t seed,
                               uint64_t replicate,
                               struct HsSimulator **out);

// # Safety
// `sim` must be null or a handle from [`hs_simulator_new`] not yet freed.
void hs_simulator_free(struct HsSimulator *sim);

// Advances to `t_end`. `events` (optional) receives the number of events executed,
// null births included; `absorbed` (optional) is set to 1 if the chain got stuck.
//
// # Safety
// `sim` must be a live handle; optional pointers may be null.
enum HsStatus hs_simulator_run(struct HsSimulator *sim,
                               double t_end,
                               uint64_t *events,
                               uint8_t *absorbed);

// # Safety
// `sim` and `out` must be valid.
enum HsStatus hs_simulator_time(const struct HsSimulator *sim, double *out);

// Number of active sites (halo sites excluded).
//
// # Safety
// `sim` and `out` must be valid.
enum HsStatus hs_simulator_site_count(const struct HsSimulator *sim, size_t *out);

// # Safety
// `sim` and `out` must be valid.
enum HsStatus hs_simulator_get_state(const struct HsSimulator *sim,
                                     size_t index,
                                     struct HsSiteState *out);

// Writes unassociated densities `u_i` (`kappa` values) and associated densities `v_ij`
// (`kappa * kappa`, row-major) over the active sites.
//
// # Safety
// `u` must hold `u_len` values, `v` must hold `v_len` values.
enum HsStatus hs_simulator_densities(const struct HsSimulator *sim,
                                     double *u,
                                     size_t u_len,
                                     double *v,
                                     size_t v_len);

// Symmetric interior fixed point of the mean-field system, `kappa + kappa^2` values
// (`u` then row-major `v`).
//
// # Safety
// `out` must hold `len` values.
enum HsStatus hs_meanfield_equilibrium(size_t kappa,
                                       double a,
                                       double b,
                                       double g,
                                       double *out,
                                       size_t len);

// Integrates from `state` (length `kappa + kappa^2`) to `t_end` with RK4 step at most `dt`,
// writing the end state into `out`.
//
// # Safety
// `state` and `out` must each hold `kappa + kappa^2` values.
enum HsStatus hs_meanfield_integrate(size_t kappa,
                                     double a,
                                     double b,
                                     double g,
                                     const double *state,
                                     double t_end,
                                     double dt,
                                     double *out);

// Linear stability of a fixed point on the simplex. `class` receives 0 (stable),
// 1 (unstable) or 2 (marginal); `max_real` the largest real part of the eigenvalues.
//
// # Safety
// `state` must hold `kappa + kappa^2` values; `class` and `max_real` must be valid.
enum HsStatus hs_meanfield_stability(size_t kappa,
                                     double a,
                                     double b,
                                     double g,
                                     const double *state,
                                     int32_t *class_,
                                     double *max_real);

// Runs a configuration or manifest file and writes its outputs into `out_dir`.
//
// # Safety
// Both arguments must be valid NUL-terminated UTF-8 strings.
enum HsStatus hs_run_experiment_file(const char *path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOSTSYM_H */
