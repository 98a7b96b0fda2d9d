#ifndef NONSMOOTH_ADM_H
#define NONSMOOTH_ADM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum NsaStatus {
  NSA_STATUS_OK = 0,
  NSA_STATUS_NULL_POINTER = 1,
  NSA_STATUS_INVALID_ARGUMENT = 2,
  NSA_STATUS_DIMENSION_MISMATCH = 3,
  NSA_STATUS_SOLVER_FAILURE = 4,
  NSA_STATUS_SIMULATION_FAILURE = 5,
  NSA_STATUS_IO = 6,
  NSA_STATUS_PANIC = 7,
} NsaStatus;

// Controller built from a scenario; create with [`nsa_controller_new`].
typedef struct NsaController NsaController;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a
// successful one. Valid until the next call on the same thread.
const char *nsa_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *nsa_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void nsa_string_free(char *s);

// Builds the controller of a scenario (preset name, file path or inline
// JSON). The proxy starts at rest on the scenario's `q0`.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out` must be writable.
enum NsaStatus nsa_controller_new(const char *scenario, struct NsaController **out);

// Releases a controller. Null is ignored.
//
// # Safety
// `ctrl` must be null or a handle from [`nsa_controller_new`] not yet freed.
void nsa_controller_free(struct NsaController *ctrl);

// Number of joints.
//
// # Safety
// `ctrl` must be a live handle; `out` must be writable.
enum NsaStatus nsa_controller_dof(const struct NsaController *ctrl, size_t *out);

// Puts the proxy on `q` moving with `qd` and clears the integrator.
//
// # Safety
// `ctrl` must be a live handle; `q` and `qd` must hold `n` doubles.
enum NsaStatus nsa_controller_reset(struct NsaController *ctrl,
                                    const double *q,
                                    const double *qd,
                                    size_t n);

// One controller sample. `q` is the measured joint position, `fc` the
// joint-space contact torque and `fd` the desired joint torque; the
// commanded torque is written to `tau_out`. `saturated_out` may be null;
// otherwise it receives 1 for each clipped joint and 0 elsewhere. On
// failure the controller state is unchanged.
//
// # Safety
// `ctrl` must be a live handle; the arrays must hold `n` elements.
enum NsaStatus nsa_controller_step(struct NsaController *ctrl,
                                   const double *q,
                                   const double *fc,
                                   const double *fd,
                                   size_t n,
                                   double *tau_out,
                                   uint8_t *saturated_out);

// Current proxy position `q_x`.
//
// # Safety
// `ctrl` must be a live handle; `qx_out` must hold `n` doubles.
enum NsaStatus nsa_controller_proxy(const struct NsaController *ctrl, double *qx_out, size_t n);

// Runs a whole scenario and returns its metrics as a JSON string, to be
// released with [`nsa_string_free`].
//
// # Safety
// `scenario` must be a NUL-terminated string; `metrics_json_out` must be writable.
enum NsaStatus nsa_run_scenario(const char *scenario, char **metrics_json_out);

// Entrywise clamp of `y` to `[-limits_i, limits_i]`.
//
// # Safety
// `y`, `limits` and `out` must hold `n` doubles; `out` may alias `y`.
enum NsaStatus nsa_project_box(const double *y, const double *limits, size_t n, double *out);

// `argmin_x ||x - z||²/(2 index) + a||x|| + (b/2)||x||²`.
//
// # Safety
// `z` and `out` must hold `n` doubles; `out` may alias `z`.
enum NsaStatus nsa_prox_norm_quad(const double *z,
                                  size_t n,
                                  double index,
                                  double a,
                                  double b,
                                  double *out);

// One closed-form implicit STA sample for scalar `s`: writes `u_s` and
// the next integrator value.
//
// # Safety
// `u_out` and `v_out` must be writable.
enum NsaStatus nsa_sta_scalar_step(double s,
                                   double k2,
                                   double k3,
                                   double beta,
                                   double h,
                                   double v,
                                   double *u_out,
                                   double *v_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONSMOOTH_ADM_H */
