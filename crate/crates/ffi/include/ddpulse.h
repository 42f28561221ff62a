#ifndef DDPULSE_H
#define DDPULSE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum DdStatus {
  DD_STATUS_OK = 0,
  DD_STATUS_NULL_POINTER = 1,
  DD_STATUS_INVALID_ARGUMENT = 2,
  DD_STATUS_PARSE = 3,
  DD_STATUS_NUMERICAL = 4,
  DD_STATUS_BUFFER_TOO_SMALL = 5,
  DD_STATUS_NOT_CONVERGED = 6,
  DD_STATUS_PANIC = 7,
} DdStatus;

// Opaque bath: spectral density, temperature, mode and quadrature settings.
typedef struct DdBath DdBath;

// Opaque pulse sequence.
typedef struct DdSequence DdSequence;

typedef struct DdComplex {
  double re;
  double im;
} DdComplex;

// Signal at one instant; `deviation` is `1 - s`.
typedef struct DdSignalPoint {
  double t;
  double chi;
  double phi;
  double s;
  double deviation;
} DdSignalPoint;

// Summary of a general-bath vanishing check.
typedef struct DdOrderReport {
  bool passed;
  bool exact_zeros;
  // Zero for rational arithmetic.
  uint32_t digits;
  double odd_max;
  double even_max;
  double separation;
} DdOrderReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *dd_version(void);

// Copy the last error message of this thread into `buf`.
//
// Returns the message length excluding the terminator; the copy is
// truncated to `capacity - 1` bytes. Returns 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `capacity` writable bytes.
size_t dd_last_error_message(char *buf, size_t capacity);

// Parse a spec such as `udd:10`, `cdd:4` or `custom:0.2,0.7`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be writable.
enum DdStatus dd_sequence_parse(const char *spec, struct DdSequence **out);

// Build a sequence from `len` strictly increasing instants in `(0, 1)`.
//
// # Safety
// `deltas` must address `len` doubles; `out` must be writable.
enum DdStatus dd_sequence_custom(const double *deltas, size_t len, struct DdSequence **out);

// Release a sequence. Null is ignored.
//
// # Safety
// `seq` must come from this library and not be used afterwards.
void dd_sequence_free(struct DdSequence *seq);

// Number of pulses, 0 for a null handle.
//
// # Safety
// `seq` must be null or a live handle.
size_t dd_sequence_len(const struct DdSequence *seq);

// Copy the pulse instants into `out`, which must hold `dd_sequence_len` values.
//
// # Safety
// `seq` must be a live handle; `out` must address `capacity` doubles.
enum DdStatus dd_sequence_deltas(const struct DdSequence *seq, double *out, size_t capacity);

// Filter function `y(z)`.
//
// # Safety
// `seq` must be a live handle; `out` must be writable.
enum DdStatus dd_filter_y(const struct DdSequence *seq, double z, struct DdComplex *out);

// Order-`m` residual `(-1)^(n+1) + 2 sum_j (-1)^j d_j^m`.
//
// # Safety
// `seq` must be a live handle; `out` must be writable.
enum DdStatus dd_residual(const struct DdSequence *seq, uint32_t m, double *out);

// Create a bath. `gamma = INFINITY` selects a hard cutoff, `beta = INFINITY`
// zero temperature.
//
// # Safety
// `out` must be writable.
enum DdStatus dd_bath_new(double alpha,
                          double omega_d,
                          double gamma,
                          double beta,
                          bool classical,
                          struct DdBath **out);

// Override the quadrature tolerances of a bath.
//
// # Safety
// `bath` must be a live handle.
enum DdStatus dd_bath_set_tolerance(struct DdBath *bath, double abs_tol, double rel_tol);

// Release a bath. Null is ignored.
//
// # Safety
// `bath` must come from this library and not be used afterwards.
void dd_bath_free(struct DdBath *bath);

// Signal at time `t` (in units of `1 / omega_d` when `omega_d = 1`).
//
// # Safety
// Handles must be live; `out` must be writable.
enum DdStatus dd_signal(const struct DdSequence *seq,
                        const struct DdBath *bath,
                        double t,
                        struct DdSignalPoint *out);

// Signal at each of `len` times, written to `out[0..len]`.
//
// # Safety
// Handles must be live; `times` and `out` must address `len` elements.
enum DdStatus dd_curve(const struct DdSequence *seq,
                       const struct DdBath *bath,
                       const double *times,
                       size_t len,
                       struct DdSignalPoint *out);

// Solve the order conditions for `n` pulses by Newton iteration.
//
// `start` may be null for the default start. The solution is written to
// `out[0..n]` even when the iteration does not converge, in which case
// [`DdStatus::NotConverged`] is returned.
//
// # Safety
// `start` must be null or address `n` doubles; `out` must address `n` doubles.
enum DdStatus dd_solve_order_conditions(size_t n,
                                        const double *start,
                                        double ftol,
                                        double *out,
                                        size_t *iterations);

// Check that odd-checksum general-bath coefficients up to `max_len` vanish.
//
// `digits = 0` picks exact arithmetic when possible and a default precision
// otherwise. A failed check still returns [`DdStatus::Ok`] with
// `passed = false`.
//
// # Safety
// `seq` must be a live handle; `out` must be writable.
enum DdStatus dd_verify_order(const struct DdSequence *seq,
                              size_t max_len,
                              uint32_t digits,
                              struct DdOrderReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDPULSE_H */
