#ifndef RINGLATTICE_H
#define RINGLATTICE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_PARAMETER = 2,
  RL_STATUS_VALIDATION = 3,
  RL_STATUS_DEGENERATE_INPUT = 4,
  RL_STATUS_NUMERICAL = 5,
  RL_STATUS_DETECTION = 6,
  RL_STATUS_IO = 7,
  RL_STATUS_BUFFER_TOO_SMALL = 8,
  RL_STATUS_PANIC = 9,
} RlStatus;

typedef enum RlDriveKind {
  // `rate` is the ramp rate `s`.
  RL_DRIVE_KIND_RAMP = 0,
  // `rate` is the chirp constant `B`.
  RL_DRIVE_KIND_CHIRP = 1,
} RlDriveKind;

// Opaque model parameters.
typedef struct RlParams RlParams;

// Opaque sampled observable.
typedef struct RlTrace RlTrace;

typedef struct RlLzReport {
  double gamma;
  double t_lz;
  double phi_lz;
  double s_c;
  double adiabatic_margin;
} RlLzReport;

// Experiment settings; start from [`rl_experiment_spec_default`].
typedef struct RlExperimentSpec {
  enum RlDriveKind drive;
  double rate;
  double rotation_time;
  // 0 loads the exact ground state; otherwise a linear depth ramp.
  double load_time;
  // Only used with a chirp drive.
  double omega_dot;
  size_t grid_n;
  double dt;
  double sample_interval;
} RlExperimentSpec;

typedef struct RlSignature {
  double t_b;
  double peak_amplitude;
  double fwhm;
  size_t n_peaks;
} RlSignature;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated) and returns the length it needs, including the NUL. Returns 0
// when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rl_last_error_message(char *buf, size_t len);

void rl_clear_error(void);

// Library version as a static NUL-terminated string.
const char *rl_version(void);

// Dimensionless parameters (`ħ = 1`).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum RlStatus rl_params_new(double inertia, double depth, uint32_t l, struct RlParams **out);

// # Safety
// `params` must be null or a handle from [`rl_params_new`] not yet freed.
void rl_params_free(struct RlParams *params);

// # Safety
// `params` must be a live handle and `out` valid.
enum RlStatus rl_params_recoil_energy(const struct RlParams *params, double *out);

// Writes the lowest `n_bands` energies at quasi angular momentum `q`.
//
// # Safety
// `params` must be a live handle and `out` must hold `n_bands` doubles.
enum RlStatus rl_band_energies(const struct RlParams *params,
                               double q,
                               size_t n_bands,
                               double *out);

// # Safety
// `params` must be a live handle and `out` valid.
enum RlStatus rl_lz_analytics(const struct RlParams *params,
                              double ramp_rate,
                              struct RlLzReport *out);

struct RlExperimentSpec rl_experiment_spec_default(enum RlDriveKind drive,
                                                   double rate,
                                                   double rotation_time);

// Loads, rotates and returns the `⟨L_z⟩` trace.
//
// # Safety
// `params` must be a live handle, `spec` and `out` valid.
enum RlStatus rl_experiment_run(const struct RlParams *params,
                                const struct RlExperimentSpec *spec,
                                struct RlTrace **out);

// Wraps uniformly spaced `⟨L_z⟩` samples.
//
// # Safety
// `times` and `values` must hold `len` doubles; `out` must be valid.
enum RlStatus rl_trace_from_samples(const double *times,
                                    const double *values,
                                    size_t len,
                                    struct RlTrace **out);

// # Safety
// `trace` must be null or a live handle.
void rl_trace_free(struct RlTrace *trace);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live handle.
size_t rl_trace_len(const struct RlTrace *trace);

// # Safety
// `trace` must be a live handle and `out` must hold `len` doubles.
enum RlStatus rl_trace_times(const struct RlTrace *trace, double *out, size_t len);

// # Safety
// `trace` must be a live handle and `out` must hold `len` doubles.
enum RlStatus rl_trace_values(const struct RlTrace *trace, double *out, size_t len);

// Time derivative of an `⟨L_z⟩` trace as a new handle.
//
// # Safety
// `trace` must be a live handle and `out` valid.
enum RlStatus rl_trace_derivative(const struct RlTrace *trace, struct RlTrace **out);

// Bloch period, peak height and width from a derivative trace. A
// non-positive `threshold_factor` selects the default.
//
// # Safety
// `deriv` must be a live handle and `out` valid.
enum RlStatus rl_detect_signature(const struct RlTrace *deriv,
                                  double threshold_factor,
                                  struct RlSignature *out);

// Moment of inertia and lattice depth from a chirp run.
//
// # Safety
// `inertia` and `depth` must be valid.
enum RlStatus rl_calibrate(double t_b,
                           double peak_amplitude,
                           double chirp_rate,
                           uint32_t l,
                           double hbar,
                           double *inertia,
                           double *depth);

// External angular acceleration from two chirp runs.
//
// # Safety
// `out` must be valid.
enum RlStatus rl_sense(double chirp_1,
                       double t_b_1,
                       double chirp_2,
                       double t_b_2,
                       uint32_t l,
                       double *out);

// Ground-state fidelity after a linear depth ramp of duration `load_time`.
//
// # Safety
// `params` must be a live handle and `out` valid.
enum RlStatus rl_loading_fidelity(const struct RlParams *params,
                                  double load_time,
                                  size_t grid_n,
                                  double dt,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RINGLATTICE_H */
