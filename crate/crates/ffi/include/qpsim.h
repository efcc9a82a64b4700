#ifndef QPSIM_H
#define QPSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum QpsimStatus {
  QPSIM_STATUS_OK = 0,
  QPSIM_STATUS_NULL_POINTER = 1,
  QPSIM_STATUS_INVALID_ARGUMENT = 2,
  QPSIM_STATUS_NUMERIC = 3,
  QPSIM_STATUS_PANIC = 4,
} QpsimStatus;

// Opaque Fock-state handle.
typedef struct QpsimState QpsimState;

// Message of the last failed call on this thread, or null if none failed.
// The pointer stays valid until the next failing call on the same thread.
const char *qpsim_last_error(void);

// Library version as a static NUL-terminated string.
const char *qpsim_version(void);

// Vacuum over `modes` spatial modes, or null when `modes` is zero.
struct QpsimState *qpsim_state_vacuum(uintptr_t modes);

// Releases a handle. Null is ignored.
//
// # Safety
// `state` must be null or a handle from [`qpsim_state_vacuum`] not yet freed.
void qpsim_state_free(struct QpsimState *state);

// Adds one photon (spectral label 0) to `mode` and renormalizes.
//
// # Safety
// `state` must be a live handle.
enum QpsimStatus qpsim_state_add_photon(struct QpsimState *state, uintptr_t mode);

// Applies a `k×k` unitary given row-major as `re`/`im` to the modes `mode_map[0..k]`.
//
// # Safety
// `state` must be a live handle; `re` and `im` must hold `k*k` doubles and `mode_map` `k` entries.
enum QpsimStatus qpsim_state_apply_unitary(struct QpsimState *state,
                                           const double *re,
                                           const double *im,
                                           uintptr_t k,
                                           const uintptr_t *mode_map);

// Squared norm of the state.
//
// # Safety
// `state` must be a live handle and `out` writable.
enum QpsimStatus qpsim_state_norm_sqr(const struct QpsimState *state, double *out);

// `|⟨n|ψ⟩|²` for the label-0 Fock state with `counts[m]` photons in mode `m`.
//
// # Safety
// `state` must be a live handle, `counts` must hold `modes` entries and `out` be writable.
enum QpsimStatus qpsim_state_probability(const struct QpsimState *state,
                                         const uint32_t *counts,
                                         uintptr_t modes,
                                         double *out);

// Conditions the state on threshold clicks in `clicks` and no light in `dark`.
// Writes the selection probability; the state becomes the normalized conditional state.
// A zero-probability pattern leaves the state unchanged and reports `Numeric`.
//
// # Safety
// `state` must be a live handle; the arrays must hold the given counts; `probability` writable.
enum QpsimStatus qpsim_state_post_select(struct QpsimState *state,
                                         const uintptr_t *clicks,
                                         uintptr_t n_clicks,
                                         const uintptr_t *dark,
                                         uintptr_t n_dark,
                                         double *probability);

// Probability of a threshold pattern with per-mode detection efficiencies.
//
// # Safety
// `state` must be a live handle; `efficiency` must hold one entry per mode; `out` writable.
enum QpsimStatus qpsim_state_click_probability(const struct QpsimState *state,
                                               const uintptr_t *clicks,
                                               uintptr_t n_clicks,
                                               const uintptr_t *dark,
                                               uintptr_t n_dark,
                                               const double *efficiency,
                                               double *out);

// Free spectral range of a ring of radius `radius_um` and group index `group_index`, in GHz.
//
// # Safety
// `out` must be writable.
enum QpsimStatus qpsim_ring_fsr_ghz(double radius_um, double group_index, double *out);

// Free spectral range of an unbalanced interferometer with path difference `delta_l_um`, in GHz.
//
// # Safety
// `out` must be writable.
enum QpsimStatus qpsim_amzi_fsr_ghz(double delta_l_um, double group_index, double *out);

// Intrinsic heralding efficiency from self-coupling `tau` and round-trip transmission `alpha`.
//
// # Safety
// `out` must be writable.
enum QpsimStatus qpsim_heralding_efficiency(double tau, double alpha, double *out);

// Expectation of the GHZ projector witness for a state of GHZ fidelity `fidelity`.
double qpsim_witness_value(double fidelity);

// GME-concurrence lower bound from σz⊗n and σx⊗n outcome weights, each of
// length `2^n` indexed with qubit 1 as the most significant bit. `n` is 3 or 4.
//
// # Safety
// `z` and `x` must hold `2^n` doubles; `out` must be writable.
enum QpsimStatus qpsim_gme_concurrence_bound(uintptr_t n,
                                             const double *z,
                                             const double *x,
                                             double *out);

// Fidelity of noiseless teleportation of the state prepared by `(theta, phi)`,
// heralded on `Ψ⁺` (`psi_minus == 0`) or `Ψ⁻` (otherwise).
//
// # Safety
// `fidelity` and `success` must be writable.
enum QpsimStatus qpsim_teleport_ideal(double theta,
                                      double phi,
                                      int32_t psi_minus,
                                      double *fidelity,
                                      double *success);

#endif  /* QPSIM_H */
