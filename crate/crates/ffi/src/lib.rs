//! C ABI over the qpsim core.
//!
//! Every fallible call returns a [`QpsimStatus`] and writes its result through
//! an out-pointer. On failure the message is kept per thread and can be read
//! with [`qpsim_last_error`]. Panics never cross the boundary; they surface as
//! [`QpsimStatus::Panic`].
//!
//! Fock states live behind the opaque [`QpsimState`] handle, created by
//! [`qpsim_state_vacuum`] and released with [`qpsim_state_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qpsim::circuits::ProjectorSetting;
use qpsim::estimation::{bitstrings, gme_concurrence_bound, witness_value, MeasurementRecord};
use qpsim::fock::{apply_transform, click_probability, post_select, DetectionPattern, LinearTransform, OccupationState, PureState, Slot};
use qpsim::protocols::{run_teleportation, BellProjection, NoiseKnobs};
use qpsim::source::{amzi_fsr_ghz, fsr_ghz, heralding_eff_corrected, RingParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Panic = 4,
}

/// Opaque Fock-state handle.
pub struct QpsimState {
    inner: PureState,
}

struct Failure {
    status: QpsimStatus,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            status: QpsimStatus::InvalidArgument,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            status: QpsimStatus::Numeric,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Self {
            status: QpsimStatus::NullPointer,
            message: format!("{what} is null"),
        }
    }
}

impl From<qpsim::fock::FockError> for Failure {
    fn from(e: qpsim::fock::FockError) -> Self {
        Failure::invalid(e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QpsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpsimStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            QpsimStatus::Panic
        }
    }
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    // SAFETY: non-null, and the caller guarantees it points to writable storage for T.
    unsafe { out.write(value) };
    Ok(())
}

/// Borrows `len` elements; a null pointer is allowed only for an empty slice.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    // SAFETY: the caller guarantees `p` points to `len` initialized elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn state_mut<'a>(s: *mut QpsimState) -> Result<&'a mut QpsimState, Failure> {
    // SAFETY: the caller guarantees a live handle from `qpsim_state_vacuum`.
    unsafe { s.as_mut() }.ok_or_else(|| Failure::null("state"))
}

unsafe fn state_ref<'a>(s: *const QpsimState) -> Result<&'a QpsimState, Failure> {
    // SAFETY: as for `state_mut`.
    unsafe { s.as_ref() }.ok_or_else(|| Failure::null("state"))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qpsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qpsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Vacuum over `modes` spatial modes, or null when `modes` is zero.
#[no_mangle]
pub extern "C" fn qpsim_state_vacuum(modes: usize) -> *mut QpsimState {
    if modes == 0 {
        set_last_error("a state needs at least one mode");
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(QpsimState {
        inner: PureState::vacuum(modes),
    }))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `state` must be null or a handle from [`qpsim_state_vacuum`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_free(state: *mut QpsimState) {
    if !state.is_null() {
        // SAFETY: ownership returns from the caller, per the contract above.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Adds one photon (spectral label 0) to `mode` and renormalizes.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_add_photon(state: *mut QpsimState, mode: usize) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_mut(state) }?;
        let next = s.inner.create(Slot::new(mode, 0), Complex64::new(1.0, 0.0))?.normalize()?;
        s.inner = next;
        Ok(())
    })
}

/// Applies a `k×k` unitary given row-major as `re`/`im` to the modes `mode_map[0..k]`.
///
/// # Safety
/// `state` must be a live handle; `re` and `im` must hold `k*k` doubles and `mode_map` `k` entries.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_apply_unitary(
    state: *mut QpsimState,
    re: *const f64,
    im: *const f64,
    k: usize,
    mode_map: *const usize,
) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_mut(state) }?;
        if k == 0 {
            return Err(Failure::invalid("empty transform"));
        }
        let re = unsafe { slice(re, k * k, "re") }?;
        let im = unsafe { slice(im, k * k, "im") }?;
        let map = unsafe { slice(mode_map, k, "mode_map") }?;
        let rows: Vec<Vec<Complex64>> =
            (0..k).map(|i| (0..k).map(|j| Complex64::new(re[i * k + j], im[i * k + j])).collect()).collect();
        let refs: Vec<&[Complex64]> = rows.iter().map(Vec::as_slice).collect();
        let u = LinearTransform::from_rows(&refs)?;
        s.inner = apply_transform(&s.inner, &u, map)?;
        Ok(())
    })
}

/// Squared norm of the state.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_norm_sqr(state: *const QpsimState, out: *mut f64) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_ref(state) }?;
        write_out(out, s.inner.norm_sqr())
    })
}

/// `|⟨n|ψ⟩|²` for the label-0 Fock state with `counts[m]` photons in mode `m`.
///
/// # Safety
/// `state` must be a live handle, `counts` must hold `modes` entries and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_probability(
    state: *const QpsimState,
    counts: *const u32,
    modes: usize,
    out: *mut f64,
) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_ref(state) }?;
        let counts = unsafe { slice(counts, modes, "counts") }?;
        if modes != s.inner.mode_count() {
            return Err(Failure::invalid(format!("{modes} counts for {} modes", s.inner.mode_count())));
        }
        let occ = OccupationState::new(counts.iter().enumerate().map(|(m, &n)| (Slot::new(m, 0), n)));
        write_out(out, s.inner.amplitude(&occ).norm_sqr())
    })
}

unsafe fn threshold_pattern(
    clicks: *const usize,
    n_clicks: usize,
    dark: *const usize,
    n_dark: usize,
) -> Result<DetectionPattern, Failure> {
    let c = unsafe { slice(clicks, n_clicks, "clicks") }?;
    let d = unsafe { slice(dark, n_dark, "dark") }?;
    Ok(DetectionPattern::clicks(c, d)?)
}

/// Conditions the state on threshold clicks in `clicks` and no light in `dark`.
/// Writes the selection probability; the state becomes the normalized conditional state.
/// A zero-probability pattern leaves the state unchanged and reports `Numeric`.
///
/// # Safety
/// `state` must be a live handle; the arrays must hold the given counts; `probability` writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_post_select(
    state: *mut QpsimState,
    clicks: *const usize,
    n_clicks: usize,
    dark: *const usize,
    n_dark: usize,
    probability: *mut f64,
) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_mut(state) }?;
        let pattern = unsafe { threshold_pattern(clicks, n_clicks, dark, n_dark) }?;
        let (next, p) = post_select(&s.inner, &pattern)?;
        write_out(probability, p)?;
        if p == 0.0 {
            return Err(Failure::numeric("pattern has zero probability"));
        }
        s.inner = next;
        Ok(())
    })
}

/// Probability of a threshold pattern with per-mode detection efficiencies.
///
/// # Safety
/// `state` must be a live handle; `efficiency` must hold one entry per mode; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_state_click_probability(
    state: *const QpsimState,
    clicks: *const usize,
    n_clicks: usize,
    dark: *const usize,
    n_dark: usize,
    efficiency: *const f64,
    out: *mut f64,
) -> QpsimStatus {
    guard(|| {
        let s = unsafe { state_ref(state) }?;
        let pattern = unsafe { threshold_pattern(clicks, n_clicks, dark, n_dark) }?;
        let eta = unsafe { slice(efficiency, s.inner.mode_count(), "efficiency") }?;
        write_out(out, click_probability(&s.inner, &pattern, eta)?)
    })
}

fn ring(radius_um: f64, group_index: f64, tau: f64, alpha: f64) -> Result<RingParams, Failure> {
    let p = RingParams {
        tau,
        alpha,
        radius_um,
        group_index,
        lambda_res_nm: 1550.0,
    };
    p.validate().map_err(|e| Failure::invalid(e.to_string()))?;
    Ok(p)
}

/// Free spectral range of a ring of radius `radius_um` and group index `group_index`, in GHz.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_ring_fsr_ghz(radius_um: f64, group_index: f64, out: *mut f64) -> QpsimStatus {
    guard(|| write_out(out, fsr_ghz(&ring(radius_um, group_index, 0.9, 0.9)?)))
}

/// Free spectral range of an unbalanced interferometer with path difference `delta_l_um`, in GHz.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_amzi_fsr_ghz(delta_l_um: f64, group_index: f64, out: *mut f64) -> QpsimStatus {
    guard(|| write_out(out, amzi_fsr_ghz(delta_l_um, group_index).map_err(|e| Failure::invalid(e.to_string()))?))
}

/// Intrinsic heralding efficiency from self-coupling `tau` and round-trip transmission `alpha`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_heralding_efficiency(tau: f64, alpha: f64, out: *mut f64) -> QpsimStatus {
    guard(|| {
        let v = heralding_eff_corrected(&ring(1.0, 1.0, tau, alpha)?).map_err(|e| Failure::invalid(e.to_string()))?;
        write_out(out, v)
    })
}

/// Expectation of the GHZ projector witness for a state of GHZ fidelity `fidelity`.
#[no_mangle]
pub extern "C" fn qpsim_witness_value(fidelity: f64) -> f64 {
    witness_value(fidelity)
}

/// GME-concurrence lower bound from σz⊗n and σx⊗n outcome weights, each of
/// length `2^n` indexed with qubit 1 as the most significant bit. `n` is 3 or 4.
///
/// # Safety
/// `z` and `x` must hold `2^n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_gme_concurrence_bound(n: usize, z: *const f64, x: *const f64, out: *mut f64) -> QpsimStatus {
    guard(|| {
        if !(3..=4).contains(&n) {
            return Err(Failure::invalid(format!("GHZ size {n}, expected 3 or 4")));
        }
        let z = unsafe { slice(z, 1 << n, "z") }?;
        let x = unsafe { slice(x, 1 << n, "x") }?;
        let rec = |setting: ProjectorSetting, w: &[f64]| {
            MeasurementRecord::new(vec![setting; n], bitstrings(n).into_iter().zip(w.iter().copied()).collect())
                .map_err(|e| Failure::invalid(e.to_string()))
        };
        let zr = rec(ProjectorSetting::sigma_z(), z)?;
        let xr = rec(ProjectorSetting::sigma_x(), x)?;
        let v = gme_concurrence_bound(n, &zr, &xr).map_err(|e| Failure::invalid(e.to_string()))?;
        write_out(out, v)
    })
}

/// Fidelity of noiseless teleportation of the state prepared by `(theta, phi)`,
/// heralded on `Ψ⁺` (`psi_minus == 0`) or `Ψ⁻` (otherwise).
///
/// # Safety
/// `fidelity` and `success` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qpsim_teleport_ideal(
    theta: f64,
    phi: f64,
    psi_minus: i32,
    fidelity: *mut f64,
    success: *mut f64,
) -> QpsimStatus {
    guard(|| {
        if !(theta.is_finite() && phi.is_finite()) {
            return Err(Failure::invalid("angles must be finite"));
        }
        let proj = if psi_minus == 0 {
            BellProjection::PsiPlus
        } else {
            BellProjection::PsiMinus
        };
        let r = run_teleportation(ProjectorSetting::new(theta, phi), proj, &NoiseKnobs::ideal(), 0, 0)
            .map_err(|e| Failure::numeric(e.to_string()))?;
        write_out(fidelity, r.fidelity)?;
        write_out(success, r.success_probability)
    })
}
