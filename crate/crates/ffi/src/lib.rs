//! C ABI over `cdspec`.
//!
//! Objects are opaque handles created by `*_new`/builder functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CdspecStatus`]; on failure the message is kept per thread and can be read
//! with [`cdspec_last_error`]. Complex arrays use [`CdspecComplex`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cdspec::gabor::{GaborSystem, Grid, SampledFunction};
use cdspec::harness::{build_matrix, MatrixFamily, MatrixSpec};
use cdspec::sjostrand::{lower_bound, neumann_inverse_envelope, stability_transfer, EpsSweep, NeumannOptions, TransferOptions};
use cdspec::weyl::{self, SampledSymbol, SymbolGrid};
use cdspec::{CDMatrix, CdError, Seq};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdspecStatus {
    Ok = 0,
    NullPointer = 1,
    Parameter = 2,
    EpsilonSearchFailed = 3,
    BudgetExceeded = 4,
    Singular = 5,
    NotAFrame = 6,
    DimensionMismatch = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CdspecComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for CdspecComplex {
    fn from(z: Complex64) -> Self {
        CdspecComplex { re: z.re, im: z.im }
    }
}

impl From<CdspecComplex> for Complex64 {
    fn from(z: CdspecComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Convolution-dominated matrix on a truncated integer lattice.
pub struct CdspecMatrix(CDMatrix);

/// Gabor system on a periodic grid.
pub struct CdspecGabor(GaborSystem);

/// Weyl symbol sampled on the symbol grid of a function grid.
pub struct CdspecSymbol(SampledSymbol);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &CdError) -> CdspecStatus {
    match e {
        CdError::Parameter(_) | CdError::Parse(_) => CdspecStatus::Parameter,
        CdError::EpsilonSearchFailed { .. } => CdspecStatus::EpsilonSearchFailed,
        CdError::BudgetExceeded { .. } => CdspecStatus::BudgetExceeded,
        CdError::Singular { .. } => CdspecStatus::Singular,
        CdError::NotAFrame { .. } | CdError::NotTight { .. } => CdspecStatus::NotAFrame,
        CdError::DimensionMismatch(..) | CdError::IndexMismatch { .. } | CdError::GridMismatch(_) => CdspecStatus::DimensionMismatch,
        _ => CdspecStatus::Other,
    }
}

enum Fail {
    Null,
    Len(usize, usize),
    Cd(CdError),
}

impl From<CdError> for Fail {
    fn from(e: CdError) -> Self {
        Fail::Cd(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CdspecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            CdspecStatus::Ok
        }
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            CdspecStatus::NullPointer
        }
        Ok(Err(Fail::Len(want, got))) => {
            set_error(format!("buffer length {got}, expected {want}"));
            CdspecStatus::DimensionMismatch
        }
        Ok(Err(Fail::Cd(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CdspecStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null)
}

unsafe fn slice<'a, T>(p: *const T, n: usize, want: usize) -> Result<&'a [T], Fail> {
    if n != want {
        return Err(Fail::Len(want, n));
    }
    if p.is_null() {
        return if n == 0 { Ok(&[]) } else { Err(Fail::Null) };
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, want: usize) -> Result<&'a mut [T], Fail> {
    if n != want {
        return Err(Fail::Len(want, n));
    }
    if p.is_null() {
        return if n == 0 { Ok(&mut []) } else { Err(Fail::Null) };
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn boxed<T>(v: T, dst: &mut *mut T) {
    *dst = Box::into_raw(Box::new(v));
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next `cdspec_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cdspec_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn cdspec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// `I + coupling·T` on `Z^dim ∩ B(0, radius)` with `T(k) = e^{−decay|k|}`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_toeplitz_exp(dim: usize, radius: f64, coupling: f64, decay: f64, out_m: *mut *mut CdspecMatrix) -> CdspecStatus {
    guard(|| {
        let dst = out(out_m)?;
        let spec = MatrixSpec {
            family: MatrixFamily::ToeplitzExp,
            dim,
            coupling,
            decay,
        };
        if dim == 0 || !(radius > 0.0) || !coupling.is_finite() || !(decay > 0.0) {
            return Err(CdError::Parameter("dim >= 1, radius > 0, finite coupling, decay > 0 required".into()).into());
        }
        boxed(CdspecMatrix(build_matrix(&spec, radius)?), dst);
        Ok(())
    })
}

/// Matrix with row-major `entries` (`n·n` values) on the same lattice as
/// `cdspec_matrix_toeplitz_exp` would use for `dim` and `radius`.
///
/// # Safety
/// `entries` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_from_entries(
    dim: usize,
    radius: f64,
    entries: *const CdspecComplex,
    len: usize,
    out_m: *mut *mut CdspecMatrix,
) -> CdspecStatus {
    guard(|| {
        let dst = out(out_m)?;
        let spec = MatrixSpec {
            family: MatrixFamily::Identity,
            dim,
            coupling: 0.0,
            decay: 1.0,
        };
        if dim == 0 || !(radius > 0.0) {
            return Err(CdError::Parameter("dim >= 1 and radius > 0 required".into()).into());
        }
        let id = build_matrix(&spec, radius)?;
        let n = id.shape().0;
        let e = slice(entries, len, n * n)?;
        let m = cdspec::linalg::CMat::from_fn(n, n, |i, j| e[i * n + j].into());
        boxed(CdspecMatrix(id.with_entries(m)?), dst);
        Ok(())
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_free(m: *mut CdspecMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of lattice points (rows and columns).
///
/// # Safety
/// `m` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_size(m: *const CdspecMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.shape().0)
}

/// `y = A x`; both buffers hold `n` values.
///
/// # Safety
/// Buffers must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_apply(m: *const CdspecMatrix, x: *const CdspecComplex, y: *mut CdspecComplex, n: usize) -> CdspecStatus {
    guard(|| {
        let a = &obj(m)?.0;
        let k = a.shape().0;
        let xs: Vec<Complex64> = slice(x, n, k)?.iter().map(|&z| z.into()).collect();
        let ys = slice_mut(y, n, k)?;
        for (o, v) in ys.iter_mut().zip(a.apply_slice(&xs)) {
            *o = v.into();
        }
        Ok(())
    })
}

/// Schur-test upper bound for `‖A‖_{p→p}`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_schur_bound(m: *const CdspecMatrix, p: f64, out_v: *mut f64) -> CdspecStatus {
    guard(|| {
        let a = &obj(m)?.0;
        let dst = out(out_v)?;
        if !(p > 0.0) {
            return Err(CdError::Parameter("p must be positive".into()).into());
        }
        *dst = a.schur_test_bound(p);
        Ok(())
    })
}

/// Lower bound `C0` with `‖Ac‖_p >= C0‖c‖_p` (exact for p = 2).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_matrix_lower_bound(m: *const CdspecMatrix, p: f64, starts: usize, seed: u64, out_v: *mut f64) -> CdspecStatus {
    guard(|| {
        let a = &obj(m)?.0;
        let dst = out(out_v)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        *dst = lower_bound(a, p, starts.max(1), &mut rng)?.value;
        Ok(())
    })
}

/// Transfers a lower bound `c0` at `p` to exponent `q`. Writes the certified
/// constant and the chosen ε.
///
/// # Safety
/// Pointers must be valid; `out_eps` may be null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_stability_transfer(
    m: *const CdspecMatrix,
    p: f64,
    c0: f64,
    q: f64,
    threshold: f64,
    eps_floor: f64,
    out_constant: *mut f64,
    out_eps: *mut f64,
) -> CdspecStatus {
    guard(|| {
        let a = &obj(m)?.0;
        let dst = out(out_constant)?;
        let opts = TransferOptions {
            sweep: EpsSweep { threshold, floor: eps_floor },
            starts: 64,
            seed: 0,
            trust_c0: true,
        };
        let cert = stability_transfer(a, p, c0, q, &opts)?;
        *dst = cert.constant;
        if let Some(e) = out_eps.as_mut() {
            *e = cert.eps_chosen;
        }
        Ok(())
    })
}

/// Neumann envelope of `A^{-1}`; writes the amalgam quasi-norm of
/// `H̃^{1/p0}` sampled at `step` and the number of interior violations.
///
/// # Safety
/// Pointers must be valid; `out_violations` may be null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_inverse_envelope(
    m: *const CdspecMatrix,
    p: f64,
    p0: f64,
    c0: f64,
    step: f64,
    out_amalgam: *mut f64,
    out_violations: *mut usize,
) -> CdspecStatus {
    guard(|| {
        let a = &obj(m)?.0;
        let dst = out(out_amalgam)?;
        let env = neumann_inverse_envelope(a, p, p0, c0, &NeumannOptions::default())?;
        *dst = env.to_envelope(step)?.amalgam_quasinorm(p0)?;
        if let Some(v) = out_violations.as_mut() {
            *v = cdspec::sjostrand::verify_inverse_envelope(a, &env)?.violations;
        }
        Ok(())
    })
}

/// Gabor system with the unit Gaussian window on the grid of step `step`
/// and radius `radius`; lattice `αZ × βZ`.
///
/// # Safety
/// `out_g` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_gaussian(step: f64, radius: f64, alpha: f64, beta: f64, out_g: *mut *mut CdspecGabor) -> CdspecStatus {
    guard(|| {
        let dst = out(out_g)?;
        let grid = Grid::new(step, radius)?;
        boxed(CdspecGabor(GaborSystem::new(&SampledFunction::gaussian(grid), alpha, beta)?), dst);
        Ok(())
    })
}

/// Gabor system with a caller-supplied window of `len` grid samples.
///
/// # Safety
/// `window` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_new(
    step: f64,
    radius: f64,
    window: *const CdspecComplex,
    len: usize,
    alpha: f64,
    beta: f64,
    out_g: *mut *mut CdspecGabor,
) -> CdspecStatus {
    guard(|| {
        let dst = out(out_g)?;
        let grid = Grid::new(step, radius)?;
        let w = slice(window, len, grid.len())?.iter().map(|&z| z.into()).collect();
        boxed(CdspecGabor(GaborSystem::new(&SampledFunction::new(grid, w)?, alpha, beta)?), dst);
        Ok(())
    })
}

/// Canonical tight system `S^{-1/2}g` of `g`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_tight(g: *const CdspecGabor, out_g: *mut *mut CdspecGabor) -> CdspecStatus {
    guard(|| {
        let sys = &obj(g)?.0;
        let dst = out(out_g)?;
        boxed(CdspecGabor(sys.tight_system()?), dst);
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_free(g: *mut CdspecGabor) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Grid samples per function.
///
/// # Safety
/// `g` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_grid_len(g: *const CdspecGabor) -> usize {
    g.as_ref().map_or(0, |g| g.0.grid().len())
}

/// Number of atoms.
///
/// # Safety
/// `g` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_len(g: *const CdspecGabor) -> usize {
    g.as_ref().map_or(0, |g| g.0.len())
}

/// Optimal frame bounds.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_frame_bounds(g: *const CdspecGabor, lower: *mut f64, upper: *mut f64) -> CdspecStatus {
    guard(|| {
        let b = obj(g)?.0.frame_bounds();
        *out(lower)? = b.lower;
        *out(upper)? = b.upper;
        Ok(())
    })
}

/// Coefficients `⟨f, π(λ)g⟩`; `f` has `grid_len` values, `c` has `len`.
///
/// # Safety
/// Buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_analysis(
    g: *const CdspecGabor,
    f: *const CdspecComplex,
    f_len: usize,
    c: *mut CdspecComplex,
    c_len: usize,
) -> CdspecStatus {
    guard(|| {
        let sys = &obj(g)?.0;
        let grid = *sys.grid();
        let fv = slice(f, f_len, grid.len())?.iter().map(|&z| z.into()).collect();
        let coeffs = sys.analysis(&SampledFunction::new(grid, fv)?)?;
        for (o, v) in slice_mut(c, c_len, sys.len())?.iter_mut().zip(coeffs.values()) {
            *o = (*v).into();
        }
        Ok(())
    })
}

/// `Σ c_λ π(λ)g`; inverse buffer shapes of [`cdspec_gabor_analysis`].
///
/// # Safety
/// Buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_synthesis(
    g: *const CdspecGabor,
    c: *const CdspecComplex,
    c_len: usize,
    f: *mut CdspecComplex,
    f_len: usize,
) -> CdspecStatus {
    guard(|| {
        let sys = &obj(g)?.0;
        let cv = slice(c, c_len, sys.len())?.iter().map(|&z| z.into()).collect();
        let seq = Seq::new(Arc::clone(sys.lattice()), cv)?;
        let fun = sys.synthesis(&seq)?;
        for (o, v) in slice_mut(f, f_len, sys.grid().len())?.iter_mut().zip(fun.samples()) {
            *o = (*v).into();
        }
        Ok(())
    })
}

/// Canonical dual window, `grid_len` values.
///
/// # Safety
/// `out_w` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_gabor_dual_window(g: *const CdspecGabor, out_w: *mut CdspecComplex, len: usize) -> CdspecStatus {
    guard(|| {
        let sys = &obj(g)?.0;
        let w = sys.dual_window()?;
        for (o, v) in slice_mut(out_w, len, sys.grid().len())?.iter_mut().zip(w.samples()) {
            *o = (*v).into();
        }
        Ok(())
    })
}

/// Symbol grid size for functions on the grid `(step, radius)`:
/// `nx` positions by `nxi` frequencies, row-major by position.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cdspec_symbol_shape(step: f64, radius: f64, nx: *mut usize, nxi: *mut usize) -> CdspecStatus {
    guard(|| {
        let sg = SymbolGrid::weyl(&Grid::new(step, radius)?);
        *out(nx)? = sg.nx;
        *out(nxi)? = sg.nxi;
        Ok(())
    })
}

/// Symbol from `nx·nxi` row-major samples.
///
/// # Safety
/// `values` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_symbol_new(step: f64, radius: f64, values: *const CdspecComplex, len: usize, out_s: *mut *mut CdspecSymbol) -> CdspecStatus {
    guard(|| {
        let dst = out(out_s)?;
        let grid = Grid::new(step, radius)?;
        let sg = SymbolGrid::weyl(&grid);
        let v = slice(values, len, sg.nx * sg.nxi)?.iter().map(|&z| z.into()).collect();
        boxed(CdspecSymbol(SampledSymbol::new(grid, sg, v)?), dst);
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cdspec_symbol_free(s: *mut CdspecSymbol) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copies the samples out; `len` must be `nx·nxi`.
///
/// # Safety
/// `dst` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_symbol_values(s: *const CdspecSymbol, dst: *mut CdspecComplex, len: usize) -> CdspecStatus {
    guard(|| {
        let a = &obj(s)?.0;
        for (o, v) in slice_mut(dst, len, a.values().len())?.iter_mut().zip(a.values()) {
            *o = (*v).into();
        }
        Ok(())
    })
}

/// `a^w f` for `f` with `len` grid samples, written to `dst`.
///
/// # Safety
/// Buffers must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn cdspec_symbol_apply(s: *const CdspecSymbol, f: *const CdspecComplex, dst: *mut CdspecComplex, len: usize) -> CdspecStatus {
    guard(|| {
        let a = &obj(s)?.0;
        let grid = *a.function_grid();
        let fv = slice(f, len, grid.len())?.iter().map(|&z| z.into()).collect();
        let r = weyl::weyl_apply(a, &SampledFunction::new(grid, fv)?)?;
        for (o, v) in slice_mut(dst, len, grid.len())?.iter_mut().zip(r.samples()) {
            *o = (*v).into();
        }
        Ok(())
    })
}

/// Symbol `b` of `(a^w)^{-1}` through the tight frame `frame`. Optional
/// outputs: condition number of the Gabor matrix and the round-trip error.
///
/// # Safety
/// `a`, `frame` and `out_b` must be valid; the others may be null.
#[no_mangle]
pub unsafe extern "C" fn cdspec_invert_weyl(
    a: *const CdspecSymbol,
    frame: *const CdspecGabor,
    p: f64,
    out_b: *mut *mut CdspecSymbol,
    out_condition: *mut f64,
    out_roundtrip: *mut f64,
) -> CdspecStatus {
    guard(|| {
        let a = &obj(a)?.0;
        let frame = &obj(frame)?.0;
        let dst = out(out_b)?;
        let inv = weyl::invert_weyl(a, frame, p)?;
        if let Some(c) = out_condition.as_mut() {
            *c = inv.report.condition;
        }
        if let Some(r) = out_roundtrip.as_mut() {
            *r = inv.report.roundtrip;
        }
        boxed(CdspecSymbol(inv.symbol), dst);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping() {
        assert_eq!(status_of(&CdError::Singular { condition: 1e20 }), CdspecStatus::Singular);
        assert_eq!(status_of(&CdError::NotTight { lower: 0.5, upper: 2.0 }), CdspecStatus::NotAFrame);
        assert_eq!(status_of(&CdError::BudgetExceeded { budget: 0.7 }), CdspecStatus::BudgetExceeded);
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, CdspecStatus::Panic);
        let msg = unsafe { std::ffi::CStr::from_ptr(cdspec_last_error()) };
        assert!(msg.to_str().unwrap().contains("boom"));
        assert_eq!(guard(|| Ok(())), CdspecStatus::Ok);
        assert!(unsafe { std::ffi::CStr::from_ptr(cdspec_last_error()) }.to_bytes().is_empty());
    }

    #[test]
    fn complex_conversion() {
        let z = Complex64::new(1.5, -2.0);
        assert_eq!(Complex64::from(CdspecComplex::from(z)), z);
    }
}
