//! C ABI for `dmsparse`.
//!
//! Every fallible function returns a [`DmsStatus`]. On failure a message is
//! kept per thread and can be read with [`dms_last_error`]. Arrays are passed
//! as pointer plus length; output arrays are caller-allocated. Bitstreams
//! live behind an opaque [`DmsBitstream`] handle released with
//! [`dms_bitstream_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use dmsparse::codec::{
    adm_decode, adm_encode, dm_decode, dm_encode, extract_mask, read_bitstream, write_bitstream,
    AdmParams, Bitstream, MaskedSignal, SamplingMask, Staircase,
};
use dmsparse::recon::{
    imat, imatdm, lasso, lowpass_reconstruct, omp, Beta, Guard, ImatParams, LowpassDesign,
};
use dmsparse::signal::{snr_db, Frame, DEFAULT_SAMPLE_RATE};
use dmsparse::{Error, ErrorKind};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmsStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A parameter or input violates the operation's preconditions.
    InvalidInput = 2,
    /// A numerical routine failed (e.g. a rank-deficient least-squares fit).
    Numeric = 3,
    /// File could not be read or written.
    Io = 4,
    /// A caller-provided output buffer has the wrong length.
    BufferSize = 5,
    /// Internal panic; the library state is still usable.
    Panic = 6,
}

/// Opaque DM/ADM bitstream.
pub struct DmsBitstream {
    inner: Bitstream,
}

/// ADM step adaptation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DmsAdmParams {
    pub delta0: f64,
    pub growth: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// IMAT settings. `beta_fraction > 0` scales the first iterate's spectral
/// peak; otherwise `beta` is used as a fixed initial threshold.
/// `guard_gamma <= 0` disables the threshold floor.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DmsImatParams {
    pub lambda: f64,
    pub beta: f64,
    pub beta_fraction: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub guard_gamma: f64,
    pub guard_delta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(DmsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Input => DmsStatus::InvalidInput,
            ErrorKind::Numeric => DmsStatus::Numeric,
            ErrorKind::Io => DmsStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DmsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DmsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DmsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DmsStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn check_len(have: usize, want: usize, what: &str) -> Result<(), Fail> {
    if have != want {
        return Err(Fail(
            DmsStatus::BufferSize,
            format!("{what} holds {have} values, {want} needed"),
        ));
    }
    Ok(())
}

/// # Safety
/// `path` must be null or a valid NUL-terminated string.
unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(DmsStatus::InvalidInput, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: checked non-null; the caller guarantees it is writable.
    unsafe { out.write(value) };
    Ok(())
}

fn adm_params(p: &DmsAdmParams) -> Result<AdmParams, Fail> {
    Ok(AdmParams::new(
        p.delta0,
        p.growth,
        p.delta_min,
        p.delta_max,
    )?)
}

fn imat_params(p: &DmsImatParams) -> ImatParams {
    ImatParams {
        lambda: p.lambda,
        beta: if p.beta_fraction > 0.0 {
            Beta::FromFirstIterate(p.beta_fraction)
        } else {
            Beta::Fixed(p.beta)
        },
        alpha: p.alpha,
        max_iters: p.max_iters,
        guard: (p.guard_gamma > 0.0).then_some(Guard {
            gamma: p.guard_gamma,
            delta: p.guard_delta,
        }),
    }
}

fn masked(values: &[f64], mask: &[u8]) -> Result<MaskedSignal, Fail> {
    check_len(mask.len(), values.len(), "mask")?;
    let mask = SamplingMask::from_bits(mask.iter().map(|&d| d != 0).collect());
    Ok(MaskedSignal::new(values, mask, DEFAULT_SAMPLE_RATE)?)
}

fn emit(frame: &Frame, out: &mut [f64]) -> Result<(), Fail> {
    check_len(out.len(), frame.len(), "output")?;
    out.copy_from_slice(frame.samples());
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn dms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library defaults: K = 1.5, steps clamped to `[delta0/16, 16 delta0]`.
#[no_mangle]
pub extern "C" fn dms_adm_params_default(delta0: f64) -> DmsAdmParams {
    DmsAdmParams {
        delta0,
        growth: 1.5,
        delta_min: delta0 / 16.0,
        delta_max: delta0 * 16.0,
    }
}

#[no_mangle]
pub extern "C" fn dms_imat_params_default() -> DmsImatParams {
    let d = ImatParams::default();
    let fraction = match d.beta {
        Beta::FromFirstIterate(f) => f,
        Beta::Fixed(_) => unreachable!("default beta is relative"),
    };
    DmsImatParams {
        lambda: d.lambda,
        beta: 0.0,
        beta_fraction: fraction,
        alpha: d.alpha,
        max_iters: d.max_iters,
        guard_gamma: 0.0,
        guard_delta: 0.0,
    }
}

/// Bitstream from `n` symbols, each +1 or -1; anything else is rejected.
///
/// # Safety
/// `symbols` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_new(
    symbols: *const i8,
    n: usize,
    delta: f64,
    adaptive: bool,
    out: *mut *mut DmsBitstream,
) -> DmsStatus {
    guard(|| {
        let s = slice(symbols, n, "symbols")?;
        let inner = Bitstream::new(s.to_vec(), delta, adaptive)?;
        inner.validate()?;
        store(out, Box::into_raw(Box::new(DmsBitstream { inner })), "out")
    })
}

/// # Safety
/// `bits` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_free(bits: *mut DmsBitstream) {
    if !bits.is_null() {
        drop(Box::from_raw(bits));
    }
}

/// # Safety
/// `bits` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_len(bits: *const DmsBitstream) -> usize {
    bits.as_ref().map_or(0, |b| b.inner.len())
}

/// Step size, or the initial step for ADM streams. NaN for a null handle.
///
/// # Safety
/// `bits` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_delta(bits: *const DmsBitstream) -> f64 {
    bits.as_ref().map_or(f64::NAN, |b| b.inner.delta())
}

/// # Safety
/// `bits` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_is_adaptive(bits: *const DmsBitstream) -> bool {
    bits.as_ref().is_some_and(|b| b.inner.is_adaptive())
}

/// Copies the symbols into `out`, which must hold exactly `len` values.
///
/// # Safety
/// `bits` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_symbols(
    bits: *const DmsBitstream,
    out: *mut i8,
    len: usize,
) -> DmsStatus {
    guard(|| {
        let b = bits.as_ref().ok_or_else(|| null("bits"))?;
        let out = slice_mut(out, len, "out")?;
        check_len(len, b.inner.len(), "out")?;
        out.copy_from_slice(b.inner.symbols());
        Ok(())
    })
}

/// # Safety
/// `bits` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_write(
    bits: *const DmsBitstream,
    path: *const c_char,
) -> DmsStatus {
    guard(|| {
        let b = bits.as_ref().ok_or_else(|| null("bits"))?;
        Ok(write_bitstream(&b.inner, path_arg(path)?)?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_bitstream_read(
    path: *const c_char,
    out: *mut *mut DmsBitstream,
) -> DmsStatus {
    guard(|| {
        let inner = read_bitstream(path_arg(path)?)?;
        store(out, Box::into_raw(Box::new(DmsBitstream { inner })), "out")
    })
}

/// Plain DM encoding of `n` samples. `staircase` may be null; otherwise it
/// receives the encoder's `n` staircase values.
///
/// # Safety
/// `x` must be valid for `n` reads, `staircase` null or valid for `n` writes,
/// `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_dm_encode(
    x: *const f64,
    n: usize,
    delta: f64,
    out: *mut *mut DmsBitstream,
    staircase: *mut f64,
) -> DmsStatus {
    guard(|| {
        let frame = Frame::new(slice(x, n, "x")?.to_vec(), DEFAULT_SAMPLE_RATE)?;
        let (inner, stair) = dm_encode(&frame, delta)?;
        if !staircase.is_null() {
            slice_mut(staircase, n, "staircase")?.copy_from_slice(stair.values());
        }
        store(out, Box::into_raw(Box::new(DmsBitstream { inner })), "out")
    })
}

/// Adaptive DM encoding; see [`dms_dm_encode`].
///
/// # Safety
/// As [`dms_dm_encode`]; `params` must be valid for one read.
#[no_mangle]
pub unsafe extern "C" fn dms_adm_encode(
    x: *const f64,
    n: usize,
    params: *const DmsAdmParams,
    out: *mut *mut DmsBitstream,
    staircase: *mut f64,
) -> DmsStatus {
    guard(|| {
        let p = adm_params(params.as_ref().ok_or_else(|| null("params"))?)?;
        let frame = Frame::new(slice(x, n, "x")?.to_vec(), DEFAULT_SAMPLE_RATE)?;
        let (inner, stair) = adm_encode(&frame, &p)?;
        if !staircase.is_null() {
            slice_mut(staircase, n, "staircase")?.copy_from_slice(stair.values());
        }
        store(out, Box::into_raw(Box::new(DmsBitstream { inner })), "out")
    })
}

/// Decodes `bits` into `out` (`len` must equal the stream length). ADM
/// streams need `adm`; it is ignored for plain DM and may be null.
///
/// # Safety
/// `bits` must be a live handle, `adm` null or valid, `out` valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn dms_decode(
    bits: *const DmsBitstream,
    adm: *const DmsAdmParams,
    out: *mut f64,
    len: usize,
) -> DmsStatus {
    guard(|| {
        let b = &bits.as_ref().ok_or_else(|| null("bits"))?.inner;
        let out = slice_mut(out, len, "out")?;
        check_len(len, b.len(), "out")?;
        let stair = if b.is_adaptive() {
            let p = adm_params(adm.as_ref().ok_or_else(|| null("adm"))?)?;
            adm_decode(b, &p, DEFAULT_SAMPLE_RATE)?
        } else {
            dm_decode(b, DEFAULT_SAMPLE_RATE)?
        };
        out.copy_from_slice(stair.values());
        Ok(())
    })
}

/// Writes `d(n)` as 0/1 into `mask` and the retained fraction into `rate`
/// (which may be null).
///
/// # Safety
/// `bits` must be a live handle, `mask` valid for `len` writes, `rate` null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_extract_mask(
    bits: *const DmsBitstream,
    mask: *mut u8,
    len: usize,
    rate: *mut f64,
) -> DmsStatus {
    guard(|| {
        let b = &bits.as_ref().ok_or_else(|| null("bits"))?.inner;
        let out = slice_mut(mask, len, "mask")?;
        check_len(len, b.len(), "mask")?;
        let m = extract_mask(b)?;
        for (o, &d) in out.iter_mut().zip(m.bits()) {
            *o = u8::from(d);
        }
        if !rate.is_null() {
            rate.write(m.rate());
        }
        Ok(())
    })
}

/// SNR of `estimate` against `reference` in dB, capped at 100.
///
/// # Safety
/// Both arrays must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_snr_db(
    reference: *const f64,
    estimate: *const f64,
    n: usize,
    out: *mut f64,
) -> DmsStatus {
    guard(|| {
        let r = Frame::from_samples(slice(reference, n, "reference")?.to_vec())?;
        let e = Frame::from_samples(slice(estimate, n, "estimate")?.to_vec())?;
        store(out, snr_db(&r, &e)?.value, "out")
    })
}

/// IMAT from the retained samples `y` at positions where `mask` is nonzero.
/// `params` may be null for the defaults.
///
/// # Safety
/// `y`, `mask` and `out` must be valid for `n` elements; `params` null or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn dms_imat(
    y: *const f64,
    mask: *const u8,
    n: usize,
    params: *const DmsImatParams,
    out: *mut f64,
) -> DmsStatus {
    guard(|| {
        let m = masked(slice(y, n, "y")?, slice(mask, n, "mask")?)?;
        let p = params
            .as_ref()
            .copied()
            .unwrap_or_else(|| dms_imat_params_default());
        let r = imat(&m, &imat_params(&p), None)?;
        emit(&r.frame, slice_mut(out, n, "out")?)
    })
}

/// IMATDM: moving average of even length `smoothing_len` over the retained
/// samples, then IMAT.
///
/// # Safety
/// As [`dms_imat`].
#[no_mangle]
pub unsafe extern "C" fn dms_imatdm(
    y: *const f64,
    mask: *const u8,
    n: usize,
    smoothing_len: usize,
    params: *const DmsImatParams,
    out: *mut f64,
) -> DmsStatus {
    guard(|| {
        let m = masked(slice(y, n, "y")?, slice(mask, n, "mask")?)?;
        let p = params
            .as_ref()
            .copied()
            .unwrap_or_else(|| dms_imat_params_default());
        let r = imatdm(&m, smoothing_len, &imat_params(&p), None)?;
        emit(&r.frame, slice_mut(out, n, "out")?)
    })
}

/// OMP over conjugate bin pairs, at most `max_atoms` pairs, stopping once the
/// residual norm is at most `residual_tol`. `atoms_used` may be null.
///
/// # Safety
/// As [`dms_imat`]; `atoms_used` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dms_omp(
    y: *const f64,
    mask: *const u8,
    n: usize,
    max_atoms: usize,
    residual_tol: f64,
    out: *mut f64,
    atoms_used: *mut usize,
) -> DmsStatus {
    guard(|| {
        let m = masked(slice(y, n, "y")?, slice(mask, n, "mask")?)?;
        let r = omp(&m, max_atoms, residual_tol)?;
        if !atoms_used.is_null() {
            atoms_used.write(r.support.len());
        }
        emit(&r.frame, slice_mut(out, n, "out")?)
    })
}

/// LASSO by proximal gradient. `converged` may be null; a run that hits
/// `max_iters` still returns its best iterate with `*converged = false`.
///
/// # Safety
/// As [`dms_imat`]; `converged` null or valid for one write.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dms_lasso(
    y: *const f64,
    mask: *const u8,
    n: usize,
    reg: f64,
    max_iters: usize,
    tol: f64,
    out: *mut f64,
    converged: *mut bool,
) -> DmsStatus {
    guard(|| {
        let m = masked(slice(y, n, "y")?, slice(mask, n, "mask")?)?;
        let r = lasso(&m, reg, max_iters, tol)?;
        if !converged.is_null() {
            converged.write(r.converged);
        }
        emit(&r.frame, slice_mut(out, n, "out")?)
    })
}

/// Windowed-sinc lowpass of a full staircase, aligned with the input.
///
/// # Safety
/// `staircase` and `out` must be valid for `n` elements.
#[no_mangle]
pub unsafe extern "C" fn dms_lowpass(
    staircase: *const f64,
    n: usize,
    sample_rate: f64,
    cutoff_hz: f64,
    taps: usize,
    out: *mut f64,
) -> DmsStatus {
    guard(|| {
        let v = slice(staircase, n, "staircase")?.to_vec();
        let stair = Staircase::new(v, vec![0.0; n], sample_rate)?;
        let f = lowpass_reconstruct(&stair, &LowpassDesign { cutoff_hz, taps })?;
        emit(&f, slice_mut(out, n, "out")?)
    })
}
