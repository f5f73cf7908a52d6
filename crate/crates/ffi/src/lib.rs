//! C interface to `fracexp`.
//!
//! Every fallible function returns an [`FxStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and can
//! be read with [`fx_last_error_message`]. Objects (`FxExpr`, `FxTermList`,
//! `FxSampler`) are opaque and must be released with their `_free` function.
//! Panics never cross the boundary; they are reported as
//! `FX_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracexp::coeff::{c_coefficient_analytic, c_coefficient_mc, McConfig};
use fracexp::expansion::{cond_expand_driftless, evaluate_truncation, expand_p0, ExpandSettings, TermList};
use fracexp::expr::{parse, Expr};
use fracexp::fbm::{FbmSampler, HurstIndex, TimeGrid};
use fracexp::mc::{mc_p0, McSettings};
use fracexp::variance::{r_fn, sigma_h_sq, var_zh};
use fracexp::word::Word;
use fracexp::{Error, ErrorKind};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FxStatus {
    Ok = 0,
    Domain = 1,
    Numerical = 2,
    Resource = 3,
    Syntax = 4,
    InvalidArgument = 5,
    NullPointer = 6,
    Internal = 7,
}

/// A parsed expression in `x`.
pub struct FxExpr(Expr);

/// A list of expansion terms `coefficient · h^exponent`.
pub struct FxTermList(TermList);

/// An exact fBm sampler on a fixed uniform grid.
pub struct FxSampler(FbmSampler);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> FxStatus {
    match e.kind() {
        ErrorKind::Domain => FxStatus::Domain,
        ErrorKind::Numerical => FxStatus::Numerical,
        ErrorKind::Resource => FxStatus::Resource,
        ErrorKind::Syntax => FxStatus::Syntax,
        ErrorKind::InvalidArgument => FxStatus::InvalidArgument,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Utf8,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> FxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FxStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = status_of(&e);
            set_error(e.to_string());
            status
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed for {what}"));
            FxStatus::NullPointer
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("string argument is not valid UTF-8".into());
            FxStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            FxStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len − 1` bytes) and returns the full message
/// length in bytes. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fx_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses `text` into a new expression stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_expr_parse(text: *const c_char, out: *mut *mut FxExpr) -> FxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = parse(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(FxExpr(e)));
        Ok(())
    })
}

/// # Safety
/// `expr` must come from [`fx_expr_parse`] and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_expr_eval(expr: *const FxExpr, x: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(expr, "expr")?.0.eval(x)?;
        Ok(())
    })
}

/// # Safety
/// `expr` must be null or come from [`fx_expr_parse`], and is not used again.
#[no_mangle]
pub unsafe extern "C" fn fx_expr_free(expr: *mut FxExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Analytic `c_I`; `word` is a string of '0' (dt) and '1' (dB), innermost
/// integral first.
///
/// # Safety
/// `word` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_coeff_analytic(word: *const c_char, hurst: f64, tol: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let w: Word = str_arg(word, "word")?.parse()?;
        *out = c_coefficient_analytic(&w, HurstIndex::new(hurst)?, tol)?.value;
        Ok(())
    })
}

/// Monte Carlo `c_I` with its standard error.
///
/// # Safety
/// `word` must be a NUL-terminated string; `value` and `stderr_out` valid.
#[no_mangle]
pub unsafe extern "C" fn fx_coeff_mc(
    word: *const c_char,
    hurst: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    value: *mut f64,
    stderr_out: *mut f64,
) -> FxStatus {
    guard(|| {
        let value = out_arg(value, "value")?;
        let stderr_out = out_arg(stderr_out, "stderr_out")?;
        let w: Word = str_arg(word, "word")?.parse()?;
        let r = c_coefficient_mc(&w, HurstIndex::new(hurst)?, McConfig::new(n_paths, n_steps, seed))?;
        *value = r.value;
        *stderr_out = r.stderr.unwrap_or(0.0);
        Ok(())
    })
}

/// Expansion of `E[f(X_h)] − f(x)` for `dX = b(X) dt + dB` up to
/// `h^{2pH+q}`, default settings.
///
/// # Safety
/// `f` and `b` must come from [`fx_expr_parse`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_expand_p0(
    f: *const FxExpr,
    b: *const FxExpr,
    x: f64,
    hurst: f64,
    p: u32,
    q: u32,
    out: *mut *mut FxTermList,
) -> FxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (f, b) = (ref_arg(f, "f")?, ref_arg(b, "b")?);
        let terms = expand_p0(&f.0, &b.0, x, HurstIndex::new(hurst)?, p, q, &ExpandSettings::default())?;
        *out = Box::into_raw(Box::new(FxTermList(terms)));
        Ok(())
    })
}

/// Driftless expansion of `E[f(B_{t+h}) − f(B_t) | B_t = beta]`.
///
/// # Safety
/// `f` must come from [`fx_expr_parse`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_cond_expand_driftless(
    f: *const FxExpr,
    t: f64,
    beta: f64,
    hurst: f64,
    p: u32,
    q: u32,
    out: *mut *mut FxTermList,
) -> FxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let terms = cond_expand_driftless(&ref_arg(f, "f")?.0, t, beta, HurstIndex::new(hurst)?, p, q)?;
        *out = Box::into_raw(Box::new(FxTermList(terms)));
        Ok(())
    })
}

/// Number of terms; 0 for a null list.
///
/// # Safety
/// `list` must be null or a live term list.
#[no_mangle]
pub unsafe extern "C" fn fx_terms_len(list: *const FxTermList) -> usize {
    list.as_ref().map_or(0, |l| l.0.terms.len())
}

/// Reads term `index` (sorted by exponent).
///
/// # Safety
/// `list` must be a live term list; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_terms_get(
    list: *const FxTermList,
    index: usize,
    m: *mut u32,
    n: *mut u32,
    exponent: *mut f64,
    coefficient: *mut f64,
) -> FxStatus {
    guard(|| {
        let l = ref_arg(list, "list")?;
        let t = l
            .0
            .terms
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("term index {index} out of range")))?;
        *out_arg(m, "m")? = t.pair.m;
        *out_arg(n, "n")? = t.pair.n;
        *out_arg(exponent, "exponent")? = t.exponent;
        *out_arg(coefficient, "coefficient")? = t.coefficient;
        Ok(())
    })
}

/// `Σ coefficient · h^exponent`.
///
/// # Safety
/// `list` must be a live term list and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fx_terms_evaluate(list: *const FxTermList, h: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        *out_arg(out, "out")? = evaluate_truncation(&ref_arg(list, "list")?.0, h);
        Ok(())
    })
}

/// # Safety
/// `list` must be null or a live term list, and is not used again.
#[no_mangle]
pub unsafe extern "C" fn fx_terms_free(list: *mut FxTermList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_sigma_h_sq(hurst: f64, tol: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        *out_arg(out, "out")? = sigma_h_sq(HurstIndex::new(hurst)?, tol)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_r_fn(x: f64, hurst: f64, tol: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        *out_arg(out, "out")? = r_fn(x, HurstIndex::new(hurst)?, tol)?;
        Ok(())
    })
}

/// Variance of the conditional increment `E[B_{t+h} − B_t | F_t]`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_var_zh(t: f64, h: f64, hurst: f64, tol: f64, out: *mut f64) -> FxStatus {
    guard(|| {
        *out_arg(out, "out")? = var_zh(t, h, HurstIndex::new(hurst)?, tol)?;
        Ok(())
    })
}

/// Monte Carlo `E[f(X_h)] − f(x0)`; nonzero `control_variates` enables the
/// regression correction.
///
/// # Safety
/// `f` and `b` must come from [`fx_expr_parse`]; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_mc_p0(
    f: *const FxExpr,
    b: *const FxExpr,
    x0: f64,
    hurst: f64,
    h: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    control_variates: i32,
    value: *mut f64,
    stderr_out: *mut f64,
) -> FxStatus {
    guard(|| {
        let value = out_arg(value, "value")?;
        let stderr_out = out_arg(stderr_out, "stderr_out")?;
        let est = mc_p0(
            &ref_arg(f, "f")?.0,
            &ref_arg(b, "b")?.0,
            x0,
            HurstIndex::new(hurst)?,
            h,
            McSettings::new(n_paths, n_steps, seed),
            control_variates != 0,
        )?;
        *value = est.value;
        *stderr_out = est.stderr;
        Ok(())
    })
}

/// Sampler on `n_steps + 1` equally spaced points of `[0, horizon]`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fx_sampler_new(horizon: f64, n_steps: usize, hurst: f64, out: *mut *mut FxSampler) -> FxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = FbmSampler::new(TimeGrid::uniform(horizon, n_steps)?, HurstIndex::new(hurst)?)?;
        *out = Box::into_raw(Box::new(FxSampler(s)));
        Ok(())
    })
}

/// Number of grid points (`n_steps + 1`).
///
/// # Safety
/// `sampler` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fx_sampler_len(sampler: *const FxSampler) -> usize {
    sampler.as_ref().map_or(0, |s| s.0.grid().len())
}

/// Writes path `index` of stream `seed` into `values`, which must hold
/// exactly [`fx_sampler_len`] doubles. The same `(seed, index)` always gives
/// the same path.
///
/// # Safety
/// `sampler` must be live and `values` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fx_sampler_sample(
    sampler: *const FxSampler,
    seed: u64,
    index: u64,
    values: *mut f64,
    len: usize,
) -> FxStatus {
    guard(|| {
        let s = &ref_arg(sampler, "sampler")?.0;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let n = s.grid().len();
        if len != n {
            return Err(Error::InvalidArgument(format!("buffer holds {len} values, the grid has {n}")).into());
        }
        let out = std::slice::from_raw_parts_mut(values, len);
        let mut scratch = vec![0.0; n - 1];
        s.sample_into(seed, index, out, &mut scratch);
        Ok(())
    })
}

/// # Safety
/// `sampler` must be null or live, and is not used again.
#[no_mangle]
pub unsafe extern "C" fn fx_sampler_free(sampler: *mut FxSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}
