//! C interface to optkink.
//!
//! Every fallible call returns an [`OptkinkStatus`]. On failure, a message for the
//! calling thread is available from [`optkink_last_error`]. Handles are opaque and
//! each must be released with its own `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use optkink::estimate::{self, Estimate, EstimateOptions};
use optkink::optimizer::Criterion;
use optkink::variance::VarianceMethod;
use optkink::{domain, smoothness, Error, Order, Sample, SmoothnessSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptkinkStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidData = 2,
    InsufficientSupport = 3,
    Numerical = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptkinkCriterion {
    /// Worst-case mean squared error.
    Umse = 0,
    /// Shortest honest interval.
    Hl = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptkinkOrder {
    /// Jump in the first derivative.
    Kink = 0,
    /// Jump in the level.
    Level = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptkinkVariance {
    Nn = 0,
    NnAdjusted = 1,
    Homoskedastic = 2,
}

/// Honest interval and its ingredients.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OptkinkInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub se: f64,
    pub max_bias: f64,
    pub t_bar: f64,
    pub cv: f64,
    pub kappa: f64,
}

/// Observations relative to the cutoff.
pub struct OptkinkSample(Sample);

/// Solved optimized interval with its weights.
pub struct OptkinkEstimate(Estimate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OptkinkStatus {
    match e {
        Error::InvalidArgument(_) => OptkinkStatus::InvalidArgument,
        Error::InvalidData(_) | Error::Io(_) => OptkinkStatus::InvalidData,
        Error::InsufficientSupport(_) => OptkinkStatus::InsufficientSupport,
        _ => OptkinkStatus::Numerical,
    }
}

struct Fail(OptkinkStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(OptkinkStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure for the thread and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OptkinkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OptkinkStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            OptkinkStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or null. The pointer stays valid
/// until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn optkink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn optkink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `n` observations into a new sample; `x` is normalized by `cutoff`.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn optkink_sample_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    cutoff: f64,
    out_sample: *mut *mut OptkinkSample,
) -> OptkinkStatus {
    guard(|| {
        let dst = out(out_sample, "out_sample")?;
        *dst = ptr::null_mut();
        let x = slice(x, n, "x")?.to_vec();
        let y = slice(y, n, "y")?.to_vec();
        let s = Sample::new(x, y, cutoff)?;
        *dst = Box::into_raw(Box::new(OptkinkSample(s)));
        Ok(())
    })
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn optkink_sample_len(sample: *const OptkinkSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Releases a sample; null is ignored.
///
/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn optkink_sample_free(sample: *mut OptkinkSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Optimized honest interval at curvature bound `l`.
///
/// # Safety
/// `sample` must be a live handle and `out_estimate` writable.
#[no_mangle]
pub unsafe extern "C" fn optkink_estimate(
    sample: *const OptkinkSample,
    l: f64,
    criterion: OptkinkCriterion,
    order: OptkinkOrder,
    variance: OptkinkVariance,
    alpha: f64,
    out_estimate: *mut *mut OptkinkEstimate,
) -> OptkinkStatus {
    guard(|| {
        let dst = out(out_estimate, "out_estimate")?;
        *dst = ptr::null_mut();
        let s = &sample.as_ref().ok_or_else(|| null("sample"))?.0;
        let spec = SmoothnessSpec {
            order: match order {
                OptkinkOrder::Kink => Order::Kink,
                OptkinkOrder::Level => Order::Level,
            },
            ..SmoothnessSpec::kink(l)
        };
        let criterion = match criterion {
            OptkinkCriterion::Umse => Criterion::Umse,
            OptkinkCriterion::Hl => Criterion::Hl,
        };
        let opts = EstimateOptions {
            variance: match variance {
                OptkinkVariance::Nn => VarianceMethod::Nn,
                OptkinkVariance::NnAdjusted => VarianceMethod::NnAdjusted,
                OptkinkVariance::Homoskedastic => VarianceMethod::Homoskedastic,
            },
            ..EstimateOptions::default()
        };
        let est = estimate::optimized_interval(s, &spec, alpha, criterion, &opts)?;
        *dst = Box::into_raw(Box::new(OptkinkEstimate(est)));
        Ok(())
    })
}

/// Copies the interval of an estimate into `interval`.
///
/// # Safety
/// `estimate` must be a live handle and `interval` writable.
#[no_mangle]
pub unsafe extern "C" fn optkink_estimate_interval(
    estimate: *const OptkinkEstimate,
    interval: *mut OptkinkInterval,
) -> OptkinkStatus {
    guard(|| {
        let e = &estimate.as_ref().ok_or_else(|| null("estimate"))?.0;
        let iv = &e.interval;
        *out(interval, "interval")? = OptkinkInterval {
            estimate: iv.estimate,
            lower: iv.lower,
            upper: iv.upper,
            se: iv.se,
            max_bias: iv.max_bias,
            t_bar: iv.t_bar,
            cv: iv.cv,
            kappa: e.solution.kappa,
        };
        Ok(())
    })
}

/// Copies the observation weights into `buf`, which must hold exactly the sample length.
///
/// # Safety
/// `estimate` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn optkink_estimate_weights(
    estimate: *const OptkinkEstimate,
    buf: *mut f64,
    len: usize,
) -> OptkinkStatus {
    guard(|| {
        let w = &estimate.as_ref().ok_or_else(|| null("estimate"))?.0.solution.weights;
        if len != w.len() {
            return Err(Fail(
                OptkinkStatus::InvalidArgument,
                format!("buffer holds {len} values, the sample has {}", w.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(w);
        Ok(())
    })
}

/// Releases an estimate; null is ignored.
///
/// # Safety
/// `estimate` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn optkink_estimate_free(estimate: *mut OptkinkEstimate) {
    if !estimate.is_null() {
        drop(Box::from_raw(estimate));
    }
}

/// Global quartic rule of thumb for the curvature bound.
///
/// # Safety
/// `sample` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn optkink_rot_quartic(sample: *const OptkinkSample, value: *mut f64) -> OptkinkStatus {
    guard(|| {
        let s = &sample.as_ref().ok_or_else(|| null("sample"))?.0;
        *out(value, "value")? = smoothness::rot_quartic(s)?;
        Ok(())
    })
}

/// Critical value for a bias of `t_bar` standard deviations at level `alpha`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optkink_critical_value(t_bar: f64, alpha: f64, value: *mut f64) -> OptkinkStatus {
    guard(|| {
        *out(value, "value")? = domain::folded_normal_cv(t_bar, alpha)?;
        Ok(())
    })
}
