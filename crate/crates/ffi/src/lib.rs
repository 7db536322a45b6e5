//! C ABI over `mvtda_core`.
//!
//! Every fallible function returns an [`MvStatus`]; on failure a message is
//! kept per thread and can be read with [`mvtda_last_error`]. Objects are
//! opaque handles created by `*_new`/`*_load`/compute functions and released
//! with the matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mvtda_core::filtration::filter_stack;
use mvtda_core::maxtest::{run_max_test, MaxTestConfig, MaxTestResult};
use mvtda_core::partition::{build_slice_complexes, threshold_slices, SetOp};
use mvtda_core::persistence::{compute_persistence, PersistenceDiagram};
use mvtda_core::smoothing::{smooth_stack, SmootherConfig};
use mvtda_core::stack::{load_stack, ImageStack};
use mvtda_core::zigzag::{zigzag_persistence, ZigzagDiagram};
use mvtda_core::MvError;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    Parse = 4,
    OutOfRange = 5,
    Numerical = 6,
    Structural = 7,
    Panic = 8,
}

fn status_of(e: &MvError) -> MvStatus {
    match e {
        MvError::Io { .. } => MvStatus::Io,
        MvError::Parse { .. } => MvStatus::Parse,
        MvError::Invalid(_) => MvStatus::InvalidInput,
        MvError::OutOfRange { .. } => MvStatus::OutOfRange,
        MvError::RankDeficient { .. } | MvError::Numerical(_) => MvStatus::Numerical,
        MvError::Structural(_) => MvStatus::Structural,
        MvError::Stage { source, .. } => status_of(source),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (MvStatus, String)>) -> MvStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MvStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MvStatus::Panic
        }
    }
}

fn core<T>(r: mvtda_core::Result<T>) -> Result<T, (MvStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MvStatus, String) {
    (MvStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (MvStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MvStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (MvStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// The message for the last failed call on this thread, or NULL. Valid
/// until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mvtda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mvtda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Stacks

/// An image or image stack (row-major, last axis slowest).
pub struct MvStack(ImageStack);

/// Builds a stack from `ndim` extents and `len` values (row-major, time
/// slowest). `time_spacing` is the seconds between frames.
///
/// # Safety
/// `dims` must point to `ndim` readable values and `values` to `len`.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_new(
    dims: *const usize,
    ndim: usize,
    values: *const f64,
    len: usize,
    time_spacing: f64,
    out: *mut *mut MvStack,
) -> MvStatus {
    guard(|| {
        let dims = slice(dims, ndim, "dims")?.to_vec();
        let values = slice(values, len, "values")?.to_vec();
        let st = core(ImageStack::with_spacing(dims, values, time_spacing))?;
        put(out, MvStack(st))
    })
}

/// Loads a stack from a manifest, CSV frame or dims-header text file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_load(path: *const c_char, out: *mut *mut MvStack) -> MvStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (MvStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let st = core(load_stack(Path::new(p)))?;
        put(out, MvStack(st))
    })
}

/// Number of values in the stack; 0 for NULL.
///
/// # Safety
/// `stack` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_len(stack: *const MvStack) -> usize {
    stack.as_ref().map_or(0, |s| s.0.len())
}

/// Number of axes; 0 for NULL.
///
/// # Safety
/// `stack` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_ndim(stack: *const MvStack) -> usize {
    stack.as_ref().map_or(0, |s| s.0.ndim())
}

/// Copies up to `cap` values into `buf`; returns how many the stack holds.
///
/// # Safety
/// `stack` must be NULL or a live handle; `buf` must have room for `cap`.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_values(
    stack: *const MvStack,
    buf: *mut f64,
    cap: usize,
) -> usize {
    let Some(s) = stack.as_ref() else { return 0 };
    let v = s.0.values();
    if !buf.is_null() {
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len().min(cap));
    }
    v.len()
}

/// Local polynomial smoothing of each frame.
///
/// # Safety
/// `stack` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_smooth(
    stack: *const MvStack,
    degree: u8,
    span: f64,
    out: *mut *mut MvStack,
) -> MvStatus {
    guard(|| {
        let s = handle(stack, "stack")?;
        let cfg = core(SmootherConfig::new(degree, span))?;
        let z = core(smooth_stack(&s.0, &cfg))?;
        put(out, MvStack(z))
    })
}

/// # Safety
/// `stack` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvtda_stack_free(stack: *mut MvStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

// ---------------------------------------------------------------------------
// Persistence diagrams

pub struct MvDiagram(PersistenceDiagram);

/// One diagram point. Essential classes have `death` at the filtration floor.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvPoint {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
}

/// Upper-level-set persistence of the stack in dimensions `0..=max_dim`.
///
/// # Safety
/// `stack` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_persistence(
    stack: *const MvStack,
    max_dim: usize,
    out: *mut *mut MvDiagram,
) -> MvStatus {
    guard(|| {
        let s = handle(stack, "stack")?;
        let fc = core(filter_stack(&s.0, (max_dim + 1).min(s.0.ndim())))?;
        put(out, MvDiagram(compute_persistence(&fc, max_dim)))
    })
}

/// # Safety
/// `diagram` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_diagram_len(diagram: *const MvDiagram) -> usize {
    diagram.as_ref().map_or(0, |d| d.0.points.len())
}

/// # Safety
/// `diagram` must be a live handle and `point` writable.
#[no_mangle]
pub unsafe extern "C" fn mvtda_diagram_get(
    diagram: *const MvDiagram,
    index: usize,
    point: *mut MvPoint,
) -> MvStatus {
    guard(|| {
        let d = handle(diagram, "diagram")?;
        if point.is_null() {
            return Err(null("point"));
        }
        let p = d.0.points.get(index).ok_or_else(|| {
            (
                MvStatus::OutOfRange,
                format!("point {index} of {}", d.0.points.len()),
            )
        })?;
        *point = MvPoint {
            dim: p.dim,
            birth: p.birth,
            death: p.death,
            essential: p.essential,
        };
        Ok(())
    })
}

/// # Safety
/// `diagram` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvtda_diagram_free(diagram: *mut MvDiagram) {
    if !diagram.is_null() {
        drop(Box::from_raw(diagram));
    }
}

// ---------------------------------------------------------------------------
// Maximum persistence test

pub struct MvTestResult(MaxTestResult);

/// Test settings. `smooth = false` tests the raw stack.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvTestOptions {
    pub permutations: usize,
    pub dim: usize,
    pub alpha: f64,
    pub seed: u64,
    pub smooth: bool,
    pub smooth_degree: u8,
    pub smooth_span: f64,
    pub pvalue_add_one: bool,
}

/// The library defaults.
#[no_mangle]
pub extern "C" fn mvtda_test_options_default() -> MvTestOptions {
    let d = MaxTestConfig::default();
    let s = d.smoother.unwrap_or_default();
    MvTestOptions {
        permutations: d.permutations,
        dim: d.dim,
        alpha: d.alpha,
        seed: d.seed,
        smooth: true,
        smooth_degree: s.degree,
        smooth_span: s.span,
        pvalue_add_one: d.pvalue_add_one,
    }
}

/// Summary of a test. `theta` is meaningful only when `has_theta`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvTestSummary {
    pub rho_obs: f64,
    pub p_value: f64,
    pub reject: bool,
    pub has_theta: bool,
    pub theta: f64,
}

/// # Safety
/// `stack` must be a live handle and `options` readable.
#[no_mangle]
pub unsafe extern "C" fn mvtda_max_test(
    stack: *const MvStack,
    options: *const MvTestOptions,
    out: *mut *mut MvTestResult,
) -> MvStatus {
    guard(|| {
        let s = handle(stack, "stack")?;
        let o = *handle(options, "options")?;
        let smoother = if o.smooth {
            Some(core(SmootherConfig::new(o.smooth_degree, o.smooth_span))?)
        } else {
            None
        };
        let cfg = MaxTestConfig {
            permutations: o.permutations,
            dim: o.dim,
            alpha: o.alpha,
            seed: o.seed,
            smoother,
            pvalue_add_one: o.pvalue_add_one,
        };
        put(out, MvTestResult(core(run_max_test(&s.0, &cfg))?))
    })
}

/// # Safety
/// `result` must be a live handle and `summary` writable.
#[no_mangle]
pub unsafe extern "C" fn mvtda_test_summary(
    result: *const MvTestResult,
    summary: *mut MvTestSummary,
) -> MvStatus {
    guard(|| {
        let r = &handle(result, "result")?.0;
        if summary.is_null() {
            return Err(null("summary"));
        }
        *summary = MvTestSummary {
            rho_obs: r.rho_obs,
            p_value: r.p_value,
            reject: r.reject,
            has_theta: r.theta_hat.is_some(),
            theta: r.theta_hat.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Copies up to `cap` null maxima into `buf`; returns how many there are.
///
/// # Safety
/// `result` must be NULL or a live handle; `buf` must have room for `cap`.
#[no_mangle]
pub unsafe extern "C" fn mvtda_test_nulls(
    result: *const MvTestResult,
    buf: *mut f64,
    cap: usize,
) -> usize {
    let Some(r) = result.as_ref() else { return 0 };
    let v = &r.0.null_samples;
    if !buf.is_null() {
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len().min(cap));
    }
    v.len()
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvtda_test_free(result: *mut MvTestResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

// ---------------------------------------------------------------------------
// Zigzag

pub struct MvZigzag(ZigzagDiagram);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvSetOp {
    Union = 0,
    Intersection = 1,
}

/// An interval over the interleaved slice/link sequence (1-based, inclusive).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MvInterval {
    pub dim: usize,
    pub birth_index: usize,
    pub death_index: usize,
    pub birth_time: f64,
    pub death_time: f64,
}

/// Thresholds each frame of a 2D+time stack at `theta` and computes the
/// zigzag intervals of the resulting slice complexes (H0 and H1).
///
/// # Safety
/// `stack` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_zigzag(
    stack: *const MvStack,
    theta: f64,
    set_op: MvSetOp,
    out: *mut *mut MvZigzag,
) -> MvStatus {
    guard(|| {
        let s = &handle(stack, "stack")?.0;
        if s.ndim() != 3 {
            return Err((
                MvStatus::InvalidInput,
                "zigzag needs a 2D+time stack".into(),
            ));
        }
        let op = match set_op {
            MvSetOp::Union => SetOp::Union,
            MvSetOp::Intersection => SetOp::Intersection,
        };
        let sets = threshold_slices(s, theta);
        let seq = core(build_slice_complexes(&sets, s.rows(), s.cols(), op, theta))?;
        let zz = core(zigzag_persistence(&seq, 1))?.with_spacing(s.time_spacing());
        put(out, MvZigzag(zz))
    })
}

/// # Safety
/// `zigzag` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvtda_zigzag_len(zigzag: *const MvZigzag) -> usize {
    zigzag.as_ref().map_or(0, |z| z.0.intervals.len())
}

/// # Safety
/// `zigzag` must be a live handle and `interval` writable.
#[no_mangle]
pub unsafe extern "C" fn mvtda_zigzag_get(
    zigzag: *const MvZigzag,
    index: usize,
    interval: *mut MvInterval,
) -> MvStatus {
    guard(|| {
        let z = &handle(zigzag, "zigzag")?.0;
        if interval.is_null() {
            return Err(null("interval"));
        }
        let iv = z.intervals.get(index).ok_or_else(|| {
            (
                MvStatus::OutOfRange,
                format!("interval {index} of {}", z.intervals.len()),
            )
        })?;
        *interval = MvInterval {
            dim: iv.dim,
            birth_index: iv.birth_index,
            death_index: iv.death_index,
            birth_time: iv.birth_time,
            death_time: iv.death_time,
        };
        Ok(())
    })
}

/// # Safety
/// `zigzag` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvtda_zigzag_free(zigzag: *mut MvZigzag) {
    if !zigzag.is_null() {
        drop(Box::from_raw(zigzag));
    }
}
