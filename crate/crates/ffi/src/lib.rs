//! C ABI for the `cellfree` simulator.
//!
//! Objects are opaque heap handles returned through `out` parameters and
//! released with the matching `cf_*_free`. Every fallible call returns a
//! [`CfStatus`]; on failure the message is kept per thread and can be read
//! with [`cf_last_error`]. Matrices cross the boundary as row-major `double`
//! arrays of `M * K` entries (AP index major).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cellfree::closedform::{self, maximal_ratio_power, MrNormalization, PowerAllocation, Scheme, SinrReport};
use cellfree::mmf::{self, MmfSolution};
use cellfree::{build_snapshot, Error, Snapshot, SystemConfig};
use nalgebra::DMatrix;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Configuration or scheme requirements violated.
    Validation = 3,
    /// No power allocation reaches a positive SINR.
    Infeasible = 4,
    /// Output buffer shorter than required; nothing was written.
    BufferTooSmall = 5,
    Panic = 6,
    Internal = 7,
}

/// Precoding scheme selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfScheme {
    Cb = 0,
    Ncb = 1,
    Ecb = 2,
    Cbdt = 3,
}

impl From<CfScheme> for Scheme {
    fn from(s: CfScheme) -> Self {
        match s {
            CfScheme::Cb => Scheme::Cb,
            CfScheme::Ncb => Scheme::Ncb,
            CfScheme::Ecb => Scheme::Ecb,
            CfScheme::Cbdt => Scheme::Cbdt,
        }
    }
}

/// System parameters.
pub struct CfConfig(SystemConfig);

/// One network realization.
pub struct CfSnapshot(Snapshot);

/// Closed-form evaluation of one allocation.
pub struct CfReport(SinrReport);

/// Max-min fairness solution.
pub struct CfMmf(MmfSolution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> CfStatus {
    match err {
        Error::MmfNoFeasiblePoint(_) => CfStatus::Infeasible,
        Error::PowerConstraint { .. } | Error::InvalidEta { .. } | Error::Shape(_) => CfStatus::InvalidArgument,
        e if e.is_validation() => CfStatus::Validation,
        _ => CfStatus::Internal,
    }
}

fn fail(status: CfStatus, msg: impl Into<String>) -> CfStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CfStatus>) -> CfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CfStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check(r: cellfree::Result<()>) -> Result<(), CfStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, CfStatus> {
    p.as_ref()
        .ok_or_else(|| fail(CfStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), CfStatus> {
    if p.is_null() {
        Err(fail(CfStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn write_slice(values: &[f64], buf: *mut f64, len: usize) -> Result<(), CfStatus> {
    out_ptr(buf, "output buffer")?;
    if len < values.len() {
        return Err(fail(
            CfStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn scheme_of(raw: i32) -> Result<Scheme, CfStatus> {
    let s = match raw {
        0 => CfScheme::Cb,
        1 => CfScheme::Ncb,
        2 => CfScheme::Ecb,
        3 => CfScheme::Cbdt,
        _ => return Err(fail(CfStatus::InvalidArgument, format!("unknown scheme {raw}"))),
    };
    Ok(s.into())
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` first
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns its full length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default system parameters.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn cf_config_default(out: *mut *mut CfConfig) -> CfStatus {
    guard(|| {
        out_ptr(out, "out")?;
        boxed(CfConfig(SystemConfig::default()), out);
        Ok(())
    })
}

/// Parses parameters from the JSON experiment format used by the CLI
/// (keys such as `M`, `N`, `K`, `tau_up`; experiment-only keys are ignored).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn cf_config_from_json(json: *const c_char, out: *mut *mut CfConfig) -> CfStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if json.is_null() {
            return Err(fail(CfStatus::NullPointer, "json is null"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| fail(CfStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let spec = cellfree::cli::parse_spec(text, "json").map_err(|e| fail(status_of(&e), e.to_string()))?;
        boxed(CfConfig(spec.system), out);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cf_config_free(cfg: *mut CfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of APs, antennas per AP and users.
///
/// # Safety
/// `cfg` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn cf_config_dims(
    cfg: *const CfConfig,
    num_aps: *mut usize,
    antennas: *mut usize,
    num_users: *mut usize,
) -> CfStatus {
    guard(|| {
        let c = &get(cfg, "cfg")?.0;
        for (p, v) in [(num_aps, c.num_aps), (antennas, c.antennas), (num_users, c.num_users)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Draws the snapshot of `seed` under `cfg`.
///
/// # Safety
/// `cfg` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn cf_snapshot_build(cfg: *const CfConfig, seed: u64, out: *mut *mut CfSnapshot) -> CfStatus {
    guard(|| {
        let c = &get(cfg, "cfg")?.0;
        out_ptr(out, "out")?;
        let snap = build_snapshot(c, seed).map_err(|e| fail(status_of(&e), e.to_string()))?;
        boxed(CfSnapshot(snap), out);
        Ok(())
    })
}

/// # Safety
/// `snap` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_snapshot_free(snap: *mut CfSnapshot) {
    if !snap.is_null() {
        drop(Box::from_raw(snap));
    }
}

/// # Safety
/// `snap` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn cf_snapshot_dims(
    snap: *const CfSnapshot,
    num_aps: *mut usize,
    num_users: *mut usize,
) -> CfStatus {
    guard(|| {
        let s = &get(snap, "snap")?.0;
        if !num_aps.is_null() {
            *num_aps = s.num_aps();
        }
        if !num_users.is_null() {
            *num_users = s.num_users();
        }
        Ok(())
    })
}

/// Large-scale fading, `M * K` values.
///
/// # Safety
/// `snap` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_snapshot_beta(snap: *const CfSnapshot, buf: *mut f64, len: usize) -> CfStatus {
    guard(|| write_slice(&row_major(&get(snap, "snap")?.0.beta), buf, len))
}

/// Estimate mean-square `gamma`, `M * K` values.
///
/// # Safety
/// As [`cf_snapshot_beta`].
#[no_mangle]
pub unsafe extern "C" fn cf_snapshot_gamma(snap: *const CfSnapshot, buf: *mut f64, len: usize) -> CfStatus {
    guard(|| write_slice(&row_major(&get(snap, "snap")?.0.gamma), buf, len))
}

/// Maximal-ratio power coefficients of `scheme` (a [`CfScheme`] value).
///
/// # Safety
/// Handles must be live; `eta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_power_maximal_ratio(
    snap: *const CfSnapshot,
    cfg: *const CfConfig,
    scheme: i32,
    eta: *mut f64,
    len: usize,
) -> CfStatus {
    guard(|| {
        let s = &get(snap, "snap")?.0;
        let c = &get(cfg, "cfg")?.0;
        let alloc = maximal_ratio_power(s, scheme_of(scheme)?, c.antennas, MrNormalization::Cluster);
        write_slice(&row_major(&alloc.eta), eta, len)
    })
}

/// Closed-form SINR and SE of the row-major allocation `eta`.
///
/// # Safety
/// Handles must be live; `eta` must hold `len` doubles; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn cf_evaluate(
    snap: *const CfSnapshot,
    cfg: *const CfConfig,
    scheme: i32,
    eta: *const f64,
    len: usize,
    out: *mut *mut CfReport,
) -> CfStatus {
    guard(|| {
        let s = &get(snap, "snap")?.0;
        let c = &get(cfg, "cfg")?.0;
        out_ptr(out, "out")?;
        let scheme = scheme_of(scheme)?;
        if eta.is_null() {
            return Err(fail(CfStatus::NullPointer, "eta is null"));
        }
        let (m, k) = (s.num_aps(), s.num_users());
        if len != m * k {
            return Err(fail(
                CfStatus::InvalidArgument,
                format!("eta has {len} values, expected {}", m * k),
            ));
        }
        if c.antennas == 0 {
            return Err(fail(CfStatus::Validation, "config has no antennas"));
        }
        let values = std::slice::from_raw_parts(eta, len);
        let alloc = PowerAllocation {
            eta: DMatrix::from_row_slice(m, k, values),
            scheme,
        };
        let mut report = None;
        check(closedform::evaluate(s, &alloc, c).map(|r| report = Some(r)))?;
        boxed(CfReport(report.expect("set on success")), out);
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_report_free(report: *mut CfReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_report_num_users(report: *const CfReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.num_users())
}

/// Per-user SINR (linear), `K` values.
///
/// # Safety
/// `report` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_report_sinr(report: *const CfReport, buf: *mut f64, len: usize) -> CfStatus {
    guard(|| write_slice(&get(report, "report")?.0.sinr, buf, len))
}

/// Per-user SE in bit/s/Hz, `K` values.
///
/// # Safety
/// As [`cf_report_sinr`].
#[no_mangle]
pub unsafe extern "C" fn cf_report_se(report: *const CfReport, buf: *mut f64, len: usize) -> CfStatus {
    guard(|| write_slice(&get(report, "report")?.0.se, buf, len))
}

/// Max-min fairness power control for CB, NCB or ECB. `bisect_tol <= 0`
/// selects the default tolerance.
///
/// # Safety
/// Handles must be live; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn cf_mmf_solve(
    snap: *const CfSnapshot,
    cfg: *const CfConfig,
    scheme: i32,
    bisect_tol: f64,
    out: *mut *mut CfMmf,
) -> CfStatus {
    guard(|| {
        let s = &get(snap, "snap")?.0;
        let c = &get(cfg, "cfg")?.0;
        out_ptr(out, "out")?;
        let scheme = scheme_of(scheme)?;
        let tol = if bisect_tol > 0.0 {
            bisect_tol
        } else {
            mmf::DEFAULT_BISECT_TOL
        };
        if !tol.is_finite() || tol >= 1.0 {
            return Err(fail(
                CfStatus::InvalidArgument,
                format!("bisect_tol must lie in (0, 1), got {tol}"),
            ));
        }
        let mut sol = None;
        check(mmf::solve_mmf(s, scheme, c, tol).map(|x| sol = Some(x)))?;
        boxed(CfMmf(sol.expect("set on success")), out);
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cf_mmf_free(sol: *mut CfMmf) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Achieved common SINR (linear).
///
/// # Safety
/// `sol` must be live; `nu` writable.
#[no_mangle]
pub unsafe extern "C" fn cf_mmf_nu(sol: *const CfMmf, nu: *mut f64) -> CfStatus {
    guard(|| {
        let s = &get(sol, "sol")?.0;
        out_ptr(nu, "nu")?;
        *nu = s.nu;
        Ok(())
    })
}

/// Power coefficients of the solution, `M * K` row-major values.
///
/// # Safety
/// `sol` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cf_mmf_eta(sol: *const CfMmf, buf: *mut f64, len: usize) -> CfStatus {
    guard(|| write_slice(&row_major(&get(sol, "sol")?.0.eta), buf, len))
}
