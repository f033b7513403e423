//! C interface to the fusion library.
//!
//! Tensors and fusion settings cross the boundary as opaque handles created
//! and released by this library. Every fallible call returns an [`FhStatus`];
//! on failure the message is kept per thread and read with [`fh_last_error`].
//! Panics are caught at the boundary and reported as `FH_STATUS_PANIC`.
//!
//! Tensor data is column-major (first index fastest), the same layout as a
//! Fortran-order NPY file.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fctn_hsr::synthetic::gaussian_srf;
use fctn_hsr::{fuse, TensorizationPlan};
use fctn_hsr::{npy, DegradationModel, DenseTensor, Error, FusionConfig, Matrix, MetricReport, RankMatrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Shape = 3,
    InvalidArgument = 4,
    Numeric = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

/// Dense tensor handle.
pub struct FhTensor(DenseTensor);

/// Fusion settings handle.
pub struct FhConfig(FusionConfig);

/// Quality of an estimate against a reference cube.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FhMetrics {
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub ergas: f64,
    pub uiqi: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: FhStatus,
    message: String,
}

impl Failure {
    fn new(status: FhStatus, message: impl Into<String>) -> Self {
        Failure { status, message: message.into() }
    }

    fn null(what: &str) -> Self {
        Failure::new(FhStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_numeric() => FhStatus::Numeric,
            Error::Shape(_) => FhStatus::Shape,
            Error::InvalidArgument(_) => FhStatus::InvalidArgument,
            Error::Config(_) => FhStatus::Config,
            Error::Io(_) => FhStatus::Io,
            _ => FhStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FhStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FhStatus::Ok,
        Ok(Err(f)) => {
            set_last_error(f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            FhStatus::Panic
        }
    }
}

unsafe fn tensor_ref<'a>(t: *const FhTensor, what: &str) -> Result<&'a DenseTensor, Failure> {
    t.as_ref().map(|h| &h.0).ok_or_else(|| Failure::null(what))
}

unsafe fn config_mut<'a>(c: *mut FhConfig) -> Result<&'a mut FusionConfig, Failure> {
    c.as_mut().map(|h| &mut h.0).ok_or_else(|| Failure::null("config"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(Failure::null("path"));
    }
    let text = CStr::from_ptr(path).to_str().map_err(|_| Failure::new(FhStatus::InvalidUtf8, "path is not UTF-8"))?;
    Ok(PathBuf::from(text))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn matrix_of(t: &DenseTensor, what: &str) -> Result<Matrix, Failure> {
    match t.shape() {
        [rows, cols] => Ok(Matrix::new(*rows, *cols, t.data().to_vec())?),
        s => Err(Failure::new(FhStatus::Shape, format!("{what} must be a matrix, got shape {s:?}"))),
    }
}

fn tensor_of(m: &Matrix) -> Result<DenseTensor, Failure> {
    Ok(DenseTensor::new(vec![m.rows(), m.cols()], m.data().to_vec())?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fh_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a tensor by copying `product(shape)` column-major values.
///
/// # Safety
/// `shape` must point to `order` readable values and `data` to
/// `product(shape)` readable doubles (either may be null when the count is
/// zero). `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_new(
    shape: *const usize,
    order: usize,
    data: *const f64,
    out: *mut *mut FhTensor,
) -> FhStatus {
    guard(|| {
        let shape: Vec<usize> = match order {
            0 => Vec::new(),
            _ if shape.is_null() => return Err(Failure::null("shape")),
            _ => std::slice::from_raw_parts(shape, order).to_vec(),
        };
        let len = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let len = len.ok_or_else(|| Failure::new(FhStatus::Shape, "element count overflows"))?;
        let values = match len {
            0 => Vec::new(),
            _ if data.is_null() => return Err(Failure::null("data")),
            _ => std::slice::from_raw_parts(data, len).to_vec(),
        };
        write_out(out, FhTensor(DenseTensor::new(shape, values)?))
    })
}

/// Releases a tensor; null is ignored.
///
/// # Safety
/// `t` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_free(t: *mut FhTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of modes, or 0 for null.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_order(t: *const FhTensor) -> usize {
    t.as_ref().map_or(0, |h| h.0.order())
}

/// Number of elements, or 0 for null.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_len(t: *const FhTensor) -> usize {
    t.as_ref().map_or(0, |h| h.0.len())
}

/// Copies the extents into `out`, which holds `capacity` values.
///
/// # Safety
/// `t` must be a live tensor handle and `out` must hold `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_shape(t: *const FhTensor, out: *mut usize, capacity: usize) -> FhStatus {
    guard(|| {
        let t = tensor_ref(t, "tensor")?;
        if capacity < t.order() {
            return Err(Failure::new(
                FhStatus::InvalidArgument,
                format!("shape needs {} slots, got {capacity}", t.order()),
            ));
        }
        if out.is_null() && t.order() > 0 {
            return Err(Failure::null("shape buffer"));
        }
        ptr::copy_nonoverlapping(t.shape().as_ptr(), out, t.order());
        Ok(())
    })
}

/// Read-only view of the column-major values, valid while the handle lives.
///
/// # Safety
/// `t` must be null or a live tensor handle.
#[no_mangle]
pub unsafe extern "C" fn fh_tensor_data(t: *const FhTensor) -> *const f64 {
    t.as_ref().map_or(ptr::null(), |h| h.0.data().as_ptr())
}

/// Reads a float64 NPY file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fh_npy_load(path: *const c_char, out: *mut *mut FhTensor) -> FhStatus {
    guard(|| {
        let path = path_arg(path)?;
        write_out(out, FhTensor(npy::load(&path)?))
    })
}

/// Writes a tensor as a Fortran-order float64 NPY file.
///
/// # Safety
/// `t` must be a live tensor handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fh_npy_save(t: *const FhTensor, path: *const c_char) -> FhStatus {
    guard(|| {
        let t = tensor_ref(t, "tensor")?;
        npy::save(&path_arg(path)?, t)?;
        Ok(())
    })
}

/// Spectral response with Gaussian rows, `msi_bands × bands`, rows summing to one.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fh_gaussian_srf(msi_bands: usize, bands: usize, out: *mut *mut FhTensor) -> FhStatus {
    guard(|| write_out(out, FhTensor(tensor_of(&gaussian_srf(msi_bands, bands)?)?)))
}

/// Simulates a low-resolution HSI (block mean over `p×p`) and an MSI
/// (spectral response) from an `M×N×S` reference. Pass `INFINITY` as an
/// SNR for a noiseless observation; the MSI noise uses `noise_seed + 1`.
///
/// # Safety
/// `reference` and `srf` must be live tensor handles; `out_hsi` and
/// `out_msi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fh_degrade(
    reference: *const FhTensor,
    srf: *const FhTensor,
    p: usize,
    snr_hsi_db: f64,
    snr_msi_db: f64,
    noise_seed: u64,
    out_hsi: *mut *mut FhTensor,
    out_msi: *mut *mut FhTensor,
) -> FhStatus {
    guard(|| {
        let x = tensor_ref(reference, "reference")?;
        let srf = matrix_of(tensor_ref(srf, "srf")?, "srf")?;
        if out_hsi.is_null() || out_msi.is_null() {
            return Err(Failure::null("output pointer"));
        }
        let snr = |v: f64| (v != f64::INFINITY).then_some(v);
        let model = DegradationModel::new(srf, p, snr(snr_hsi_db), snr(snr_msi_db))?;
        let y = model.observe_hsi(x, noise_seed)?;
        let z = model.observe_msi(x, noise_seed.wrapping_add(1))?;
        write_out(out_hsi, FhTensor(y))?;
        write_out(out_msi, FhTensor(z))
    })
}

/// Fusion settings for a tensorization plan such as `"8x8,5x5,2x2,3x3"` and
/// the upper-triangle bond ranks `r12, r13, ..., r23, ...` of its
/// `scales + 1` factors. Other settings take their defaults.
///
/// # Safety
/// `plan` must be a NUL-terminated string, `ranks` must point to
/// `rank_count` values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fh_config_new(
    plan: *const c_char,
    ranks: *const usize,
    rank_count: usize,
    out: *mut *mut FhConfig,
) -> FhStatus {
    guard(|| {
        if plan.is_null() {
            return Err(Failure::null("plan"));
        }
        let text =
            CStr::from_ptr(plan).to_str().map_err(|_| Failure::new(FhStatus::InvalidUtf8, "plan is not UTF-8"))?;
        let plan = TensorizationPlan::parse(text)?;
        if ranks.is_null() && rank_count > 0 {
            return Err(Failure::null("ranks"));
        }
        let upper = if rank_count == 0 { &[][..] } else { std::slice::from_raw_parts(ranks, rank_count) };
        let ranks = RankMatrix::from_upper(plan.scales() + 1, upper)?;
        write_out(out, FhConfig(FusionConfig::new(plan, ranks)))
    })
}

/// Releases a config; null is ignored.
///
/// # Safety
/// `c` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fh_config_free(c: *mut FhConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

fn update_config(cfg: &mut FusionConfig, edit: impl FnOnce(&mut FusionConfig)) -> Result<(), Failure> {
    let mut next = cfg.clone();
    edit(&mut next);
    next.validate()?;
    *cfg = next;
    Ok(())
}

/// Sets the MSI weight `lambda`, the ridge weight `mu` and the band-graph weight `beta`.
/// The config is left unchanged when a value is rejected.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn fh_config_set_weights(c: *mut FhConfig, lambda: f64, mu: f64, beta: f64) -> FhStatus {
    guard(|| {
        update_config(config_mut(c)?, |cfg| {
            cfg.lambda = lambda;
            cfg.mu = mu;
            cfg.beta = beta;
        })
    })
}

/// Sets the band-graph bandwidth and neighbourhood half-width.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn fh_config_set_graph(c: *mut FhConfig, sigma: f64, half_width: usize) -> FhStatus {
    guard(|| {
        update_config(config_mut(c)?, |cfg| {
            cfg.sigma = sigma;
            cfg.graph_half_width = half_width;
        })
    })
}

/// Sets the sweep count and the initialization seed.
///
/// # Safety
/// `c` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn fh_config_set_iterations(c: *mut FhConfig, max_iter: usize, seed: u64) -> FhStatus {
    guard(|| {
        update_config(config_mut(c)?, |cfg| {
            cfg.max_iter = max_iter;
            cfg.seed = seed;
        })
    })
}

/// Fuses an `m×n×S` HSI and an `M×N×s` MSI with an `s×S` spectral response
/// into an `M×N×S` estimate. `out_iterations` may be null.
///
/// # Safety
/// All handles must be live; `out_estimate` must be writable and
/// `out_iterations` null or writable.
#[no_mangle]
pub unsafe extern "C" fn fh_fuse(
    hsi: *const FhTensor,
    msi: *const FhTensor,
    srf: *const FhTensor,
    config: *const FhConfig,
    out_estimate: *mut *mut FhTensor,
    out_iterations: *mut usize,
) -> FhStatus {
    guard(|| {
        let y = tensor_ref(hsi, "hsi")?;
        let z = tensor_ref(msi, "msi")?;
        let srf = matrix_of(tensor_ref(srf, "srf")?, "srf")?;
        let cfg = config.as_ref().map(|h| &h.0).ok_or_else(|| Failure::null("config"))?;
        if out_estimate.is_null() {
            return Err(Failure::null("output pointer"));
        }
        let result = fuse(y, z, &srf, cfg)?;
        if !out_iterations.is_null() {
            *out_iterations = result.iterations;
        }
        write_out(out_estimate, FhTensor(result.estimate))
    })
}

/// PSNR (dB), SAM (degrees), ERGAS at resolution ratio `p`, and UIQI of
/// `estimate` against `reference`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fh_metrics(
    reference: *const FhTensor,
    estimate: *const FhTensor,
    p: f64,
    out: *mut FhMetrics,
) -> FhStatus {
    guard(|| {
        let r = MetricReport::compute(tensor_ref(reference, "reference")?, tensor_ref(estimate, "estimate")?, p)?;
        let out = out.as_mut().ok_or_else(|| Failure::null("output pointer"))?;
        *out = FhMetrics { psnr_db: r.psnr_db, sam_deg: r.sam_deg, ergas: r.ergas, uiqi: r.uiqi };
        Ok(())
    })
}
