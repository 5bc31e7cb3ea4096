//! C ABI for `scmc-design`.
//!
//! Every fallible function returns an [`ScmcStatus`] and writes its result
//! through an out-pointer. On failure, [`scmc_last_error`] returns a message
//! for the calling thread. Handles are opaque and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use scmc_design::design::{
    fff_design, greedy_design, mindist, CandidateSet, Criterion, Design, DistanceMetric, FffSummary,
};
use scmc_design::dsl::parse_constraint;
use scmc_design::geodesic::{geodesic_cmm, KdTree};
use scmc_design::polygon::PolygonSet;
use scmc_design::region::{builtin_region, polygon_region, BoundingBox, Builtin, Region};
use scmc_design::scmc::{run_scmc, ScmcConfig};
use scmc_design::Error;

/// Row index reported for design points that are not input rows.
#[allow(clippy::unnecessary_cast)]
pub const SCMC_NO_ROW: usize = !0 as usize;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Domain = 4,
    Polygon = 5,
    SamplerFailed = 6,
    DesignFailed = 7,
    DisconnectedGraph = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmcCriterion {
    Cmm = 0,
    Ard = 1,
    MaxPro = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScmcFffSummary {
    Centroid = 0,
    MedoidMaxpro = 1,
}

/// Sampler settings; start from [`scmc_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScmcOptions {
    pub n_particles: usize,
    pub tau_target: f64,
    pub ess_fraction: f64,
    pub mh_sweeps_per_step: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    pub eq_tol: f64,
    pub conditional_resampling: bool,
    pub max_steps: usize,
}

impl From<ScmcConfig> for ScmcOptions {
    fn from(c: ScmcConfig) -> Self {
        ScmcOptions {
            n_particles: c.n_particles,
            tau_target: c.tau_target,
            ess_fraction: c.ess_fraction,
            mh_sweeps_per_step: c.mh_sweeps_per_step,
            seed: c.seed,
            target_acceptance: c.target_acceptance,
            eq_tol: c.eq_tol,
            conditional_resampling: c.conditional_resampling,
            max_steps: c.max_steps,
        }
    }
}

impl From<ScmcOptions> for ScmcConfig {
    fn from(o: ScmcOptions) -> Self {
        ScmcConfig {
            n_particles: o.n_particles,
            tau_target: o.tau_target,
            ess_fraction: o.ess_fraction,
            mh_sweeps_per_step: o.mh_sweeps_per_step,
            seed: o.seed,
            target_acceptance: o.target_acceptance,
            eq_tol: o.eq_tol,
            conditional_resampling: o.conditional_resampling,
            max_steps: o.max_steps,
        }
    }
}

/// A constrained region.
pub struct ScmcRegion(Region);

/// A sampled particle cloud with its tempering schedule.
pub struct ScmcSamples {
    points: Array2<f64>,
    taus: Vec<f64>,
    ess: Vec<f64>,
}

/// A design built on a point buffer.
pub struct ScmcDesign {
    dim: usize,
    points: Vec<f64>,
    rows: Vec<usize>,
    labels: Vec<usize>,
    mindist: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(ScmcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. }
            | Error::InvalidBoundingBox(_)
            | Error::InvalidParameter(_)
            | Error::TooManyDimensions { .. }
            | Error::IndexOutOfRange { .. }
            | Error::Config(_) => ScmcStatus::InvalidArgument,
            Error::Parse(_) => ScmcStatus::Parse,
            Error::Domain { .. } => ScmcStatus::Domain,
            Error::Polygon(_) => ScmcStatus::Polygon,
            Error::TotalConstraintViolation | Error::ScheduleExhausted { .. } => {
                ScmcStatus::SamplerFailed
            }
            Error::DesignTooLarge { .. } | Error::EmptyCandidates | Error::TooFewPoints { .. } => {
                ScmcStatus::DesignFailed
            }
            Error::DisconnectedGraph { .. } => ScmcStatus::DisconnectedGraph,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => ScmcStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ScmcStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ScmcStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            ScmcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ScmcStatus::Panic
        }
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn points_arg(points: *const f64, n: usize, dim: usize) -> Result<Array2<f64>, Failure> {
    if dim == 0 {
        return Err(invalid("`dim` must be positive"));
    }
    let len = n
        .checked_mul(dim)
        .ok_or_else(|| invalid("`n * dim` overflows"))?;
    let flat = slice_arg(points, len, "points")?.to_vec();
    Ok(Array2::from_shape_vec((n, dim), flat).expect("shape checked"))
}

/// Message describing the last failure on this thread; empty after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn scmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn scmc_options_default() -> ScmcOptions {
    ScmcConfig::default().into()
}

fn builtin(which: Builtin, out: *mut *mut ScmcRegion) -> ScmcStatus {
    guard(|| unsafe { put(out, ScmcRegion(builtin_region(&which)?)) })
}

/// The crescent `sqrt(33 x2^2 + 1) <= x1 <= sqrt(14 x2^2 + 2)` on `[-4, 4]^2`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_crescent(out: *mut *mut ScmcRegion) -> ScmcStatus {
    builtin(Builtin::Crescent, out)
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_ball(
    radius: f64,
    dim: usize,
    out: *mut *mut ScmcRegion,
) -> ScmcStatus {
    builtin(Builtin::Ball { radius, dim }, out)
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_annulus(
    inner: f64,
    outer: f64,
    out: *mut *mut ScmcRegion,
) -> ScmcStatus {
    builtin(Builtin::Annulus { inner, outer }, out)
}

/// The torus surface `(major - sqrt(x1^2 + x2^2))^2 + x3^2 = minor^2`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_torus(
    major: f64,
    minor: f64,
    out: *mut *mut ScmcRegion,
) -> ScmcStatus {
    builtin(Builtin::Torus { major, minor }, out)
}

/// Region from constraint expressions such as `"x1^2 + x2^2 <= 1"` on the
/// box `[lower, upper]`.
///
/// # Safety
/// `exprs` must point to `n_exprs` NUL-terminated strings; `lower` and
/// `upper` to `dim` values each; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_from_constraints(
    exprs: *const *const c_char,
    n_exprs: usize,
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    out: *mut *mut ScmcRegion,
) -> ScmcStatus {
    guard(|| {
        let texts = slice_arg(exprs, n_exprs, "exprs")?;
        let lower = slice_arg(lower, dim, "lower")?.to_vec();
        let upper = slice_arg(upper, dim, "upper")?.to_vec();
        let bbox = BoundingBox::new(lower, upper)?;
        let mut parsed = Vec::with_capacity(texts.len());
        for (i, &t) in texts.iter().enumerate() {
            let text = str_arg(t, "exprs[i]")?;
            let c = parse_constraint(text, dim)
                .map_err(|e| Failure(ScmcStatus::Parse, format!("constraint {i}: {e}")))?;
            parsed.push(c);
        }
        put(out, ScmcRegion(Region::from_exprs(bbox, parsed)?))
    })
}

/// Planar region bounded by the polygons of a GeoJSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_from_geojson(
    path: *const c_char,
    out: *mut *mut ScmcRegion,
) -> ScmcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let set = PolygonSet::from_geojson_path(Path::new(path))?;
        put(out, ScmcRegion(polygon_region(Arc::new(set), None)?))
    })
}

/// # Safety
/// `region` must be null or a live region handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_dim(region: *const ScmcRegion) -> usize {
    region.as_ref().map_or(0, |r| r.0.dim())
}

/// # Safety
/// `region` must be null or a live region handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_n_constraints(region: *const ScmcRegion) -> usize {
    region.as_ref().map_or(0, |r| r.0.n_constraints())
}

/// Per-constraint deviation of `x`: the residual for inequalities, satisfied
/// when `<= 0`, and its absolute value for equalities.
///
/// # Safety
/// `x` must point to `dim` values and `out_dev` to
/// `scmc_region_n_constraints(region)` writable values.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_deviation(
    region: *const ScmcRegion,
    x: *const f64,
    dim: usize,
    out_dev: *mut f64,
) -> ScmcStatus {
    guard(|| {
        let r = &region.as_ref().ok_or_else(|| null("region"))?.0;
        let x = slice_arg(x, dim, "x")?;
        let k = r.n_constraints();
        if k > 0 && out_dev.is_null() {
            return Err(null("out_dev"));
        }
        let mut dev = vec![0.0; k];
        r.deviation_into(x, &mut dev)?;
        if k > 0 {
            std::slice::from_raw_parts_mut(out_dev, k).copy_from_slice(&dev);
        }
        Ok(())
    })
}

/// # Safety
/// `x` must point to `dim` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_is_feasible(
    region: *const ScmcRegion,
    x: *const f64,
    dim: usize,
    eq_tol: f64,
    out: *mut bool,
) -> ScmcStatus {
    guard(|| {
        let r = &region.as_ref().ok_or_else(|| null("region"))?.0;
        let x = slice_arg(x, dim, "x")?;
        let ok = r.is_feasible(x, eq_tol)?;
        *out.as_mut().ok_or_else(|| null("out"))? = ok;
        Ok(())
    })
}

/// # Safety
/// `region` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scmc_region_free(region: *mut ScmcRegion) {
    if !region.is_null() {
        drop(Box::from_raw(region));
    }
}

/// Runs the sampler. `options` may be null for the defaults.
///
/// # Safety
/// `region` must be a live handle, `options` null or valid, `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_sample(
    region: *const ScmcRegion,
    options: *const ScmcOptions,
    out: *mut *mut ScmcSamples,
) -> ScmcStatus {
    guard(|| {
        let r = &region.as_ref().ok_or_else(|| null("region"))?.0;
        let cfg: ScmcConfig = options
            .as_ref()
            .map_or_else(ScmcConfig::default, |o| (*o).into());
        let (cloud, schedule) = run_scmc(r, &cfg)?;
        let ess = schedule.ess_trace();
        put(
            out,
            ScmcSamples {
                points: cloud.into_points(),
                taus: schedule.taus,
                ess,
            },
        )
    })
}

/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_len(s: *const ScmcSamples) -> usize {
    s.as_ref().map_or(0, |s| s.points.nrows())
}

/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_dim(s: *const ScmcSamples) -> usize {
    s.as_ref().map_or(0, |s| s.points.ncols())
}

/// Row-major `len * dim` coordinates, owned by the handle.
///
/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_points(s: *const ScmcSamples) -> *const f64 {
    s.as_ref().map_or(std::ptr::null(), |s| s.points.as_ptr())
}

/// Number of tempering steps taken.
///
/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_steps(s: *const ScmcSamples) -> usize {
    s.as_ref().map_or(0, |s| s.ess.len())
}

/// Constraint-strength schedule, `steps + 1` values starting at zero.
///
/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_taus(s: *const ScmcSamples) -> *const f64 {
    s.as_ref().map_or(std::ptr::null(), |s| s.taus.as_ptr())
}

/// Effective sample size before resampling at each step, `steps` values.
///
/// # Safety
/// `s` must be null or a live samples handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_ess(s: *const ScmcSamples) -> *const f64 {
    s.as_ref().map_or(std::ptr::null(), |s| s.ess.as_ptr())
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scmc_samples_free(s: *mut ScmcSamples) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Candidate index of every input row. Rows dropped as duplicates map to the
/// candidate they coincide with.
fn row_candidates(cands: &CandidateSet, input: &Array2<f64>) -> Vec<usize> {
    let flat = cands.points().as_slice().expect("standard layout");
    let tree = KdTree::new(flat, cands.dim());
    input
        .rows()
        .into_iter()
        .enumerate()
        .map(|(r, row)| {
            cands.candidate_for_row(r).unwrap_or_else(|| {
                tree.nearest(row.as_slice().expect("standard layout"), 1, None)[0].0
            })
        })
        .collect()
}

fn from_greedy(cands: &CandidateSet, design: &Design) -> Result<ScmcDesign, Failure> {
    let dim = cands.dim();
    let points = design
        .indices
        .iter()
        .flat_map(|&i| cands.point(i).iter().copied())
        .collect();
    let mindist = if design.len() < 2 {
        f64::INFINITY
    } else {
        cands.mindist(&design.indices)?
    };
    Ok(ScmcDesign {
        dim,
        points,
        rows: design
            .indices
            .iter()
            .map(|&i| cands.source_row(i))
            .collect(),
        labels: Vec::new(),
        mindist,
    })
}

/// Greedy design of `p` rows of the `n x dim` row-major buffer. `weights`
/// may be null; otherwise it holds `dim` coordinate weights and is only
/// accepted with `SCMC_CRITERION_CMM`. `ard_k` is ignored by other criteria.
///
/// # Safety
/// `points` must hold `n * dim` values, `weights` null or `dim` values,
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_greedy(
    points: *const f64,
    n: usize,
    dim: usize,
    criterion: ScmcCriterion,
    ard_k: u32,
    weights: *const f64,
    p: usize,
    seed: u64,
    out: *mut *mut ScmcDesign,
) -> ScmcStatus {
    guard(|| {
        let pts = points_arg(points, n, dim)?;
        let mut cands = CandidateSet::new(pts)?;
        if !weights.is_null() {
            if criterion != ScmcCriterion::Cmm {
                return Err(invalid("weights are only supported by the cmm criterion"));
            }
            let w = slice_arg(weights, dim, "weights")?.to_vec();
            cands = cands.with_metric(DistanceMetric::WeightedEuclidean(w))?;
        }
        let crit = match criterion {
            ScmcCriterion::Cmm => Criterion::Cmm,
            ScmcCriterion::Ard => Criterion::Ard { k: ard_k },
            ScmcCriterion::MaxPro => Criterion::MaxPro,
        };
        let design = greedy_design(&cands, p, crit, seed, None)?;
        put(out, from_greedy(&cands, &design)?)
    })
}

/// Conditional maximin design under shortest-path distance on the `k`
/// nearest-neighbour graph of the buffer.
///
/// # Safety
/// `points` must hold `n * dim` values, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_geodesic(
    points: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    p: usize,
    seed: u64,
    out: *mut *mut ScmcDesign,
) -> ScmcStatus {
    guard(|| {
        let pts = points_arg(points, n, dim)?;
        let (cands, design) = geodesic_cmm(pts, p, k, seed, None)?;
        put(out, from_greedy(&cands, &design)?)
    })
}

/// Ward clustering of the buffer into `p` clusters, one summary point per
/// cluster. Centroid summaries have no input row.
///
/// # Safety
/// `points` must hold `n * dim` values, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_fff(
    points: *const f64,
    n: usize,
    dim: usize,
    p: usize,
    summary: ScmcFffSummary,
    out: *mut *mut ScmcDesign,
) -> ScmcStatus {
    guard(|| {
        let pts = points_arg(points, n, dim)?;
        let cands = CandidateSet::new(pts.clone())?;
        let summary = match summary {
            ScmcFffSummary::Centroid => FffSummary::Centroid,
            ScmcFffSummary::MedoidMaxpro => FffSummary::MedoidMaxpro,
        };
        let fff = fff_design(&cands, p, summary)?;
        let rows = match &fff.indices {
            Some(idx) => idx.iter().map(|&i| cands.source_row(i)).collect(),
            None => vec![SCMC_NO_ROW; fff.points.nrows()],
        };
        let labels = row_candidates(&cands, &pts)
            .into_iter()
            .map(|c| fff.labels[c])
            .collect();
        let ones = vec![1.0; dim];
        let mindist = if fff.points.nrows() < 2 {
            f64::INFINITY
        } else {
            mindist(&fff.points, &ones)?
        };
        put(
            out,
            ScmcDesign {
                dim,
                points: fff.points.iter().copied().collect(),
                rows,
                labels,
                mindist,
            },
        )
    })
}

/// Number of design points.
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_size(d: *const ScmcDesign) -> usize {
    d.as_ref().map_or(0, |d| d.rows.len())
}

/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_dim(d: *const ScmcDesign) -> usize {
    d.as_ref().map_or(0, |d| d.dim)
}

/// Row-major `size * dim` coordinates in selection order.
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_points(d: *const ScmcDesign) -> *const f64 {
    d.as_ref().map_or(std::ptr::null(), |d| d.points.as_ptr())
}

/// Input row of each design point, or `SCMC_NO_ROW` for synthesized points.
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_rows(d: *const ScmcDesign) -> *const usize {
    d.as_ref().map_or(std::ptr::null(), |d| d.rows.as_ptr())
}

/// Cluster label of every input row for clustering designs; null otherwise.
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_labels(d: *const ScmcDesign) -> *const usize {
    match d.as_ref() {
        Some(d) if !d.labels.is_empty() => d.labels.as_ptr(),
        _ => std::ptr::null(),
    }
}

/// Minimum pairwise distance under the design metric; infinite for a
/// single point, NaN for a null handle.
///
/// # Safety
/// `d` must be null or a live design handle.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_mindist(d: *const ScmcDesign) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.mindist)
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scmc_design_free(d: *mut ScmcDesign) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}
