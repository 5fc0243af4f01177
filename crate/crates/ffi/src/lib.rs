//! C interface to `pminres`.
//!
//! Objects cross the boundary as opaque handles (`PmConfig`, `PmStudy`,
//! `PmMesh`) created by `pm_*_new`/`pm_*_run` functions and released by the
//! matching `pm_*_free`. Every fallible entry point returns a [`PmStatus`];
//! on failure the message is kept per thread and can be read with
//! [`pm_last_error_message`]. Panics are caught and reported as
//! [`PmStatus::Panic`].
//!
//! # Safety
//!
//! Handle arguments must be null or pointers obtained from this library
//! and not yet freed. Output pointers must be null or valid for writes.
//! Buffers must hold at least the stated number of elements and strings
//! must be NUL terminated.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use pminres::config::{ProblemConfig, Strategy, WarmStart};
use pminres::driver::{run_study, StudyOutcome};
use pminres::error::Error as CoreError;
use pminres::estimate::{fit_rate, Quantity, StudyRecord};
use pminres::mesh::{refine_marked, refine_uniform, unit_square_mesh, Mesh};
use pminres::telemetry::Telemetry;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Mesh = 4,
    SolverFailure = 5,
    Io = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmStrategy {
    Uniform = 0,
    PreAdapted = 1,
    Adaptive = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmWarmStart {
    Off = 0,
    Restart = 1,
    AtTarget = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmQuantity {
    Error = 0,
    Estimator = 1,
}

/// One level of a study.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PmRecord {
    pub level: usize,
    pub n_free_trial: usize,
    pub n_free_test: usize,
    pub n_total: usize,
    pub h_max: f64,
    pub error: f64,
    pub eta: f64,
    pub eta_over_error: f64,
    pub eta_root_over_error: f64,
    pub newton_total: usize,
    pub damping_events: usize,
    pub wall_ms: f64,
}

impl From<&StudyRecord> for PmRecord {
    fn from(r: &StudyRecord) -> Self {
        PmRecord {
            level: r.level,
            n_free_trial: r.n_free_trial,
            n_free_test: r.n_free_test,
            n_total: r.n_total,
            h_max: r.h_max,
            error: r.error,
            eta: r.eta,
            eta_over_error: r.eta_over_error,
            eta_root_over_error: r.eta_root_over_error,
            newton_total: r.newton_total,
            damping_events: r.damping_events,
            wall_ms: r.wall_ms,
        }
    }
}

impl From<&PmRecord> for StudyRecord {
    fn from(r: &PmRecord) -> Self {
        StudyRecord {
            level: r.level,
            n_free_trial: r.n_free_trial,
            n_free_test: r.n_free_test,
            n_total: r.n_total,
            h_max: r.h_max,
            error: r.error,
            eta: r.eta,
            eta_over_error: r.eta_over_error,
            eta_root_over_error: r.eta_root_over_error,
            newton_total: r.newton_total,
            damping_events: r.damping_events,
            wall_ms: r.wall_ms,
        }
    }
}

/// Study configuration.
pub struct PmConfig(ProblemConfig);

/// Completed (or partially completed) study.
pub struct PmStudy(StudyOutcome);

/// Triangulation of the unit square.
pub struct PmMesh(Arc<Mesh>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(PmStatus, String);

impl Failure {
    fn new(status: PmStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let status = match &e {
            CoreError::Config(_) => PmStatus::InvalidConfig,
            CoreError::Mesh(_) => PmStatus::Mesh,
            CoreError::Io(_) | CoreError::Csv(_) => PmStatus::Io,
            CoreError::Estimate(_) => PmStatus::InvalidArgument,
            _ => PmStatus::SolverFailure,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, records its error message and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PmStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(PmStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(PmStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out<T>(p: *mut *mut T, value: T) -> Result<(), Failure> {
    let slot = borrow_mut(p, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(PmStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PmStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

fn validated(cfg: ProblemConfig) -> Result<ProblemConfig, Failure> {
    cfg.validate().map_err(|e| Failure::new(PmStatus::InvalidConfig, e.to_string()))?;
    Ok(cfg)
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, so callers can size the buffer.
#[no_mangle]
pub unsafe extern "C" fn pm_last_error_message(buf: *mut c_char, len: usize) -> usize {
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
pub extern "C" fn pm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Smooth benchmark with target exponent `p`.
#[no_mangle]
pub unsafe extern "C" fn pm_config_new_case1(p: f64, out_config: *mut *mut PmConfig) -> PmStatus {
    guard(|| out(out_config, PmConfig(validated(ProblemConfig::case1(p))?)))
}

/// Corner-singularity benchmark with the given refinement strategy.
#[no_mangle]
pub unsafe extern "C" fn pm_config_new_case2(strategy: PmStrategy, out_config: *mut *mut PmConfig) -> PmStatus {
    guard(|| {
        let s = match strategy {
            PmStrategy::Uniform => Strategy::Uniform,
            PmStrategy::PreAdapted => Strategy::PreAdaptedThenUniform,
            PmStrategy::Adaptive => Strategy::Adaptive,
        };
        out(out_config, PmConfig(ProblemConfig::case2(s)))
    })
}

/// Parses a TOML configuration.
#[no_mangle]
pub unsafe extern "C" fn pm_config_from_toml(toml: *const c_char, out_config: *mut *mut PmConfig) -> PmStatus {
    guard(|| {
        let cfg = ProblemConfig::from_toml_str(text(toml, "toml")?, "<toml>")
            .map_err(|e| Failure::new(PmStatus::InvalidConfig, e.to_string()))?;
        out(out_config, PmConfig(cfg))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_config_set_max_levels(config: *mut PmConfig, levels: usize) -> PmStatus {
    guard(|| {
        let c = borrow_mut(config, "config")?;
        c.0 = validated(ProblemConfig { max_levels: levels, ..c.0.clone() })?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_config_set_theta(config: *mut PmConfig, theta: f64) -> PmStatus {
    guard(|| {
        let c = borrow_mut(config, "config")?;
        c.0 = validated(ProblemConfig { theta, ..c.0.clone() })?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_config_set_warm_start(config: *mut PmConfig, mode: PmWarmStart) -> PmStatus {
    guard(|| {
        let c = borrow_mut(config, "config")?;
        c.0.warm_start = match mode {
            PmWarmStart::Off => WarmStart::Off,
            PmWarmStart::Restart => WarmStart::Restart,
            PmWarmStart::AtTarget => WarmStart::AtTarget,
        };
        Ok(())
    })
}

/// Directory for the records CSV and snapshots; null disables file output.
#[no_mangle]
pub unsafe extern "C" fn pm_config_set_output_dir(config: *mut PmConfig, dir: *const c_char) -> PmStatus {
    guard(|| {
        let c = borrow_mut(config, "config")?;
        c.0.output.dir = if dir.is_null() { None } else { Some(PathBuf::from(text(dir, "dir")?)) };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_config_free(config: *mut PmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the study. When levels fail after some have completed, the
/// partial study is still returned through `out_study` together with
/// `PM_STATUS_SOLVER_FAILURE`; otherwise `*out_study` is left untouched on
/// error.
#[no_mangle]
pub unsafe extern "C" fn pm_study_run(config: *const PmConfig, out_study: *mut *mut PmStudy) -> PmStatus {
    guard(|| {
        let cfg = borrow(config, "config")?;
        borrow_mut(out_study, "out_study")?;
        match run_study(&cfg.0, &mut Telemetry::disabled()) {
            Ok(outcome) => out(out_study, PmStudy(outcome)),
            Err(e) => {
                let failure = Failure::from(e.source);
                if !e.partial.levels.is_empty() {
                    out(out_study, PmStudy(e.partial))?;
                }
                Err(failure)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_study_num_levels(study: *const PmStudy, out_levels: *mut usize) -> PmStatus {
    guard(|| {
        *borrow_mut(out_levels, "out_levels")? = borrow(study, "study")?.0.levels.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_study_record(study: *const PmStudy, level: usize, out_record: *mut PmRecord) -> PmStatus {
    guard(|| {
        let levels = &borrow(study, "study")?.0.levels;
        let data = levels.get(level).ok_or_else(|| {
            Failure::new(PmStatus::OutOfRange, format!("level {level} out of range ({} levels)", levels.len()))
        })?;
        *borrow_mut(out_record, "out_record")? = PmRecord::from(&data.record);
        Ok(())
    })
}

/// New handle to the mesh of `level`; release it with `pm_mesh_free`.
#[no_mangle]
pub unsafe extern "C" fn pm_study_mesh(study: *const PmStudy, level: usize, out_mesh: *mut *mut PmMesh) -> PmStatus {
    guard(|| {
        let levels = &borrow(study, "study")?.0.levels;
        let data = levels.get(level).ok_or_else(|| {
            Failure::new(PmStatus::OutOfRange, format!("level {level} out of range ({} levels)", levels.len()))
        })?;
        out(out_mesh, PmMesh(data.mesh.clone()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_study_free(study: *mut PmStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

/// Least-squares slope of `quantity` against `n_total` over the last
/// `window` of `n` records.
#[no_mangle]
pub unsafe extern "C" fn pm_fit_rate(
    records: *const PmRecord,
    n: usize,
    quantity: PmQuantity,
    window: usize,
    out_slope: *mut f64,
) -> PmStatus {
    guard(|| {
        if records.is_null() && n > 0 {
            return Err(Failure::new(PmStatus::NullPointer, "`records` is null"));
        }
        let rows: Vec<StudyRecord> =
            if n == 0 { Vec::new() } else { std::slice::from_raw_parts(records, n).iter().map(StudyRecord::from).collect() };
        let q = match quantity {
            PmQuantity::Error => Quantity::Error,
            PmQuantity::Estimator => Quantity::Estimator,
        };
        let slope = fit_rate(&rows, q, window).map_err(|e| Failure::new(PmStatus::InvalidArgument, e.to_string()))?;
        *borrow_mut(out_slope, "out_slope")? = slope;
        Ok(())
    })
}

/// `n × n` squares, each split along its diagonal.
#[no_mangle]
pub unsafe extern "C" fn pm_mesh_new_unit_square(n: usize, out_mesh: *mut *mut PmMesh) -> PmStatus {
    guard(|| {
        let m = unit_square_mesh(n).map_err(|e| Failure::new(PmStatus::Mesh, e.to_string()))?;
        out(out_mesh, PmMesh(Arc::new(m)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_mesh_refine_uniform(mesh: *const PmMesh, out_mesh: *mut *mut PmMesh) -> PmStatus {
    guard(|| {
        let m = refine_uniform(&borrow(mesh, "mesh")?.0).map_err(|e| Failure::new(PmStatus::Mesh, e.to_string()))?;
        out(out_mesh, PmMesh(Arc::new(m)))
    })
}

/// Bisects the `n` triangles in `marked` (with conforming closure).
#[no_mangle]
pub unsafe extern "C" fn pm_mesh_refine_marked(
    mesh: *const PmMesh,
    marked: *const usize,
    n: usize,
    out_mesh: *mut *mut PmMesh,
) -> PmStatus {
    guard(|| {
        let m = borrow(mesh, "mesh")?;
        if marked.is_null() && n > 0 {
            return Err(Failure::new(PmStatus::NullPointer, "`marked` is null"));
        }
        let marks = if n == 0 { &[][..] } else { std::slice::from_raw_parts(marked, n) };
        let fine = refine_marked(&m.0, marks).map_err(|e| Failure::new(PmStatus::Mesh, e.to_string()))?;
        out(out_mesh, PmMesh(Arc::new(fine)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_mesh_counts(
    mesh: *const PmMesh,
    out_vertices: *mut usize,
    out_edges: *mut usize,
    out_triangles: *mut usize,
) -> PmStatus {
    guard(|| {
        let m = &borrow(mesh, "mesh")?.0;
        *borrow_mut(out_vertices, "out_vertices")? = m.num_vertices();
        *borrow_mut(out_edges, "out_edges")? = m.num_edges();
        *borrow_mut(out_triangles, "out_triangles")? = m.num_triangles();
        Ok(())
    })
}

/// Writes `2 * num_vertices` coordinates (x0, y0, x1, y1, ...).
#[no_mangle]
pub unsafe extern "C" fn pm_mesh_vertices(mesh: *const PmMesh, buf: *mut f64, len: usize) -> PmStatus {
    guard(|| {
        let m = &borrow(mesh, "mesh")?.0;
        let need = 2 * m.num_vertices();
        if len < need {
            return Err(Failure::new(PmStatus::BufferTooSmall, format!("need {need} doubles, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(borrow_mut(buf, "buf")?, need);
        for (chunk, x) in dst.chunks_exact_mut(2).zip(m.vertices()) {
            chunk.copy_from_slice(x);
        }
        Ok(())
    })
}

/// Writes `3 * num_triangles` vertex indices, counter-clockwise.
#[no_mangle]
pub unsafe extern "C" fn pm_mesh_triangles(mesh: *const PmMesh, buf: *mut usize, len: usize) -> PmStatus {
    guard(|| {
        let m = &borrow(mesh, "mesh")?.0;
        let need = 3 * m.num_triangles();
        if len < need {
            return Err(Failure::new(PmStatus::BufferTooSmall, format!("need {need} indices, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(borrow_mut(buf, "buf")?, need);
        for (chunk, t) in dst.chunks_exact_mut(3).zip(m.triangles()) {
            chunk.copy_from_slice(t);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_mesh_min_angle(mesh: *const PmMesh, out_radians: *mut f64) -> PmStatus {
    guard(|| {
        *borrow_mut(out_radians, "out_radians")? = borrow(mesh, "mesh")?.0.min_angle_overall();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_mesh_write_svg(mesh: *const PmMesh, path: *const c_char) -> PmStatus {
    guard(|| {
        let m = &borrow(mesh, "mesh")?.0;
        let io = |e: std::io::Error| Failure::new(PmStatus::Io, e.to_string());
        let file = std::fs::File::create(text(path, "path")?).map_err(io)?;
        m.write_svg(std::io::BufWriter::new(file), 800.0).map_err(|e| Failure::new(PmStatus::Io, e.to_string()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pm_mesh_free(mesh: *mut PmMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}
