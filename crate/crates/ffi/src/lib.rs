//! C ABI over `heatopt`.
//!
//! Problems and reports are opaque handles created and freed by this library.
//! Every fallible call returns a [`HeatoptStatus`]; on failure a message is
//! available from [`heatopt_last_error`] on the same thread.
//!
//! Array layout: distributed fields are `n_steps * n_nodes` doubles, step
//! major; boundary fields are `n_steps * n_gamma2` doubles in the node order
//! reported by [`heatopt_problem_gamma2_nodes`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use heatopt::analysis::{fixed_control_sweep, optimal_control_sweep};
use heatopt::config::{Instance, RunConfig};
use heatopt::control::{contraction_constant, ControlProblem, OptimalityReport};
use heatopt::state::{ControlPair, Variant};
use heatopt::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Contract = 4,
    NotConverged = 5,
    Numerical = 6,
    Io = 7,
    BufferSize = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatoptVariant {
    Dirichlet = 0,
    Robin = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatoptSolver {
    Cg = 0,
    FixedPoint = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatoptSweepMode {
    Optimal = 0,
    FixedControl = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatoptConstants {
    pub lambda0: f64,
    pub lambda1: f64,
    pub trace_norm: f64,
    pub contraction_dirichlet: f64,
    pub contraction_robin: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatoptSummary {
    pub cost: f64,
    pub grad_norm: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeatoptSweepRecord {
    pub alpha: f64,
    pub state_gap: f64,
    pub adjoint_gap: f64,
    /// NaN for fixed-control sweeps.
    pub control_gap: f64,
    pub boundary_residual: f64,
    pub cost_alpha: f64,
}

/// A configured problem instance.
pub struct HeatoptProblem {
    instance: Instance,
    config: RunConfig,
}

/// The result of one optimization.
pub struct HeatoptReport {
    report: OptimalityReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> HeatoptStatus {
    match err {
        Error::Config(_) | Error::InvalidMesh(_) => HeatoptStatus::Config,
        Error::Contract(_) => HeatoptStatus::Contract,
        Error::Io { .. } => HeatoptStatus::Io,
        Error::SweepAborted { .. } => HeatoptStatus::NotConverged,
        Error::SolverFailure { .. }
        | Error::EigenFailure { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::DegenerateTriangle { .. } => HeatoptStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<HeatoptStatus, (HeatoptStatus, String)>) -> HeatoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HeatoptStatus::Panic
        }
    }
}

type Failure = (HeatoptStatus, String);

fn fail(err: Error) -> Failure {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> Failure {
    (HeatoptStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (HeatoptStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn variant_of(v: HeatoptVariant) -> Variant {
    match v {
        HeatoptVariant::Dirichlet => Variant::Dirichlet,
        HeatoptVariant::Robin => Variant::Robin,
    }
}

fn build(config: RunConfig) -> Result<Box<HeatoptProblem>, Failure> {
    let instance = config.instance(config.problem.variant).map_err(fail)?;
    Ok(Box::new(HeatoptProblem { instance, config }))
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn heatopt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn heatopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration. Relative CSV paths resolve against
/// `base_dir`, which may be null for the current directory.
#[no_mangle]
pub unsafe extern "C" fn heatopt_problem_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut HeatoptProblem,
) -> HeatoptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let base = if base_dir.is_null() {
            PathBuf::from(".")
        } else {
            PathBuf::from(read_str(base_dir, "base_dir")?)
        };
        let config = RunConfig::parse(text, base).map_err(fail)?;
        *out = Box::into_raw(build(config)?);
        Ok(HeatoptStatus::Ok)
    })
}

/// Loads a TOML configuration file.
#[no_mangle]
pub unsafe extern "C" fn heatopt_problem_from_file(
    path: *const c_char,
    out: *mut *mut HeatoptProblem,
) -> HeatoptStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = RunConfig::load(read_str(path, "path")?).map_err(fail)?;
        *out = Box::into_raw(build(config)?);
        Ok(HeatoptStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn heatopt_problem_free(problem: *mut HeatoptProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Writes the number of mesh nodes, Gamma2 nodes and time steps.
#[no_mangle]
pub unsafe extern "C" fn heatopt_problem_dims(
    problem: *const HeatoptProblem,
    n_nodes: *mut usize,
    n_gamma2: *mut usize,
    n_steps: *mut usize,
) -> HeatoptStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        if n_nodes.is_null() || n_gamma2.is_null() || n_steps.is_null() {
            return Err(null("output pointer"));
        }
        *n_nodes = p.instance.ops.n_nodes();
        *n_gamma2 = p.instance.ops.n_gamma2();
        *n_steps = p.instance.data.n_steps();
        Ok(HeatoptStatus::Ok)
    })
}

/// Copies the global indices of the Gamma2 nodes into `buf` (`len` must equal
/// the Gamma2 node count).
#[no_mangle]
pub unsafe extern "C" fn heatopt_problem_gamma2_nodes(
    problem: *const HeatoptProblem,
    buf: *mut usize,
    len: usize,
) -> HeatoptStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        copy_out(&p.instance.ops.gamma2_nodes, buf, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn heatopt_constants(
    problem: *const HeatoptProblem,
    out: *mut HeatoptConstants,
) -> HeatoptStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = p.instance.ops.compute_constants().map_err(fail)?;
        let d = &p.instance.data;
        *out = HeatoptConstants {
            lambda0: c.lambda0,
            lambda1: c.lambda1,
            trace_norm: c.trace_norm,
            contraction_dirichlet: contraction_constant(&c, d.m1(), d.m2(), Variant::Dirichlet, None),
            contraction_robin: contraction_constant(&c, d.m1(), d.m2(), Variant::Robin, Some(d.alpha())),
        };
        Ok(HeatoptStatus::Ok)
    })
}

/// Solves the optimal control problem with the configured tolerance and
/// iteration cap. A report is produced even when the solver does not
/// converge; the status is then `NotConverged`.
#[no_mangle]
pub unsafe extern "C" fn heatopt_solve(
    problem: *const HeatoptProblem,
    variant: HeatoptVariant,
    solver: HeatoptSolver,
    out: *mut *mut HeatoptReport,
) -> HeatoptStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cp = ControlProblem::new(&p.instance.data, &p.instance.ops, variant_of(variant)).map_err(fail)?;
        let (tol, max_iter) = (p.config.solver.tol, p.config.solver.max_iter);
        let report = match solver {
            HeatoptSolver::Cg => cp.solve_cg(tol, max_iter),
            HeatoptSolver::FixedPoint => cp.solve_fixed_point(tol, max_iter),
        }
        .map_err(fail)?;
        let converged = report.converged;
        *out = Box::into_raw(Box::new(HeatoptReport { report }));
        if converged {
            Ok(HeatoptStatus::Ok)
        } else {
            set_error("solver did not converge");
            Ok(HeatoptStatus::NotConverged)
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn heatopt_report_free(report: *mut HeatoptReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn heatopt_report_summary(
    report: *const HeatoptReport,
    out: *mut HeatoptSummary,
) -> HeatoptStatus {
    guard(|| {
        let r = &deref(report, "report")?.report;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = HeatoptSummary {
            cost: r.cost,
            grad_norm: r.grad_norm,
            tolerance: r.tolerance,
            iterations: r.iterations,
            converged: r.converged,
        };
        Ok(HeatoptStatus::Ok)
    })
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, len: usize) -> Result<HeatoptStatus, Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len != src.len() {
        return Err((
            HeatoptStatus::BufferSize,
            format!("buffer holds {len} values, expected {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    Ok(HeatoptStatus::Ok)
}

fn control_of(r: &HeatoptReport) -> &ControlPair {
    r.report.control()
}

/// Copies the distributed control (`n_steps * n_nodes` values).
#[no_mangle]
pub unsafe extern "C" fn heatopt_report_copy_g(
    report: *const HeatoptReport,
    buf: *mut f64,
    len: usize,
) -> HeatoptStatus {
    guard(|| {
        let flat: Vec<f64> = control_of(deref(report, "report")?).g.concat();
        copy_out(&flat, buf, len)
    })
}

/// Copies the boundary control (`n_steps * n_gamma2` values).
#[no_mangle]
pub unsafe extern "C" fn heatopt_report_copy_q(
    report: *const HeatoptReport,
    buf: *mut f64,
    len: usize,
) -> HeatoptStatus {
    guard(|| {
        let flat: Vec<f64> = control_of(deref(report, "report")?).q.concat();
        copy_out(&flat, buf, len)
    })
}

/// Runs an alpha sweep and writes one record per alpha into `records`
/// (`n_alphas` entries). `passed` receives the sweep's overall check verdict.
#[no_mangle]
pub unsafe extern "C" fn heatopt_sweep(
    problem: *const HeatoptProblem,
    mode: HeatoptSweepMode,
    alphas: *const f64,
    n_alphas: usize,
    records: *mut HeatoptSweepRecord,
    passed: *mut bool,
) -> HeatoptStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        if alphas.is_null() || records.is_null() || passed.is_null() {
            return Err(null("argument"));
        }
        let alphas = std::slice::from_raw_parts(alphas, n_alphas);
        let inst = &p.instance;
        let report = match mode {
            HeatoptSweepMode::Optimal => optimal_control_sweep(&inst.data, alphas, &inst.ops, p.config.solver.tol),
            HeatoptSweepMode::FixedControl => fixed_control_sweep(&inst.data, &inst.sweep_control, alphas, &inst.ops),
        }
        .map_err(fail)?;
        let out: Vec<HeatoptSweepRecord> = report
            .records
            .iter()
            .map(|r| HeatoptSweepRecord {
                alpha: r.alpha,
                state_gap: r.state_gap,
                adjoint_gap: r.adjoint_gap,
                control_gap: r.control_gap.unwrap_or(f64::NAN),
                boundary_residual: r.boundary_residual,
                cost_alpha: r.cost_alpha,
            })
            .collect();
        copy_out(&out, records, n_alphas)?;
        *passed = report.checks.passed;
        Ok(HeatoptStatus::Ok)
    })
}
