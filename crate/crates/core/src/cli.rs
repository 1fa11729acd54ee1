//! `heatopt` command line: `solve`, `sweep`, `check` and `constants`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 a solver did not
//! converge or an enabled check failed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    adjoint_identity_check, convexity_identity_check, fixed_control_sweep, gradient_fd_check,
    optimal_control_sweep, estimate_checks, IdentityCheck, EstimateOptions, EstimateReport, SweepReport,
    VariantChecks,
};
use crate::assembly::ConstantsReport;
use crate::config::{Format, Optimizer, RunConfig, SweepMode};
use crate::control::{contraction_constant, ControlProblem, OptimalityReport, SolverKind};
use crate::error::{Error, Result};
use crate::report::{
    fmt_f64, write_control_csv, write_history_csv, write_json, write_sweep_csv, write_trajectory_csv,
};
use crate::state::Variant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "heatopt", version, about = "Optimal control of the heat equation with Dirichlet or Robin conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the optimal control problem.
    Solve(CommonArgs),
    /// Sweep the Robin coefficient and compare with the Dirichlet problem.
    Sweep(CommonArgs),
    /// Run the identity checks and the joint/distributed estimates.
    Check(CommonArgs),
    /// Print the discrete coercivity and trace constants.
    Constants(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SolverFailure { .. }
        | Error::EigenFailure { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::SweepAborted { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_CONFIG,
    }
}

type Runner = fn(&RunConfig, &Path, bool) -> Result<i32>;

pub fn run(cli: Cli) -> i32 {
    let (args, cmd): (&CommonArgs, Runner) = match &cli.command {
        Command::Solve(a) => (a, run_solve),
        Command::Sweep(a) => (a, run_sweep),
        Command::Check(a) => (a, run_checks),
        Command::Constants(a) => (a, run_constants),
    };
    let outcome = RunConfig::load(&args.config).and_then(|cfg| {
        let out = args.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
        cmd(&cfg, &out, args.quiet)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn wants(cfg: &RunConfig, f: Format) -> bool {
    cfg.output.formats.contains(&f)
}

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub variant: Variant,
    pub alpha: Option<f64>,
    pub contraction_constant: f64,
    pub reports: Vec<OptimalityReport>,
    /// `H x Q` distance between the CG and fixed-point optima.
    pub solver_distance: Option<f64>,
}

pub fn report_line(r: &OptimalityReport) -> String {
    format!(
        "solver={} variant={} cost={} grad_norm={} iterations={} converged={}",
        r.solver,
        r.variant,
        fmt_f64(r.cost),
        fmt_f64(r.grad_norm),
        r.iterations,
        r.converged
    )
}

pub fn run_solve(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let variant = cfg.problem.variant;
    let inst = cfg.instance(variant)?;
    let problem = ControlProblem::new(&inst.data, &inst.ops, variant)?;
    let constants = inst.ops.compute_constants()?;
    let alpha = (variant == Variant::Robin).then_some(inst.data.alpha());
    let c0 = contraction_constant(&constants, inst.data.m1(), inst.data.m2(), variant, alpha);
    let (tol, max_iter) = (cfg.solver.tol, cfg.solver.max_iter);

    let mut reports = Vec::new();
    if matches!(cfg.solver.optimizer, Optimizer::Cg | Optimizer::Both) {
        reports.push(problem.solve_cg(tol, max_iter)?);
    }
    if matches!(cfg.solver.optimizer, Optimizer::FixedPoint | Optimizer::Both) {
        reports.push(problem.solve_fixed_point(tol, max_iter)?);
    }
    let solver_distance = (reports.len() == 2).then(|| problem.norm(&reports[1].control().sub(reports[0].control())));

    prepare_out(out)?;
    let primary = &reports[0];
    if wants(cfg, Format::Csv) {
        let eval = problem.evaluate(primary.control())?;
        for r in &reports {
            write_history_csv(&out.join(format!("history_{}.csv", r.solver)), &r.history)?;
        }
        write_trajectory_csv(&out.join("state.csv"), &eval.state, inst.data.grid())?;
        write_trajectory_csv(&out.join("adjoint.csv"), &eval.adjoint, inst.data.grid())?;
        write_control_csv(&out.join("control.csv"), primary.control(), &inst.ops)?;
    }
    let summary = SolveSummary {
        variant,
        alpha,
        contraction_constant: c0,
        reports,
        solver_distance,
    };
    if wants(cfg, Format::Json) {
        write_json(&out.join("report.json"), &summary)?;
    }

    say(quiet, format!("contraction_constant={}", fmt_f64(c0)));
    for r in &summary.reports {
        say(quiet, report_line(r));
        if r.solver == SolverKind::FixedPoint && !r.converged && c0 >= 1.0 {
            say(quiet, "note: fixed-point map is not known to contract (contraction_constant >= 1)");
        }
    }
    if let Some(d) = summary.solver_distance {
        say(quiet, format!("solver_distance={}", fmt_f64(d)));
    }
    Ok(if summary.reports.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

pub fn run_sweep(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let inst = cfg.instance(Variant::Dirichlet)?;
    let alphas = &cfg.problem.alphas;
    let report: SweepReport = match cfg.sweep.mode {
        SweepMode::Optimal => optimal_control_sweep(&inst.data, alphas, &inst.ops, cfg.solver.tol)?,
        SweepMode::FixedControl => fixed_control_sweep(&inst.data, &inst.sweep_control, alphas, &inst.ops)?,
    };
    prepare_out(out)?;
    if wants(cfg, Format::Csv) {
        write_sweep_csv(&out.join("sweep.csv"), &report)?;
    }
    if wants(cfg, Format::Json) {
        write_json(&out.join("sweep.json"), &report)?;
    }

    say(quiet, format!("reference cost={}", fmt_f64(report.reference.cost)));
    for r in &report.records {
        let control = r.control_gap.map(fmt_f64).unwrap_or_else(|| "-".into());
        say(
            quiet,
            format!(
                "alpha={} state_gap={} adjoint_gap={} control_gap={} boundary_residual={} cost_alpha={}",
                fmt_f64(r.alpha),
                fmt_f64(r.state_gap),
                fmt_f64(r.adjoint_gap),
                control,
                fmt_f64(r.boundary_residual),
                fmt_f64(r.cost_alpha)
            ),
        );
    }
    let c = &report.checks;
    say(
        quiet,
        format!(
            "decreasing: state={} adjoint={} control={} (enforced={})",
            c.state_gap.decreasing,
            c.adjoint_gap.decreasing,
            c.control_gap.as_ref().map_or("-".to_string(), |d| d.decreasing.to_string()),
            c.monotone_enforced
        ),
    );
    say(
        quiet,
        format!(
            "boundary_growth={} bounded={}",
            fmt_f64(c.boundary_growth),
            c.boundary_bounded
        ),
    );
    if let (Some(rel), Some(ok)) = (c.cost_limit_rel, c.cost_limit_ok) {
        say(quiet, format!("cost_limit_rel={} ok={ok}", fmt_f64(rel)));
    }
    say(quiet, format!("sweep {}", if c.passed { "PASS" } else { "FAIL" }));
    Ok(if c.passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub identities: Vec<IdentityCheck>,
    pub estimates: EstimateReport,
    pub passed: bool,
}

fn variant_lines(v: &VariantChecks) -> Vec<String> {
    let tag = match v.alpha {
        Some(a) => format!("{} alpha={}", v.variant, fmt_f64(a)),
        None => v.variant.to_string(),
    };
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    let mut lines = vec![
        format!(
            "[{}] estimate {tag}: lhs={} rhs={} slack={}",
            verdict(v.estimate.holds),
            fmt_f64(v.estimate.lhs),
            fmt_f64(v.estimate.rhs),
            fmt_f64(v.estimate.slack)
        ),
        format!(
            "[{}] estimate (perturbed flux) {tag}: lhs={} rhs={} slack={}",
            verdict(v.estimate_perturbed.holds),
            fmt_f64(v.estimate_perturbed.lhs),
            fmt_f64(v.estimate_perturbed.rhs),
            fmt_f64(v.estimate_perturbed.slack)
        ),
        format!(
            "[{}] joint cost below distributed-only cost {tag}: joint={} lower_bound={} distributed={}",
            verdict(v.remark.holds),
            fmt_f64(v.remark.joint_cost),
            fmt_f64(v.remark.joint_cost_lower_bound),
            fmt_f64(v.remark.distributed_cost)
        ),
        format!(
            "[{}] lipschitz ratio of W {tag}: max={} bound={} samples={}",
            verdict(v.lipschitz.holds),
            fmt_f64(v.lipschitz.max_ratio),
            fmt_f64(v.lipschitz.contraction_constant),
            v.lipschitz.samples
        ),
    ];
    let fp = &v.fixed_point;
    lines.push(match (fp.ran, fp.agrees) {
        (false, _) => format!(
            "[SKIP] fixed point {tag}: contraction_constant={} >= 1",
            fmt_f64(fp.contraction_constant)
        ),
        (true, Some(ok)) => format!(
            "[{}] fixed point {tag}: iterations={} step_ratio={} distance_to_cg={}",
            verdict(ok),
            fp.iterations.unwrap_or(0),
            fp.step_ratio.map_or("-".into(), fmt_f64),
            fp.distance_to_cg.map_or("-".into(), fmt_f64)
        ),
        (true, None) => format!(
            "[INFO] fixed point {tag}: contraction_constant={} converged={} iterations={}",
            fmt_f64(fp.contraction_constant),
            fp.converged.unwrap_or(false),
            fp.iterations.unwrap_or(0)
        ),
    });
    lines
}

pub fn run_checks(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let inst = cfg.instance(Variant::Dirichlet)?;
    let robin_data = inst.data.with_alpha(cfg.problem.alpha)?;
    let mut identities = Vec::new();
    for (data, variant) in [(&inst.data, Variant::Dirichlet), (&robin_data, Variant::Robin)] {
        let problem = ControlProblem::new(data, &inst.ops, variant)?;
        identities.push(adjoint_identity_check(&problem, 20, 1)?);
        identities.push(gradient_fd_check(&problem, 20, 2)?);
        identities.push(convexity_identity_check(&problem, 10, 3)?);
    }
    let opts = EstimateOptions {
        alpha: cfg.problem.alpha,
        max_iter: cfg.solver.max_iter,
        force_fixed_point: cfg.solver.optimizer != Optimizer::Cg,
        ..EstimateOptions::default()
    };
    let estimates = estimate_checks(&inst.data, &inst.ops, cfg.solver.tol, &opts)?;
    let passed = identities.iter().all(|c| c.passed) && estimates.passed();
    let summary = CheckSummary {
        identities,
        estimates,
        passed,
    };

    if wants(cfg, Format::Json) {
        prepare_out(out)?;
        write_json(&out.join("checks.json"), &summary)?;
    }
    for c in &summary.identities {
        say(
            quiet,
            format!(
                "[{}] {} {}: max_error={} tolerance={} samples={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.variant,
                fmt_f64(c.max_error),
                fmt_f64(c.tolerance),
                c.samples
            ),
        );
    }
    for v in [&summary.estimates.dirichlet, &summary.estimates.robin] {
        for line in variant_lines(v) {
            say(quiet, line);
        }
    }
    say(quiet, format!("checks {}", if passed { "PASS" } else { "FAIL" }));
    Ok(if passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsSummary {
    pub constants: ConstantsReport,
    pub m1: f64,
    pub m2: f64,
    pub alpha: f64,
    pub contraction_dirichlet: f64,
    pub contraction_robin: f64,
}

pub fn run_constants(cfg: &RunConfig, out: &Path, quiet: bool) -> Result<i32> {
    let inst = cfg.instance(Variant::Dirichlet)?;
    let constants = inst.ops.compute_constants()?;
    let (m1, m2, alpha) = (inst.data.m1(), inst.data.m2(), inst.data.alpha());
    let summary = ConstantsSummary {
        contraction_dirichlet: contraction_constant(&constants, m1, m2, Variant::Dirichlet, None),
        contraction_robin: contraction_constant(&constants, m1, m2, Variant::Robin, Some(alpha)),
        constants,
        m1,
        m2,
        alpha,
    };
    if wants(cfg, Format::Json) {
        prepare_out(out)?;
        write_json(&out.join("constants.json"), &summary)?;
    }
    say(quiet, format!("lambda0={}", fmt_f64(summary.constants.lambda0)));
    say(quiet, format!("lambda1={}", fmt_f64(summary.constants.lambda1)));
    say(quiet, format!("trace_norm={}", fmt_f64(summary.constants.trace_norm)));
    say(quiet, format!("contraction_dirichlet={}", fmt_f64(summary.contraction_dirichlet)));
    say(quiet, format!("contraction_robin={}", fmt_f64(summary.contraction_robin)));
    Ok(EXIT_OK)
}
