//! Robin-coefficient sweeps, the estimates relating the joint and the
//! distributed-only problems, and the identity checks run by `heatopt check`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{ConstantsReport, DiscreteOperators};
use crate::control::{contraction_constant, ControlProblem, OptimalityReport, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::linalg::SparseSym;
use crate::state::{series_inner, ControlPair, ProblemData, Trajectory, Variant};

/// Values at or below this are treated as exact zeros in the decay checks.
pub const ZERO_FLOOR: f64 = 1e-12;
/// Required `final / initial` gap ratio for sweeps spanning three decades.
pub const DECAY_RATIO: f64 = 0.2;
/// Allowed growth of the boundary residual over its smallest-alpha value.
pub const BOUNDARY_GROWTH: f64 = 10.0;
/// Relative distance of the largest-alpha cost to the Dirichlet optimum.
pub const COST_LIMIT_REL: f64 = 0.05;

pub const DEFAULT_ALPHAS: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    FixedControl,
    OptimalControl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    /// `|u_alpha - u|_{L^2(V)}`
    pub state_gap: f64,
    /// `|p_alpha - p|_{L^2(V)}`
    pub adjoint_gap: f64,
    /// `|(g_alpha, q_alpha) - (g, q)|_{H x Q}`; optimal-control sweeps only.
    pub control_gap: Option<f64>,
    /// `sqrt(alpha - 1) |u_alpha - b|_{L^2(L^2(Gamma1))}`
    pub boundary_residual: f64,
    pub cost_alpha: f64,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub cost: f64,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub decreasing: bool,
    pub final_over_initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepChecks {
    /// Monotonicity and ratio checks are enforced only when the sweep has at
    /// least three alphas spanning two (monotonicity) or three (ratio) decades.
    pub monotone_enforced: bool,
    pub ratio_enforced: bool,
    pub state_gap: DecayCheck,
    pub adjoint_gap: DecayCheck,
    pub control_gap: Option<DecayCheck>,
    pub boundary_growth: f64,
    pub boundary_bounded: bool,
    /// `|J_alpha(opt_alpha) - J(opt)| / J(opt)` at the largest alpha.
    pub cost_limit_rel: Option<f64>,
    pub cost_limit_ok: Option<bool>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub alphas: Vec<f64>,
    pub records: Vec<SweepRecord>,
    pub reference: ReferenceRecord,
    pub checks: SweepChecks,
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::contract("sweep needs at least one alpha"));
    }
    if let Some(a) = alphas.iter().find(|&&a| !(a > 1.0 && a.is_finite())) {
        return Err(Error::contract(format!("sweep alphas must exceed 1, got {a}")));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract("sweep alphas must be strictly increasing"));
    }
    Ok(())
}

/// `sqrt(tau * sum (u^n - b)^T B1 (u^n - b))` over slices 1..=n_steps.
fn gamma1_misfit(u: &Trajectory, b_full: &[f64], gamma1_mass: &SparseSym, tau: f64) -> f64 {
    let diff: Vec<Vec<f64>> = u.slices[1..]
        .iter()
        .map(|s| s.iter().zip(b_full).map(|(x, y)| x - y).collect())
        .collect();
    series_inner(gamma1_mass, tau, &diff, &diff).max(0.0).sqrt()
}

fn is_decreasing(values: &[f64]) -> bool {
    values.iter().all(|&v| v <= ZERO_FLOOR) || values.windows(2).all(|w| w[1] < w[0])
}

fn decay(values: &[f64]) -> DecayCheck {
    let first = values[0];
    let last = values[values.len() - 1];
    let ratio = if first <= ZERO_FLOOR { 0.0 } else { last / first };
    DecayCheck {
        decreasing: is_decreasing(values),
        final_over_initial: ratio,
    }
}

fn summarize(kind: SweepKind, alphas: &[f64], records: &[SweepRecord], reference_cost: f64) -> SweepChecks {
    let span = alphas[alphas.len() - 1] / alphas[0];
    let monotone_enforced = alphas.len() >= 3 && span >= 100.0 * (1.0 - 1e-12);
    let ratio_enforced = alphas.len() >= 3 && span >= 1000.0 * (1.0 - 1e-12);

    let col = |f: fn(&SweepRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let state_gap = decay(&col(|r| r.state_gap));
    let adjoint_gap = decay(&col(|r| r.adjoint_gap));
    let control_gap = match kind {
        SweepKind::OptimalControl => Some(decay(&col(|r| r.control_gap.unwrap_or(0.0)))),
        SweepKind::FixedControl => None,
    };

    let residuals = col(|r| r.boundary_residual);
    let max_residual = residuals.iter().fold(0.0_f64, |m, &v| m.max(v));
    let boundary_growth = if residuals[0] <= ZERO_FLOOR {
        if max_residual <= ZERO_FLOOR {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        max_residual / residuals[0]
    };
    let boundary_bounded = boundary_growth <= BOUNDARY_GROWTH;

    let (cost_limit_rel, cost_limit_ok) = match kind {
        SweepKind::OptimalControl => {
            let last = records[records.len() - 1].cost_alpha;
            let rel = if reference_cost.abs() <= ZERO_FLOOR {
                (last - reference_cost).abs()
            } else {
                (last - reference_cost).abs() / reference_cost.abs()
            };
            (Some(rel), Some(rel <= COST_LIMIT_REL))
        }
        SweepKind::FixedControl => (None, None),
    };

    let gap_checks: Vec<&DecayCheck> = [Some(&state_gap), Some(&adjoint_gap), control_gap.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    let mut passed = boundary_bounded && cost_limit_ok.unwrap_or(true);
    if monotone_enforced {
        passed &= gap_checks.iter().all(|c| c.decreasing);
    }
    if ratio_enforced && kind == SweepKind::OptimalControl {
        passed &= gap_checks.iter().all(|c| c.final_over_initial < DECAY_RATIO);
    }

    SweepChecks {
        monotone_enforced,
        ratio_enforced,
        state_gap,
        adjoint_gap,
        control_gap,
        boundary_growth,
        boundary_bounded,
        cost_limit_rel,
        cost_limit_ok,
        passed,
    }
}

/// Solves the Robin system for each alpha with the control held fixed and
/// compares state and adjoint with the Dirichlet system.
pub fn fixed_control_sweep(
    data: &ProblemData,
    ctrl: &ControlPair,
    alphas: &[f64],
    ops: &DiscreteOperators,
) -> Result<SweepReport> {
    check_alphas(alphas)?;
    ctrl.check(ops, data.n_steps())?;
    let gram = ops.v_gram();
    let tau = data.tau();
    let b_full = ops.extend_dirichlet(data.b());

    let reference = ControlProblem::new(data, ops, Variant::Dirichlet)?;
    let u = reference.state(ctrl)?;
    let p = reference.adjoint(&u)?;
    let reference_cost = reference.cost_from_state(ctrl, &u)?;

    let records = alphas
        .par_iter()
        .map(|&alpha| -> Result<SweepRecord> {
            let data_a = data.with_alpha(alpha)?;
            let robin = ControlProblem::new(&data_a, ops, Variant::Robin)?;
            let ua = robin.state(ctrl)?;
            let pa = robin.adjoint(&ua)?;
            Ok(SweepRecord {
                alpha,
                state_gap: ua.sub(&u).l2_norm(&gram, tau),
                adjoint_gap: pa.sub(&p).l2_norm(&gram, tau),
                control_gap: None,
                boundary_residual: (alpha - 1.0).sqrt()
                    * gamma1_misfit(&ua, &b_full, &ops.gamma1_mass, tau),
                cost_alpha: robin.cost_from_state(ctrl, &ua)?,
                iterations: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let checks = summarize(SweepKind::FixedControl, alphas, &records, reference_cost);
    Ok(SweepReport {
        kind: SweepKind::FixedControl,
        alphas: alphas.to_vec(),
        records,
        reference: ReferenceRecord {
            cost: reference_cost,
            iterations: None,
        },
        checks,
    })
}

/// Solves both optimal control problems (the Robin one once per alpha) and
/// compares optimal controls, states and adjoints.
pub fn optimal_control_sweep(
    data: &ProblemData,
    alphas: &[f64],
    ops: &DiscreteOperators,
    tol: f64,
) -> Result<SweepReport> {
    check_alphas(alphas)?;
    let gram = ops.v_gram();
    let tau = data.tau();
    let b_full = ops.extend_dirichlet(data.b());

    let reference = ControlProblem::new(data, ops, Variant::Dirichlet)?;
    let opt = reference.solve_cg(tol, DEFAULT_MAX_ITER)?;
    if !opt.converged {
        return Err(Error::SweepAborted { alpha: f64::INFINITY });
    }
    let eval = reference.evaluate(opt.control())?;

    let records = alphas
        .par_iter()
        .map(|&alpha| -> Result<SweepRecord> {
            let data_a = data.with_alpha(alpha)?;
            let robin = ControlProblem::new(&data_a, ops, Variant::Robin)?;
            let opt_a = robin.solve_cg(tol, DEFAULT_MAX_ITER)?;
            if !opt_a.converged {
                return Err(Error::SweepAborted { alpha });
            }
            let eval_a = robin.evaluate(opt_a.control())?;
            Ok(SweepRecord {
                alpha,
                state_gap: eval_a.state.sub(&eval.state).l2_norm(&gram, tau),
                adjoint_gap: eval_a.adjoint.sub(&eval.adjoint).l2_norm(&gram, tau),
                control_gap: Some(opt_a.control().sub(opt.control()).norm(ops, tau)),
                boundary_residual: (alpha - 1.0).sqrt()
                    * gamma1_misfit(&eval_a.state, &b_full, &ops.gamma1_mass, tau),
                cost_alpha: eval_a.cost,
                iterations: Some(opt_a.iterations),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let checks = summarize(SweepKind::OptimalControl, alphas, &records, eval.cost);
    Ok(SweepReport {
        kind: SweepKind::OptimalControl,
        alphas: alphas.to_vec(),
        records,
        reference: ReferenceRecord {
            cost: eval.cost,
            iterations: Some(opt.iterations),
        },
        checks,
    })
}

/// Uniform random control with entries in `[-scale, scale]`.
pub fn random_control(ops: &DiscreteOperators, n_steps: usize, rng: &mut ChaCha8Rng, scale: f64) -> ControlPair {
    let mut c = ControlPair::zeros(ops, n_steps);
    c.g.iter_mut()
        .chain(c.q.iter_mut())
        .flatten()
        .for_each(|v| *v = rng.random_range(-scale..=scale));
    c
}

/// Inequality `lhs <= rhs + slack`; `slack` accounts for the optimality
/// residuals of the two approximate minimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemarkCheck {
    pub joint_cost: f64,
    /// `J(x) - |grad J(x)|^2 / (2 min(M1, M2))`, a lower bound of the optimum.
    pub joint_cost_lower_bound: f64,
    pub distributed_cost: f64,
    pub perturbed_distributed_cost: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub samples: usize,
    pub max_ratio: f64,
    pub contraction_constant: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    pub contraction_constant: f64,
    /// Run when the contraction constant is below one, or on request.
    pub ran: bool,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub step_ratio: Option<f64>,
    pub distance_to_cg: Option<f64>,
    /// Enforced only when the contraction constant is below one.
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantChecks {
    pub variant: Variant,
    pub alpha: Option<f64>,
    pub coercivity: f64,
    /// Flux frozen at the joint optimum.
    pub estimate: EstimateCheck,
    /// Flux frozen at a perturbation of the joint optimum.
    pub estimate_perturbed: EstimateCheck,
    pub remark: RemarkCheck,
    pub lipschitz: LipschitzCheck,
    pub fixed_point: FixedPointCheck,
}

impl VariantChecks {
    pub fn passed(&self) -> bool {
        self.estimate.holds
            && self.estimate_perturbed.holds
            && self.remark.holds
            && self.lipschitz.holds
            && self.fixed_point.agrees.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub constants: ConstantsReport,
    pub dirichlet: VariantChecks,
    pub robin: VariantChecks,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.dirichlet.passed() && self.robin.passed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub alpha: f64,
    pub lipschitz_samples: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Run the fixed-point iteration even when `W` is not known to contract;
    /// its outcome is then informative only.
    pub force_fixed_point: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            alpha: 10.0,
            lipschitz_samples: 50,
            seed: 5,
            max_iter: DEFAULT_MAX_ITER,
            force_fixed_point: false,
        }
    }
}

fn g_part(c: &ControlPair) -> ControlPair {
    let mut out = c.clone();
    out.q.iter_mut().flatten().for_each(|v| *v = 0.0);
    out
}

/// Estimate `|g1 - g_joint|_H <= |u_joint - u_1|_H / (c M1)` where `g1`
/// minimizes over `g` with flux `q1`, plus the measured residual slack.
fn estimate_check(
    problem: &ControlProblem<'_>,
    joint: &OptimalityReport,
    dist: &OptimalityReport,
    coercivity: f64,
) -> Result<EstimateCheck> {
    let m1 = problem.data().m1();
    let ops = problem.ops();
    let tau = problem.tau();
    let ej = problem.evaluate(joint.control())?;
    let ed = problem.evaluate(dist.control())?;
    let dg = g_part(&dist.control().sub(joint.control()));
    let lhs = dg.norm(ops, tau);
    let du = ej.state.sub(&ed.state);
    let rhs = problem.state_h_norm_sq(&du).max(0.0).sqrt() / (coercivity * m1);
    let slack = g_part(&ed.gradient.sub(&ej.gradient)).norm(ops, tau) / m1;
    Ok(EstimateCheck {
        lhs,
        rhs,
        slack,
        holds: lhs <= rhs + slack,
    })
}

fn variant_checks(
    data: &ProblemData,
    ops: &DiscreteOperators,
    constants: &ConstantsReport,
    variant: Variant,
    tol: f64,
    opts: &EstimateOptions,
) -> Result<VariantChecks> {
    let problem = ControlProblem::new(data, ops, variant)?;
    let tau = data.tau();
    let (alpha, coercivity) = match variant {
        Variant::Dirichlet => (None, constants.lambda0),
        Variant::Robin => (Some(data.alpha()), constants.lambda1 * data.alpha().min(1.0)),
    };
    let c0 = contraction_constant(constants, data.m1(), data.m2(), variant, alpha);

    let joint = problem.solve_cg(tol, opts.max_iter)?;
    let q_joint = joint.control().q.clone();
    let dist = problem.solve_distributed_only(&q_joint, tol, opts.max_iter)?;
    let estimate = estimate_check(&problem, &joint, &dist, coercivity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let perturbation = random_control(ops, data.n_steps(), &mut rng, 1.0);
    let mut q_pert = q_joint.clone();
    for (a, b) in q_pert.iter_mut().zip(&perturbation.q) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
    let dist_pert = problem.solve_distributed_only(&q_pert, tol, opts.max_iter)?;
    let estimate_perturbed = estimate_check(&problem, &joint, &dist_pert, coercivity)?;

    let mu = data.m1().min(data.m2());
    let lower = joint.cost - joint.grad_norm * joint.grad_norm / (2.0 * mu);
    let rounding = 4.0 * f64::EPSILON * joint.cost.abs().max(dist.cost.abs());
    let remark = RemarkCheck {
        joint_cost: joint.cost,
        joint_cost_lower_bound: lower,
        distributed_cost: dist.cost,
        perturbed_distributed_cost: dist_pert.cost,
        holds: lower <= dist.cost + rounding && lower <= dist_pert.cost + rounding,
    };

    let mut max_ratio = 0.0_f64;
    for _ in 0..opts.lipschitz_samples {
        let c1 = random_control(ops, data.n_steps(), &mut rng, 1.0);
        let c2 = random_control(ops, data.n_steps(), &mut rng, 1.0);
        let dw = problem.apply_w(&c2)?.sub(&problem.apply_w(&c1)?);
        let ratio = dw.norm(ops, tau) / c2.sub(&c1).norm(ops, tau);
        max_ratio = max_ratio.max(ratio);
    }
    let lipschitz = LipschitzCheck {
        samples: opts.lipschitz_samples,
        max_ratio,
        contraction_constant: c0,
        holds: max_ratio <= c0,
    };

    let fixed_point = if c0 < 1.0 || opts.force_fixed_point {
        let fp = problem.solve_fixed_point(tol, opts.max_iter)?;
        let distance = fp.control().sub(joint.control()).norm(ops, tau);
        FixedPointCheck {
            contraction_constant: c0,
            ran: true,
            converged: Some(fp.converged),
            iterations: Some(fp.iterations),
            step_ratio: fp.step_ratio,
            distance_to_cg: Some(distance),
            agrees: (c0 < 1.0).then_some(fp.converged && distance <= 10.0 * tol),
        }
    } else {
        FixedPointCheck {
            contraction_constant: c0,
            ran: false,
            converged: None,
            iterations: None,
            step_ratio: None,
            distance_to_cg: None,
            agrees: None,
        }
    };

    Ok(VariantChecks {
        variant,
        alpha,
        coercivity,
        estimate,
        estimate_perturbed,
        remark,
        lipschitz,
        fixed_point,
    })
}

/// Runs the joint-versus-distributed estimates, the cost comparison, the
/// Lipschitz bound of `W` and (when it is a contraction) the fixed-point
/// characterization, for the Dirichlet system and for the Robin system at
/// `opts.alpha`.
pub fn estimate_checks(
    data: &ProblemData,
    ops: &DiscreteOperators,
    tol: f64,
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    let constants = ops.compute_constants()?;
    let dirichlet = variant_checks(data, ops, &constants, Variant::Dirichlet, tol, opts)?;
    let robin_data = data.with_alpha(opts.alpha)?;
    let robin = variant_checks(&robin_data, ops, &constants, Variant::Robin, tol, opts)?;
    Ok(EstimateReport {
        constants,
        dirichlet,
        robin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub variant: Variant,
    pub samples: usize,
    /// Largest measured error (relative, per the check's definition).
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn identity(name: &str, variant: Variant, samples: usize, max_error: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        variant,
        samples,
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    }
}

/// `|(C(h,eta), u - z_d)_H - [(h,p)_H - (eta,p)_Q]| / (1 + |lhs|)` over random
/// directions, at a random base control.
pub fn adjoint_identity_check(problem: &ControlProblem<'_>, samples: usize, seed: u64) -> Result<IdentityCheck> {
    let ops = problem.ops();
    let tau = problem.tau();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_control(ops, problem.data().n_steps(), &mut rng, 1.0);
    let u = problem.state(&base)?;
    let p = problem.adjoint(&u)?;
    let residual: Vec<Vec<f64>> = u.slices[1..]
        .iter()
        .zip(problem.data().z_d())
        .map(|(a, z)| a.iter().zip(z).map(|(x, y)| x - y).collect())
        .collect();
    let p_steps = &p.slices[..problem.data().n_steps()];
    let p_trace: Vec<Vec<f64>> = p_steps.iter().map(|s| ops.trace_gamma2(s)).collect();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let dir = random_control(ops, problem.data().n_steps(), &mut rng, 1.0);
        let c = problem.apply_c(&dir)?;
        let lhs = series_inner(&ops.mass, tau, &c.slices[1..], &residual);
        let rhs = series_inner(&ops.mass, tau, &dir.g, p_steps)
            - series_inner(&ops.gamma2_mass_trace, tau, &dir.q, &p_trace);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    Ok(identity("adjoint identity", problem.variant(), samples, worst, 1e-10))
}

/// Directional derivative `(grad J(c), d)` against a central difference with
/// step `1e-5 / |d|` along `d`.
pub fn gradient_fd_check(problem: &ControlProblem<'_>, samples: usize, seed: u64) -> Result<IdentityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_steps = problem.data().n_steps();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let c = random_control(problem.ops(), n_steps, &mut rng, 1.0);
        let d = random_control(problem.ops(), n_steps, &mut rng, 1.0);
        let grad = problem.gradient(&c)?;
        let exact = problem.inner(&grad, &d);
        let h = 1e-5 / problem.norm(&d);
        let fd = (problem.cost(&c.combine(1.0, &d, h))? - problem.cost(&c.combine(1.0, &d, -h))?) / (2.0 * h);
        worst = worst.max((exact - fd).abs() / exact.abs().max(f64::MIN_POSITIVE));
    }
    Ok(identity("gradient vs finite difference", problem.variant(), samples, worst, 1e-6))
}

/// Convexity gap against its closed form for `t` in {0.25, 0.5, 0.75}.
pub fn convexity_identity_check(problem: &ControlProblem<'_>, samples: usize, seed: u64) -> Result<IdentityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_steps = problem.data().n_steps();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let c1 = random_control(problem.ops(), n_steps, &mut rng, 1.0);
        let c2 = random_control(problem.ops(), n_steps, &mut rng, 1.0);
        for t in [0.25, 0.5, 0.75] {
            let gap = problem.convexity_gap(&c1, &c2, t)?;
            let rhs = problem.convexity_identity_rhs(&c1, &c2, t)?;
            worst = worst.max((gap - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(identity("convexity identity", problem.variant(), samples, worst, 1e-10))
}
