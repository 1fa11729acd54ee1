//! Cost functionals, gradients and optimizers for the simultaneous
//! distributed-boundary control problems.
//!
//! For either state system the cost is
//!
//! ```text
//! J(g, q) = 1/2 |u_gq - z_d|_H^2 + M1/2 |g|_H^2 + M2/2 |q|_Q^2
//! ```
//!
//! and its Riesz gradient in `H x Q` is `(M1 g + p, M2 q - p|Gamma2)` with
//! `p` the matching adjoint state.

use serde::{Deserialize, Serialize};

use crate::assembly::{ConstantsReport, DiscreteOperators};
use crate::error::{Error, Result};
use crate::state::{series_inner, ControlPair, ProblemData, Propagator, Trajectory, Variant};

pub const DEFAULT_MAX_ITER: usize = 500;

/// Everything computed at one control: state, adjoint, cost and gradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub state: Trajectory,
    pub adjoint: Trajectory,
    pub cost: f64,
    pub gradient: ControlPair,
    pub grad_norm: f64,
}

/// One instance of problem (data, mesh operators, state system) with its
/// step matrix factored once.
#[derive(Debug, Clone)]
pub struct ControlProblem<'a> {
    data: &'a ProblemData,
    ops: &'a DiscreteOperators,
    prop: Propagator<'a>,
}

impl<'a> ControlProblem<'a> {
    pub fn new(data: &'a ProblemData, ops: &'a DiscreteOperators, variant: Variant) -> Result<Self> {
        Ok(ControlProblem {
            data,
            ops,
            prop: Propagator::new(data, ops, variant)?,
        })
    }

    pub fn data(&self) -> &'a ProblemData {
        self.data
    }

    pub fn ops(&self) -> &'a DiscreteOperators {
        self.ops
    }

    pub fn variant(&self) -> Variant {
        self.prop.variant()
    }

    pub fn tau(&self) -> f64 {
        self.data.tau()
    }

    pub fn zero_control(&self) -> ControlPair {
        ControlPair::zeros(self.ops, self.data.n_steps())
    }

    pub fn inner(&self, a: &ControlPair, b: &ControlPair) -> f64 {
        a.inner(b, self.ops, self.tau())
    }

    pub fn norm(&self, a: &ControlPair) -> f64 {
        a.norm(self.ops, self.tau())
    }

    /// `|x|_H^2` over state slices 1..=n_steps.
    pub fn state_h_norm_sq(&self, u: &Trajectory) -> f64 {
        series_inner(&self.ops.mass, self.tau(), &u.slices[1..], &u.slices[1..])
    }

    pub fn state(&self, ctrl: &ControlPair) -> Result<Trajectory> {
        self.prop.state(self.data, ctrl)
    }

    pub fn adjoint(&self, u: &Trajectory) -> Result<Trajectory> {
        self.prop.adjoint(self.data, u)
    }

    /// Linear part of the control-to-state map, `u_gq - u_00`.
    pub fn apply_c(&self, ctrl: &ControlPair) -> Result<Trajectory> {
        self.prop.linear_state(ctrl)
    }

    pub fn cost_from_state(&self, ctrl: &ControlPair, u: &Trajectory) -> Result<f64> {
        let residual = self.prop.residual(self.data, u)?;
        let tau = self.tau();
        let tracking = series_inner(&self.ops.mass, tau, &residual, &residual);
        let g = ctrl.h_inner(ctrl, self.ops, tau);
        let q = ctrl.q_inner(ctrl, self.ops, tau);
        Ok(0.5 * tracking + 0.5 * self.data.m1() * g + 0.5 * self.data.m2() * q)
    }

    pub fn cost(&self, ctrl: &ControlPair) -> Result<f64> {
        let u = self.state(ctrl)?;
        self.cost_from_state(ctrl, &u)
    }

    /// `(M1 g + p, M2 q - p|Gamma2)` for a given adjoint `p`.
    pub fn gradient_from_adjoint(&self, ctrl: &ControlPair, p: &Trajectory) -> ControlPair {
        let (m1, m2) = (self.data.m1(), self.data.m2());
        let g = ctrl
            .g
            .iter()
            .zip(&p.slices)
            .map(|(g, p)| g.iter().zip(p).map(|(a, b)| m1 * a + b).collect())
            .collect();
        let q = ctrl
            .q
            .iter()
            .zip(&p.slices)
            .map(|(q, p)| {
                let trace = self.ops.trace_gamma2(p);
                q.iter().zip(trace).map(|(a, b)| m2 * a - b).collect()
            })
            .collect();
        ControlPair { g, q }
    }

    pub fn evaluate(&self, ctrl: &ControlPair) -> Result<Evaluation> {
        let state = self.state(ctrl)?;
        let adjoint = self.adjoint(&state)?;
        let cost = self.cost_from_state(ctrl, &state)?;
        let gradient = self.gradient_from_adjoint(ctrl, &adjoint);
        let grad_norm = self.norm(&gradient);
        Ok(Evaluation {
            state,
            adjoint,
            cost,
            gradient,
            grad_norm,
        })
    }

    pub fn gradient(&self, ctrl: &ControlPair) -> Result<ControlPair> {
        Ok(self.evaluate(ctrl)?.gradient)
    }

    /// Hessian action `grad J(d) - grad J(0)`, assembled from the linear
    /// state and an adjoint driven by it alone.
    pub fn hessian_apply(&self, d: &ControlPair) -> Result<ControlPair> {
        let lin = self.apply_c(d)?;
        let p = self.prop.backward(&lin.slices[1..])?;
        Ok(self.gradient_from_adjoint(d, &p))
    }

    /// `W(g, q) = (-p/M1, p|Gamma2 / M2)`.
    pub fn apply_w(&self, ctrl: &ControlPair) -> Result<ControlPair> {
        let u = self.state(ctrl)?;
        let p = self.adjoint(&u)?;
        Ok(self.w_from_adjoint(&p))
    }

    fn w_from_adjoint(&self, p: &Trajectory) -> ControlPair {
        let (m1, m2) = (self.data.m1(), self.data.m2());
        let n_steps = self.data.n_steps();
        ControlPair {
            g: p.slices[..n_steps]
                .iter()
                .map(|s| s.iter().map(|v| -v / m1).collect())
                .collect(),
            q: p.slices[..n_steps]
                .iter()
                .map(|s| self.ops.trace_gamma2(s).into_iter().map(|v| v / m2).collect())
                .collect(),
        }
    }

    /// `(1-t) J(c2) + t J(c1) - J((1-t) c2 + t c1)`.
    pub fn convexity_gap(&self, c1: &ControlPair, c2: &ControlPair, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::contract(format!("convexity parameter t = {t} outside [0, 1]")));
        }
        let mix = c2.combine(1.0 - t, c1, t);
        Ok((1.0 - t) * self.cost(c2)? + t * self.cost(c1)? - self.cost(&mix)?)
    }

    /// `t(1-t)/2 [ |u2 - u1|_H^2 + M1 |g2 - g1|_H^2 + M2 |q2 - q1|_Q^2 ]`.
    pub fn convexity_identity_rhs(&self, c1: &ControlPair, c2: &ControlPair, t: f64) -> Result<f64> {
        let du = self.state(c2)?.sub(&self.state(c1)?);
        let dc = c2.sub(c1);
        let tau = self.tau();
        let bracket = self.state_h_norm_sq(&du)
            + self.data.m1() * dc.h_inner(&dc, self.ops, tau)
            + self.data.m2() * dc.q_inner(&dc, self.ops, tau);
        Ok(0.5 * t * (1.0 - t) * bracket)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Cg,
    FixedPoint,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Cg => "cg",
            SolverKind::FixedPoint => "fixed_point",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    #[serde(skip)]
    pub control: Option<ControlPair>,
    pub solver: SolverKind,
    pub variant: Variant,
    pub alpha: Option<f64>,
    pub cost: f64,
    /// `H x Q` norm of the gradient at the returned control.
    pub grad_norm: f64,
    /// Bound that `grad_norm` satisfies whenever `converged` is set.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest ratio of successive fixed-point step norms (fixed point only).
    pub step_ratio: Option<f64>,
    #[serde(skip)]
    pub history: Vec<IterationRecord>,
}

impl OptimalityReport {
    pub fn control(&self) -> &ControlPair {
        self.control.as_ref().expect("report carries its control")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Both,
    DistributedOnly,
}

fn mask(block: Block, mut c: ControlPair) -> ControlPair {
    if block == Block::DistributedOnly {
        c.q.iter_mut().flatten().for_each(|v| *v = 0.0);
    }
    c
}

/// Conjugate gradient in the `H x Q` inner product from `start`, moving
/// only in the blocks selected by `block`.
fn cg_core(
    problem: &ControlProblem<'_>,
    start: ControlPair,
    block: Block,
    tol: f64,
    max_iter: usize,
) -> Result<OptimalityReport> {
    if !(tol > 0.0) {
        return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
    }
    let eval0 = problem.evaluate(&start)?;
    let grad0 = mask(block, eval0.gradient.clone());
    let g0n = problem.norm(&grad0);
    let threshold = tol * (1.0 + g0n);

    let mut x = start.clone();
    let mut y = problem.zero_control();
    let mut r = grad0.scaled(-1.0);
    let mut d = r.clone();
    let mut rr = problem.inner(&r, &r);
    let mut history = vec![IterationRecord {
        iteration: 0,
        cost: eval0.cost,
        grad_norm: g0n,
        step_norm: 0.0,
    }];
    let mut iterations = 0;

    if rr.sqrt() > threshold {
        while iterations < max_iter {
            iterations += 1;
            let ad = mask(block, problem.hessian_apply(&d)?);
            let dad = problem.inner(&d, &ad);
            if !(dad > 0.0) {
                break;
            }
            let step = rr / dad;
            x.axpy(step, &d);
            y.axpy(step, &d);
            r.axpy(-step, &ad);
            let rr_new = problem.inner(&r, &r);
            let cost = eval0.cost + 0.5 * problem.inner(&grad0, &y) - 0.5 * problem.inner(&y, &r);
            history.push(IterationRecord {
                iteration: iterations,
                cost,
                grad_norm: rr_new.sqrt(),
                step_norm: step * problem.norm(&d),
            });
            if rr_new.sqrt() <= threshold {
                // Confirm against a fresh gradient; restart from it if the
                // recursive residual drifted.
                let fresh = mask(block, problem.evaluate(&x)?.gradient);
                let fresh_norm = problem.norm(&fresh);
                if fresh_norm <= threshold {
                    break;
                }
                r = fresh.scaled(-1.0);
                d = r.clone();
                rr = fresh_norm * fresh_norm;
                continue;
            }
            let beta = rr_new / rr;
            d = r.combine(1.0, &d, beta);
            rr = rr_new;
        }
    }

    let eval = problem.evaluate(&x)?;
    let gradient = mask(block, eval.gradient);
    let grad_norm = problem.norm(&gradient);
    Ok(OptimalityReport {
        control: Some(x),
        solver: SolverKind::Cg,
        variant: problem.variant(),
        alpha: alpha_of(problem),
        cost: eval.cost,
        grad_norm,
        tolerance: threshold,
        iterations,
        converged: grad_norm <= threshold,
        step_ratio: None,
        history,
    })
}

fn alpha_of(problem: &ControlProblem<'_>) -> Option<f64> {
    match problem.variant() {
        Variant::Dirichlet => None,
        Variant::Robin => Some(problem.data().alpha()),
    }
}

impl ControlProblem<'_> {
    /// Minimizes the cost by conjugate gradients from `(0, 0)`. Stops once
    /// the gradient norm falls below `tol * (1 + |grad J(0, 0)|)`.
    pub fn solve_cg(&self, tol: f64, max_iter: usize) -> Result<OptimalityReport> {
        cg_core(self, self.zero_control(), Block::Both, tol, max_iter)
    }

    /// Minimizes over `g` alone with the flux frozen at `q_fixed`. The cost
    /// keeps the constant `M2/2 |q_fixed|_Q^2` term.
    pub fn solve_distributed_only(
        &self,
        q_fixed: &[Vec<f64>],
        tol: f64,
        max_iter: usize,
    ) -> Result<OptimalityReport> {
        let mut start = self.zero_control();
        start.q = q_fixed.to_vec();
        start.check(self.ops, self.data.n_steps())?;
        cg_core(self, start, Block::DistributedOnly, tol, max_iter)
    }

    /// Iterates `c <- W(c)` from `(0, 0)` until the step norm drops below
    /// `tol`. Divergence is reported through `converged = false`.
    pub fn solve_fixed_point(&self, tol: f64, max_iter: usize) -> Result<OptimalityReport> {
        if !(tol > 0.0) {
            return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
        }
        let grad_bound = tol * self.data.m1().max(self.data.m2());
        let mut c = self.zero_control();
        let mut eval = self.evaluate(&c)?;
        let mut history = vec![IterationRecord {
            iteration: 0,
            cost: eval.cost,
            grad_norm: eval.grad_norm,
            step_norm: 0.0,
        }];
        let mut prev_step: Option<f64> = None;
        let mut first_step = 0.0;
        let mut max_ratio: Option<f64> = None;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iter {
            iterations += 1;
            let next = self.w_from_adjoint(&eval.adjoint);
            let step = self.norm(&next.sub(&c));
            if let Some(prev) = prev_step {
                if prev > 0.0 {
                    let ratio = step / prev;
                    max_ratio = Some(max_ratio.map_or(ratio, |m: f64| m.max(ratio)));
                }
            } else {
                first_step = step;
            }
            prev_step = Some(step);
            c = next;
            eval = self.evaluate(&c)?;
            history.push(IterationRecord {
                iteration: iterations,
                cost: eval.cost,
                grad_norm: eval.grad_norm,
                step_norm: step,
            });
            if step <= tol {
                converged = eval.grad_norm <= grad_bound;
                break;
            }
            if !step.is_finite() || step > 1e12 * first_step.max(1.0) {
                break;
            }
        }

        Ok(OptimalityReport {
            control: Some(c),
            solver: SolverKind::FixedPoint,
            variant: self.variant(),
            alpha: alpha_of(self),
            cost: eval.cost,
            grad_norm: eval.grad_norm,
            tolerance: grad_bound,
            iterations,
            converged,
            step_ratio: max_ratio,
            history,
        })
    }
}

/// Lipschitz bound of `W` (Dirichlet variant) or `W_alpha` (Robin variant):
///
/// ```text
/// C = 2 / c^2 * sqrt(1/M1^2 + |gamma0|^2 / M2^2) * (1 + |gamma0|)
/// ```
///
/// with `c = lambda0` or `c = lambda1 * min(1, alpha)`.
pub fn contraction_constant(
    constants: &ConstantsReport,
    m1: f64,
    m2: f64,
    variant: Variant,
    alpha: Option<f64>,
) -> f64 {
    let coercivity = match variant {
        Variant::Dirichlet => constants.lambda0,
        Variant::Robin => constants.lambda1 * alpha.unwrap_or(1.0).min(1.0),
    };
    contraction_formula(coercivity, constants.trace_norm, m1, m2)
}

pub fn contraction_formula(coercivity: f64, trace_norm: f64, m1: f64, m2: f64) -> f64 {
    let g = trace_norm;
    2.0 / (coercivity * coercivity) * (1.0 / (m1 * m1) + g * g / (m2 * m2)).sqrt() * (1.0 + g)
}

pub fn apply_c(
    data: &ProblemData,
    ctrl: &ControlPair,
    ops: &DiscreteOperators,
    variant: Variant,
) -> Result<Trajectory> {
    ControlProblem::new(data, ops, variant)?.apply_c(ctrl)
}

pub fn cost_j(data: &ProblemData, ctrl: &ControlPair, ops: &DiscreteOperators, variant: Variant) -> Result<f64> {
    ControlProblem::new(data, ops, variant)?.cost(ctrl)
}

pub fn gradient_j(
    data: &ProblemData,
    ctrl: &ControlPair,
    ops: &DiscreteOperators,
    variant: Variant,
) -> Result<ControlPair> {
    ControlProblem::new(data, ops, variant)?.gradient(ctrl)
}

pub fn convexity_gap(
    data: &ProblemData,
    c1: &ControlPair,
    c2: &ControlPair,
    t: f64,
    ops: &DiscreteOperators,
    variant: Variant,
) -> Result<f64> {
    ControlProblem::new(data, ops, variant)?.convexity_gap(c1, c2, t)
}

pub fn apply_w(
    data: &ProblemData,
    ctrl: &ControlPair,
    ops: &DiscreteOperators,
    variant: Variant,
) -> Result<ControlPair> {
    ControlProblem::new(data, ops, variant)?.apply_w(ctrl)
}

pub fn solve_cg(
    data: &ProblemData,
    ops: &DiscreteOperators,
    variant: Variant,
    tol: f64,
) -> Result<OptimalityReport> {
    ControlProblem::new(data, ops, variant)?.solve_cg(tol, DEFAULT_MAX_ITER)
}

pub fn solve_fixed_point(
    data: &ProblemData,
    ops: &DiscreteOperators,
    variant: Variant,
    tol: f64,
    max_iter: usize,
) -> Result<OptimalityReport> {
    ControlProblem::new(data, ops, variant)?.solve_fixed_point(tol, max_iter)
}

pub fn solve_distributed_only(
    data: &ProblemData,
    q_fixed: &[Vec<f64>],
    ops: &DiscreteOperators,
    variant: Variant,
    tol: f64,
) -> Result<OptimalityReport> {
    ControlProblem::new(data, ops, variant)?.solve_distributed_only(q_fixed, tol, DEFAULT_MAX_ITER)
}
