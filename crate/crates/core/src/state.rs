//! Problem data, controls, trajectories and the implicit Euler solvers for
//! the two state systems:
//!
//! * [`Variant::Dirichlet`]: `u = b` on Gamma1, flux `q` on Gamma2.
//! * [`Variant::Robin`]: `-du/dn = alpha (u - b)` on Gamma1, flux `q` on Gamma2.
//!
//! Time indexing: trajectories carry `n_steps + 1` slices, slice 0 being the
//! initial time. Controls and targets carry `n_steps` slices; control slice
//! `k` is the load applied in the step that produces state slice `k + 1`.

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteOperators;
use crate::error::{Error, Result};
use crate::linalg::{axpy, SparseSym, SpdSolver};
use crate::mesh::TimeGrid;

pub type TimeSeries = Vec<Vec<f64>>;

/// Which state system a computation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Mixed Dirichlet/Neumann system.
    Dirichlet,
    /// Mixed Robin/Neumann system with coefficient `alpha`.
    Robin,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Dirichlet => "dirichlet",
            Variant::Robin => "robin",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    b: Vec<f64>,
    v_b: Vec<f64>,
    z_d: TimeSeries,
    m1: f64,
    m2: f64,
    alpha: f64,
    grid: TimeGrid,
}

impl ProblemData {
    /// `b` holds one value per Dirichlet node (in `ops.dirichlet_nodes`
    /// order); `v_b` must agree with it exactly on those nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: &DiscreteOperators,
        grid: TimeGrid,
        b: Vec<f64>,
        v_b: Vec<f64>,
        z_d: TimeSeries,
        m1: f64,
        m2: f64,
        alpha: f64,
    ) -> Result<Self> {
        let data = ProblemData {
            b,
            v_b,
            z_d,
            m1,
            m2,
            alpha,
            grid,
        };
        data.validate(ops)?;
        Ok(data)
    }

    fn validate(&self, ops: &DiscreteOperators) -> Result<()> {
        let n = ops.n_nodes();
        if self.b.len() != ops.dirichlet_nodes.len() {
            return Err(Error::contract(format!(
                "b has {} values, expected one per Dirichlet node ({})",
                self.b.len(),
                ops.dirichlet_nodes.len()
            )));
        }
        if self.v_b.len() != n {
            return Err(Error::contract(format!(
                "v_b has {} values, expected {n}",
                self.v_b.len()
            )));
        }
        for (k, &i) in ops.dirichlet_nodes.iter().enumerate() {
            if self.v_b[i] != self.b[k] {
                return Err(Error::contract(format!(
                    "v_b({i}) = {} differs from b = {} on a Dirichlet node",
                    self.v_b[i], self.b[k]
                )));
            }
        }
        check_series("z_d", &self.z_d, self.grid.n_steps(), n)?;
        if !(self.m1 > 0.0 && self.m2 > 0.0) {
            return Err(Error::contract(format!(
                "cost weights must be positive (M1 = {}, M2 = {})",
                self.m1, self.m2
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::contract(format!(
                "Robin coefficient must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn v_b(&self) -> &[f64] {
        &self.v_b
    }

    pub fn z_d(&self) -> &TimeSeries {
        &self.z_d
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn tau(&self) -> f64 {
        self.grid.tau()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::contract(format!(
                "Robin coefficient must be positive, got {alpha}"
            )));
        }
        Ok(ProblemData {
            alpha,
            ..self.clone()
        })
    }

    pub fn with_weights(&self, m1: f64, m2: f64) -> Result<Self> {
        if !(m1 > 0.0 && m2 > 0.0) {
            return Err(Error::contract(format!(
                "cost weights must be positive (M1 = {m1}, M2 = {m2})"
            )));
        }
        Ok(ProblemData {
            m1,
            m2,
            ..self.clone()
        })
    }

    /// Replaces the target by the given state trajectory (slices 1..=n_steps).
    pub fn with_target_trajectory(&self, u: &Trajectory) -> Result<Self> {
        if u.slices.len() != self.n_steps() + 1 {
            return Err(Error::contract("target trajectory has the wrong length"));
        }
        Ok(ProblemData {
            z_d: u.slices[1..].to_vec(),
            ..self.clone()
        })
    }

    pub fn with_target(&self, z_d: TimeSeries) -> Result<Self> {
        let n = self.v_b.len();
        check_series("z_d", &z_d, self.n_steps(), n)?;
        Ok(ProblemData {
            z_d,
            ..self.clone()
        })
    }
}

fn check_series(name: &str, series: &[Vec<f64>], n_steps: usize, width: usize) -> Result<()> {
    if series.len() != n_steps {
        return Err(Error::contract(format!(
            "{name} has {} time slices, expected {n_steps}",
            series.len()
        )));
    }
    if let Some((k, s)) = series.iter().enumerate().find(|(_, s)| s.len() != width) {
        return Err(Error::contract(format!(
            "{name} slice {k} has {} values, expected {width}",
            s.len()
        )));
    }
    Ok(())
}

/// `(a, b)_{L^2(0,T;X)}` for the Gram matrix `gram` of `X`, rectangle rule.
pub fn series_inner(gram: &SparseSym, tau: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    tau * a.iter().zip(b).map(|(x, y)| gram.bilinear(x, y)).sum::<f64>()
}

/// Distributed control `g` (nodal, per step) and boundary flux `q`
/// (Gamma2 nodes, per step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub g: TimeSeries,
    pub q: TimeSeries,
}

impl ControlPair {
    pub fn zeros(ops: &DiscreteOperators, n_steps: usize) -> Self {
        ControlPair {
            g: vec![vec![0.0; ops.n_nodes()]; n_steps],
            q: vec![vec![0.0; ops.n_gamma2()]; n_steps],
        }
    }

    pub fn check(&self, ops: &DiscreteOperators, n_steps: usize) -> Result<()> {
        check_series("g", &self.g, n_steps, ops.n_nodes())?;
        check_series("q", &self.q, n_steps, ops.n_gamma2())
    }

    pub fn n_steps(&self) -> usize {
        self.g.len()
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ControlPair) {
        for (x, y) in self.g.iter_mut().zip(&other.g) {
            axpy(a, y, x);
        }
        for (x, y) in self.q.iter_mut().zip(&other.q) {
            axpy(a, y, x);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.g.iter_mut().chain(self.q.iter_mut()).flatten().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> ControlPair {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &ControlPair, b: f64) -> ControlPair {
        let mut out = self.scaled(a);
        out.axpy(b, other);
        out
    }

    pub fn sub(&self, other: &ControlPair) -> ControlPair {
        self.combine(1.0, other, -1.0)
    }

    pub fn h_inner(&self, other: &ControlPair, ops: &DiscreteOperators, tau: f64) -> f64 {
        series_inner(&ops.mass, tau, &self.g, &other.g)
    }

    pub fn q_inner(&self, other: &ControlPair, ops: &DiscreteOperators, tau: f64) -> f64 {
        series_inner(&ops.gamma2_mass_trace, tau, &self.q, &other.q)
    }

    /// Product inner product on `H x Q`.
    pub fn inner(&self, other: &ControlPair, ops: &DiscreteOperators, tau: f64) -> f64 {
        self.h_inner(other, ops, tau) + self.q_inner(other, ops, tau)
    }

    pub fn norm(&self, ops: &DiscreteOperators, tau: f64) -> f64 {
        self.inner(self, ops, tau).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    State,
    Adjoint,
}

/// Nodal fields at the `n_steps + 1` grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub slices: Vec<Vec<f64>>,
    pub role: Role,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.slices.len() - 1
    }

    /// Slice-wise `self - other`; keeps `self`'s role.
    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Trajectory {
            slices,
            role: self.role,
        }
    }

    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.slices
            .iter()
            .flatten()
            .zip(other.slices.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `sqrt(tau * sum_n x_n^T G x_n)` over all slices.
    pub fn l2_norm(&self, gram: &SparseSym, tau: f64) -> f64 {
        (tau * self.slices.iter().map(|x| gram.quad_form(x)).sum::<f64>())
            .max(0.0)
            .sqrt()
    }
}

/// Implicit Euler stepping for one variant on one time grid. The step
/// matrix is factored once at construction; forward and backward sweeps
/// reuse it.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    ops: &'a DiscreteOperators,
    variant: Variant,
    alpha: f64,
    tau: f64,
    n_steps: usize,
    mass_over_tau: SparseSym,
    /// Nodes carrying unknowns: free nodes (Dirichlet) or all nodes (Robin).
    active: Vec<usize>,
    solver: SpdSolver,
    /// Data-only right-hand side contribution on the full node set.
    lift: Vec<f64>,
    /// `b` extended by zero off the Dirichlet nodes.
    b_full: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(data: &ProblemData, ops: &'a DiscreteOperators, variant: Variant) -> Result<Self> {
        let tau = data.tau();
        let mass_over_tau = ops.mass.scaled(1.0 / tau);
        let mut step = mass_over_tau.linear_combination(1.0, &ops.stiffness, 1.0);
        let b_full = ops.extend_dirichlet(data.b());
        let (active, lift) = match variant {
            Variant::Dirichlet => {
                let mut lift = step.mul_vec(&b_full);
                lift.iter_mut().for_each(|v| *v = -*v);
                (ops.free_nodes.clone(), lift)
            }
            Variant::Robin => {
                step = step.linear_combination(1.0, &ops.gamma1_mass, data.alpha());
                let mut lift = ops.gamma1_mass.mul_vec(&b_full);
                lift.iter_mut().for_each(|v| *v *= data.alpha());
                ((0..ops.n_nodes()).collect(), lift)
            }
        };
        let solver = SpdSolver::auto(&step.submatrix(&active))?;
        Ok(Propagator {
            ops,
            variant,
            alpha: data.alpha(),
            tau,
            n_steps: data.n_steps(),
            mass_over_tau,
            active,
            solver,
            lift,
            b_full,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn ops(&self) -> &'a DiscreteOperators {
        self.ops
    }

    fn solve_active(&self, rhs_full: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.active.iter().map(|&i| rhs_full[i]).collect();
        let x = self.solver.solve(&rhs)?;
        let mut out = vec![0.0; rhs_full.len()];
        for (&i, v) in self.active.iter().zip(x) {
            out[i] = v;
        }
        Ok(out)
    }

    /// Forward sweep. With `homogeneous` set, the data (`b`, `v_b`) are
    /// replaced by zero, which yields the linear control-to-state part.
    fn forward(&self, v_b: &[f64], ctrl: &ControlPair, homogeneous: bool) -> Result<Trajectory> {
        ctrl.check(self.ops, self.n_steps)?;
        let n = self.ops.n_nodes();
        let mut slices = Vec::with_capacity(self.n_steps + 1);
        slices.push(if homogeneous { vec![0.0; n] } else { v_b.to_vec() });
        let mut rhs = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for k in 0..self.n_steps {
            self.mass_over_tau.mul_vec_into(&slices[k], &mut rhs);
            self.ops.mass.mul_vec_into(&ctrl.g[k], &mut tmp);
            axpy(1.0, &tmp, &mut rhs);
            self.ops
                .gamma2_mass
                .mul_vec_into(&self.ops.extend_gamma2(&ctrl.q[k]), &mut tmp);
            axpy(-1.0, &tmp, &mut rhs);
            if !homogeneous {
                axpy(1.0, &self.lift, &mut rhs);
            }
            let mut next = self.solve_active(&rhs)?;
            if self.variant == Variant::Dirichlet && !homogeneous {
                for &i in &self.ops.dirichlet_nodes {
                    next[i] = self.b_full[i];
                }
            }
            slices.push(next);
        }
        Ok(Trajectory {
            slices,
            role: Role::State,
        })
    }

    pub fn state(&self, data: &ProblemData, ctrl: &ControlPair) -> Result<Trajectory> {
        self.forward(data.v_b(), ctrl, false)
    }

    /// `u_{gq} - u_{00}` computed directly from zero data.
    pub fn linear_state(&self, ctrl: &ControlPair) -> Result<Trajectory> {
        self.forward(&[], ctrl, true)
    }

    /// Backward sweep driven by `source` (`n_steps` slices, slice `k`
    /// pairing with state slice `k + 1`). Returns `n_steps + 1` slices with
    /// the last one zero; adjoint slice `k` pairs with control slice `k`.
    pub fn backward(&self, source: &[Vec<f64>]) -> Result<Trajectory> {
        check_series("adjoint source", source, self.n_steps, self.ops.n_nodes())?;
        let n = self.ops.n_nodes();
        let mut slices = vec![vec![0.0; n]; self.n_steps + 1];
        let mut rhs = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for k in (0..self.n_steps).rev() {
            self.mass_over_tau.mul_vec_into(&slices[k + 1], &mut rhs);
            self.ops.mass.mul_vec_into(&source[k], &mut tmp);
            axpy(1.0, &tmp, &mut rhs);
            slices[k] = self.solve_active(&rhs)?;
        }
        Ok(Trajectory {
            slices,
            role: Role::Adjoint,
        })
    }

    /// Tracking residual `u - z_d` at slices 1..=n_steps.
    pub fn residual(&self, data: &ProblemData, u: &Trajectory) -> Result<TimeSeries> {
        if u.slices.len() != self.n_steps + 1 {
            return Err(Error::contract(format!(
                "trajectory has {} slices, expected {}",
                u.slices.len(),
                self.n_steps + 1
            )));
        }
        Ok(u.slices[1..]
            .iter()
            .zip(data.z_d())
            .map(|(a, z)| a.iter().zip(z).map(|(x, y)| x - y).collect())
            .collect())
    }

    pub fn adjoint(&self, data: &ProblemData, u: &Trajectory) -> Result<Trajectory> {
        self.backward(&self.residual(data, u)?)
    }
}

pub fn solve_state_p(
    data: &ProblemData,
    ctrl: &ControlPair,
    ops: &DiscreteOperators,
) -> Result<Trajectory> {
    Propagator::new(data, ops, Variant::Dirichlet)?.state(data, ctrl)
}

pub fn solve_state_palpha(
    data: &ProblemData,
    ctrl: &ControlPair,
    ops: &DiscreteOperators,
) -> Result<Trajectory> {
    Propagator::new(data, ops, Variant::Robin)?.state(data, ctrl)
}
