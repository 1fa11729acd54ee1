//! Dense reference implementations and shared instances for the integration
//! tests. Nothing here reuses the crate's assembly, stepping or solvers; only
//! the mesh geometry and the problem data are taken as input.
#![allow(dead_code)]

use std::collections::BTreeMap;

use heatopt::assembly::{assemble, DiscreteOperators};
use heatopt::config::RunConfig;
use heatopt::mesh::{build_rect_mesh, Mesh, Side, TimeGrid};
use heatopt::state::{ControlPair, ProblemData, Variant};
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_CONFIG: &str = r#"
[mesh]
nx = 16
ny = 16
gamma1 = ["left"]

[time]
final_time = 1.0
n_steps = 32

[problem]
m1 = 0.01
m2 = 0.01
alpha = 10.0
b = { kind = "constant", value = 1.0 }
v_b = { kind = "linear", c0 = 1.0, cx = -1.0 }
z_d = { kind = "gaussian", amplitude = 1.0, center = [0.5, 0.5], width = 0.2 }
"#;

pub struct Instance {
    pub mesh: Mesh,
    pub ops: DiscreteOperators,
    pub data: ProblemData,
}

pub fn from_config(text: &str) -> Instance {
    let inst = RunConfig::parse(text, ".").unwrap().instance(Variant::Dirichlet).unwrap();
    Instance {
        mesh: inst.mesh,
        ops: inst.ops,
        data: inst.data,
    }
}

/// 16x16 mesh, 32 steps on [0, 1], Dirichlet side on the left, `b = 1`,
/// `v_b = 1 - x`, gaussian target.
pub fn default_instance() -> Instance {
    from_config(DEFAULT_CONFIG)
}

/// 2x2 mesh, 2 steps, nonzero lift and a space-time varying target.
pub fn tiny_instance(m1: f64, m2: f64, alpha: f64) -> Instance {
    let mesh = build_rect_mesh(2, 2, &[Side::Left]).unwrap();
    let ops = assemble(&mesh).unwrap();
    let n = mesh.n_nodes();
    let b: Vec<f64> = ops.dirichlet_nodes.iter().map(|&i| 0.5 + mesh.nodes()[i][1]).collect();
    let v_b: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| 0.5 + p[1] - 0.3 * p[0] * (1.0 - p[0]))
        .collect();
    let z_d = (1..=2)
        .map(|k| {
            mesh.nodes()
                .iter()
                .map(|p| (k as f64) * 0.2 * (3.0 * p[0]).sin() + p[1] * p[1])
                .collect()
        })
        .collect();
    let data = ProblemData::new(&ops, TimeGrid::new(0.5, 2).unwrap(), b, v_b, z_d, m1, m2, alpha).unwrap();
    debug_assert_eq!(data.v_b().len(), n);
    Instance { mesh, ops, data }
}

pub fn random_control(ops: &DiscreteOperators, n_steps: usize, rng: &mut ChaCha8Rng) -> ControlPair {
    let mut c = ControlPair::zeros(ops, n_steps);
    c.g.iter_mut()
        .chain(c.q.iter_mut())
        .flatten()
        .for_each(|v| *v = rng.random_range(-1.0..1.0));
    c
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense finite-element matrices assembled from the mesh geometry alone.
pub struct DenseOps {
    pub k: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub dirichlet: Vec<usize>,
    pub gamma2: Vec<usize>,
}

fn side_of(a: [f64; 2], b: [f64; 2]) -> Option<Side> {
    let on = |v: f64, t: f64| (v - t).abs() < 1e-12;
    if on(a[0], 0.0) && on(b[0], 0.0) {
        Some(Side::Left)
    } else if on(a[0], 1.0) && on(b[0], 1.0) {
        Some(Side::Right)
    } else if on(a[1], 0.0) && on(b[1], 0.0) {
        Some(Side::Bottom)
    } else if on(a[1], 1.0) && on(b[1], 1.0) {
        Some(Side::Top)
    } else {
        None
    }
}

pub fn dense_assembly(mesh: &Mesh) -> DenseOps {
    let n = mesh.n_nodes();
    let x = mesh.nodes();
    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();

    for tri in mesh.triangles() {
        let [p0, p1, p2] = tri.map(|i| x[i]);
        // reference map x = p0 + J xi
        let jac = DMatrix::from_row_slice(2, 2, &[p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1]]);
        let det = jac.determinant();
        assert!(det > 0.0);
        let area = det / 2.0;
        let jinv_t = jac.try_inverse().unwrap().transpose();
        let ref_grads = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let grads: Vec<DVector<f64>> = ref_grads
            .iter()
            .map(|g| &jinv_t * DVector::from_row_slice(g))
            .collect();
        // edge-midpoint quadrature is exact for quadratics
        let mids = [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        let phi = |a: usize, xi: [f64; 2]| match a {
            0 => 1.0 - xi[0] - xi[1],
            1 => xi[0],
            _ => xi[1],
        };
        for a in 0..3 {
            for b in 0..3 {
                k[(tri[a], tri[b])] += area * grads[a].dot(&grads[b]);
                let q: f64 = mids.iter().map(|&xi| phi(a, xi) * phi(b, xi)).sum();
                m[(tri[a], tri[b])] += area / 3.0 * q;
            }
        }
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }

    let gamma1 = mesh.gamma1_sides();
    let mut b1 = DMatrix::zeros(n, n);
    let mut b2 = DMatrix::zeros(n, n);
    let mut dirichlet = Vec::new();
    let mut gamma2 = Vec::new();
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    for (&(a, b), &count) in &edge_count {
        if count != 1 {
            continue;
        }
        let side = side_of(x[a], x[b]).expect("boundary edge on the unit square");
        let len = ((x[a][0] - x[b][0]).powi(2) + (x[a][1] - x[b][1]).powi(2)).sqrt();
        let target = if gamma1.contains(&side) {
            dirichlet.extend([a, b]);
            &mut b1
        } else {
            gamma2.extend([a, b]);
            &mut b2
        };
        for s in gauss {
            let w = [1.0 - s, s];
            let ids = [a, b];
            for i in 0..2 {
                for j in 0..2 {
                    target[(ids[i], ids[j])] += len / 2.0 * w[i] * w[j];
                }
            }
        }
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    gamma2.sort_unstable();
    gamma2.dedup();
    DenseOps {
        k,
        m,
        b1,
        b2,
        dirichlet,
        gamma2,
    }
}

/// Dense copy of the crate's sparse matrix.
pub fn to_dense(a: &heatopt::linalg::SparseSym) -> DMatrix<f64> {
    let n = a.dim();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

/// The whole implicit Euler trajectory as one dense linear system
/// `L U = F c + r`, `U = (u^1, ..., u^N)`, `c = (g^0..g^{N-1}, q^0..q^{N-1})`.
pub struct SpaceTime {
    pub n: usize,
    pub nq: usize,
    pub steps: usize,
    pub tau: f64,
    /// Control-to-state matrix `L^{-1} F`.
    pub s: DMatrix<f64>,
    /// Uncontrolled trajectory `L^{-1} r`.
    pub u00: DVector<f64>,
    /// `blockdiag(tau M)` on states and on distributed controls.
    pub w: DMatrix<f64>,
    /// Gram matrix of `H x Q`.
    pub gram: DMatrix<f64>,
    pub z: DVector<f64>,
    pub m1: f64,
    pub m2: f64,
}

pub fn space_time(d: &DenseOps, data: &ProblemData, variant: Variant) -> SpaceTime {
    let n = d.m.nrows();
    let nq = d.gamma2.len();
    let steps = data.n_steps();
    let tau = data.tau();
    let nc = steps * (n + nq);
    let mut l = DMatrix::zeros(steps * n, steps * n);
    let mut f = DMatrix::zeros(steps * n, nc);
    let mut r = DVector::zeros(steps * n);
    let m_tau = &d.m / tau;

    let mut b_full = DVector::zeros(n);
    for (k, &i) in d.dirichlet.iter().enumerate() {
        b_full[i] = data.b()[k];
    }
    let v_b = DVector::from_column_slice(data.v_b());
    let a = match variant {
        Variant::Dirichlet => &m_tau + &d.k,
        Variant::Robin => &m_tau + &d.k + &d.b1 * data.alpha(),
    };
    let robin_load = &d.b1 * &b_full * data.alpha();
    let is_dirichlet = |i: usize| variant == Variant::Dirichlet && d.dirichlet.binary_search(&i).is_ok();

    for step in 0..steps {
        let row0 = step * n;
        for i in 0..n {
            let row = row0 + i;
            if is_dirichlet(i) {
                l[(row, row)] = 1.0;
                r[row] = b_full[i];
                continue;
            }
            for j in 0..n {
                l[(row, row0 + j)] = a[(i, j)];
                if step > 0 {
                    l[(row, row0 - n + j)] = -m_tau[(i, j)];
                }
                f[(row, step * n + j)] = d.m[(i, j)];
            }
            for (kq, &node) in d.gamma2.iter().enumerate() {
                f[(row, steps * n + step * nq + kq)] = -d.b2[(i, node)];
            }
            if step == 0 {
                r[row] += (m_tau.row(i) * &v_b)[0];
            }
            if variant == Variant::Robin {
                r[row] += robin_load[i];
            }
        }
    }
    let lu = l.lu();
    let s = lu.solve(&f).unwrap();
    let u00 = lu.solve(&r).unwrap();

    let b2r = DMatrix::from_fn(nq, nq, |a, b| d.b2[(d.gamma2[a], d.gamma2[b])]);
    let mut w = DMatrix::zeros(steps * n, steps * n);
    let mut gram = DMatrix::zeros(nc, nc);
    for step in 0..steps {
        w.view_mut((step * n, step * n), (n, n)).copy_from(&(&d.m * tau));
        gram.view_mut((step * n, step * n), (n, n)).copy_from(&(&d.m * tau));
        let o = steps * n + step * nq;
        gram.view_mut((o, o), (nq, nq)).copy_from(&(&b2r * tau));
    }
    let z = DVector::from_iterator(steps * n, data.z_d().iter().flatten().copied());
    SpaceTime {
        n,
        nq,
        steps,
        tau,
        s,
        u00,
        w,
        gram,
        z,
        m1: data.m1(),
        m2: data.m2(),
    }
}

impl SpaceTime {
    pub fn flatten(&self, c: &ControlPair) -> DVector<f64> {
        DVector::from_iterator(
            self.steps * (self.n + self.nq),
            c.g.iter().flatten().chain(c.q.iter().flatten()).copied(),
        )
    }

    pub fn unflatten(&self, v: &DVector<f64>) -> ControlPair {
        let (n, nq, steps) = (self.n, self.nq, self.steps);
        ControlPair {
            g: (0..steps).map(|k| v.rows(k * n, n).iter().copied().collect()).collect(),
            q: (0..steps)
                .map(|k| v.rows(steps * n + k * nq, nq).iter().copied().collect())
                .collect(),
        }
    }

    /// Weights `M1` on distributed, `M2` on boundary entries of the Gram matrix.
    pub fn regularization(&self) -> DMatrix<f64> {
        let split = self.steps * self.n;
        let mut r = self.gram.clone();
        let total = r.nrows();
        r.view_mut((0, 0), (split, total)).scale_mut(self.m1);
        r.view_mut((split, 0), (total - split, total)).scale_mut(self.m2);
        r
    }

    pub fn states(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.s * c + &self.u00
    }

    pub fn cost(&self, c: &DVector<f64>) -> f64 {
        let e = self.states(c) - &self.z;
        0.5 * (e.transpose() * &self.w * &e)[0] + 0.5 * (c.transpose() * self.regularization() * c)[0]
    }

    /// Euclidean gradient of the cost.
    pub fn euclidean_gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        let e = self.states(c) - &self.z;
        self.s.transpose() * (&self.w * e) + self.regularization() * c
    }

    /// Riesz representative in `H x Q`.
    pub fn gradient(&self, c: &DVector<f64>) -> DVector<f64> {
        self.gram.clone().lu().solve(&self.euclidean_gradient(c)).unwrap()
    }

    /// Minimizer from the dense normal equations.
    pub fn kkt_solution(&self) -> DVector<f64> {
        let h = self.s.transpose() * &self.w * &self.s + self.regularization();
        let rhs = self.s.transpose() * (&self.w * (&self.z - &self.u00));
        h.lu().solve(&rhs).unwrap()
    }

    pub fn norm(&self, c: &DVector<f64>) -> f64 {
        (c.transpose() * &self.gram * c)[0].sqrt()
    }
}

/// All generalized eigenvalues of `A x = lambda B x`, ascending.
pub fn dense_gen_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let l = b.clone().cholesky().expect("B must be SPD").l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn submatrix(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| a[(idx[i], idx[j])])
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
