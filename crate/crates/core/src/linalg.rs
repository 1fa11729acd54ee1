//! Sparse symmetric matrices, SPD solves and extreme generalized eigenvalues.

use crate::error::{Error, Result};

/// Symmetric matrix in compressed-row form. Both triangles are stored so
/// that matrix-vector products are a plain row sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets, summing duplicates. The
    /// caller supplies both `(i, j)` and `(j, i)` entries.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                while let Some(&(jj, w)) = iter.peek() {
                    if jj != j {
                        break;
                    }
                    v += w;
                    iter.next();
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseSym {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn scaled(&self, a: f64) -> SparseSym {
        SparseSym {
            values: self.values.iter().map(|v| a * v).collect(),
            ..self.clone()
        }
    }

    /// `a * self + b * other`; the two must share a dimension.
    pub fn linear_combination(&self, a: f64, other: &SparseSym, b: f64) -> SparseSym {
        assert_eq!(self.n, other.n);
        let triplets = (0..self.n).flat_map(|i| {
            self.row(i)
                .map(move |(j, v)| (i, j, a * v))
                .chain(other.row(i).map(move |(j, v)| (i, j, b * v)))
        });
        SparseSym::from_triplets(self.n, triplets.collect::<Vec<_>>())
    }

    /// Principal submatrix on `indices` (renumbered in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> SparseSym {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in indices.iter().enumerate() {
            map[i] = k;
        }
        let triplets: Vec<_> = indices
            .iter()
            .enumerate()
            .flat_map(|(k, &i)| {
                let map = &map;
                self.row(i)
                    .filter(|&(j, _)| map[j] != usize::MAX)
                    .map(move |(j, v)| (k, map[j], v))
            })
            .collect();
        SparseSym::from_triplets(indices.len(), triplets)
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry magnitude.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }

    /// First stored column of each row (the envelope).
    fn first_columns(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i))
            .collect()
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Envelope (skyline) Cholesky factor `A = L L^T`. On the structured
/// meshes used here the profile width is about `nx + 2`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.dim();
        let first = a.first_columns();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(i).filter(|&(j, _)| j <= i) {
                data[offset[i] + (j - first[i])] = v;
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + (j - fi)];
                let row_i = &data[offset[i] + (start - fi)..offset[i] + (j - fi)];
                let row_j = &data[offset[j] + (start - fj)..offset[j] + (j - fj)];
                s -= dot(row_i, row_j);
                if j < i {
                    data[offset[i] + (j - fi)] = s / data[offset[j + 1] - 1];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    data[offset[i] + (i - fi)] = s.sqrt();
                }
            }
        }
        Ok(Cholesky {
            n,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        // L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &x[fi..i]);
            x[i] = (x[i] - s) / row[i - fi];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                x[fi + k] -= l * xi;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradient on an SPD matrix.
#[derive(Debug, Clone)]
pub struct Pcg {
    matrix: SparseSym,
    inv_diag: Vec<f64>,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Pcg {
    pub fn new(matrix: SparseSym) -> Result<Self> {
        let inv_diag = matrix
            .diagonal()
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::NotPositiveDefinite { pivot: i, value: d })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let max_iter = 10 * matrix.dim() + 100;
        Ok(Pcg {
            matrix,
            inv_diag,
            rel_tol: 1e-13,
            max_iter,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.dim();
        let rhs_norm = norm2(rhs);
        let mut x = vec![0.0; n];
        if rhs_norm == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for _ in 0..self.max_iter {
            self.matrix.mul_vec_into(&p, &mut ap);
            let step = rz / dot(&p, &ap);
            axpy(step, &p, &mut x);
            axpy(-step, &ap, &mut r);
            if norm2(&r) <= self.rel_tol * rhs_norm {
                return Ok(x);
            }
            for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&self.inv_diag) {
                *zi = ri * di;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        let residual = norm2(&r) / rhs_norm;
        Err(Error::SolverFailure {
            iterations: self.max_iter,
            residual,
        })
    }
}

/// Above this dimension [`SpdSolver::auto`] switches to the iterative path.
pub const DIRECT_SOLVE_LIMIT: usize = 40_000;

/// A reusable solver for one SPD matrix. The factorization (or the
/// preconditioner) is built once and is read-only afterwards.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(Cholesky),
    Iterative(Pcg),
}

impl SpdSolver {
    pub fn direct(a: &SparseSym) -> Result<Self> {
        Ok(SpdSolver::Direct(Cholesky::factor(a)?))
    }

    pub fn iterative(a: &SparseSym) -> Result<Self> {
        Ok(SpdSolver::Iterative(Pcg::new(a.clone())?))
    }

    pub fn auto(a: &SparseSym) -> Result<Self> {
        if a.dim() <= DIRECT_SOLVE_LIMIT {
            Self::direct(a)
        } else {
            Self::iterative(a)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpdSolver::Direct(c) => c.dim(),
            SpdSolver::Iterative(p) => p.matrix.dim(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; rhs.len()]);
        }
        match self {
            SpdSolver::Direct(c) => Ok(c.solve(rhs)),
            SpdSolver::Iterative(p) => p.solve(rhs),
        }
    }
}

/// One-shot SPD solve.
pub fn spd_solve(a: &SparseSym, rhs: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::auto(a)?.solve(rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

const EIG_MAX_ITER: usize = 20_000;
const EIG_REL_TOL: f64 = 1e-12;

/// Extreme eigenvalue of the pencil `A x = lambda B x` with `B` SPD and `A`
/// symmetric positive semidefinite.
///
/// The smallest one comes from inverse iteration (`x <- A^{-1} B x`, with a
/// shift by `B` when `A` is singular), the largest from power iteration on
/// `B^{-1} A`. Both start from a fixed generic B-normalized vector.
pub fn gen_eig_extreme(a: &SparseSym, b: &SparseSym, which: Extreme) -> Result<f64> {
    assert_eq!(a.dim(), b.dim());
    let n = a.dim();
    if n == 0 {
        return Err(Error::contract("empty eigenproblem"));
    }

    let solver = match which {
        Extreme::Largest => SpdSolver::auto(b)?,
        Extreme::Smallest => match SpdSolver::auto(a) {
            Ok(s) => s,
            // Same eigenvectors, eigenvalues shifted by one.
            Err(Error::NotPositiveDefinite { .. }) => {
                SpdSolver::auto(&a.linear_combination(1.0, b, 1.0))?
            }
            Err(e) => return Err(e),
        },
    };

    let b_normalize = |x: &mut Vec<f64>| {
        let s = b.quad_form(x).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
    };

    // Not all-ones: that is an exact eigenvector whenever A = K + c B.
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    b_normalize(&mut x);
    let mut rayleigh = a.quad_form(&x);
    let mut residual = f64::INFINITY;
    for _ in 0..EIG_MAX_ITER {
        let rhs = match which {
            Extreme::Smallest => b.mul_vec(&x),
            Extreme::Largest => a.mul_vec(&x),
        };
        let mut y = solver.solve(&rhs)?;
        if y.iter().all(|&v| v == 0.0) {
            // A x = 0 for a B-normalized x: the largest eigenvalue is 0.
            return Ok(0.0);
        }
        b_normalize(&mut y);
        x = y;
        let ax = a.mul_vec(&x);
        let bx = b.mul_vec(&x);
        let next = dot(&x, &ax);
        let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - next * q).collect();
        residual = norm2(&r) / (norm2(&ax) + norm2(&bx)).max(f64::MIN_POSITIVE);
        let change = (next - rayleigh).abs();
        rayleigh = next;
        if change <= EIG_REL_TOL * rayleigh.abs().max(f64::MIN_POSITIVE) && residual <= 1e-5 {
            return Ok(rayleigh);
        }
    }
    Err(Error::EigenFailure {
        iterations: EIG_MAX_ITER,
        rayleigh,
        residual,
    })
}

/// Generalized Rayleigh quotient `x^T A x / x^T B x`.
pub fn rayleigh(a: &SparseSym, b: &SparseSym, x: &[f64]) -> f64 {
    a.quad_form(x) / b.quad_form(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseSym {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSym::from_triplets(n, t)
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let x = spd_solve(&SparseSym::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        let x = spd_solve(&SparseSym::from_diagonal(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15), "{x:?}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let x = spd_solve(&tridiag(5), &[0.0; 5]).unwrap();
        assert_eq!(x, vec![0.0; 5]);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseSym::from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let a = tridiag(50);
        let rhs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = SpdSolver::direct(&a).unwrap().solve(&rhs).unwrap();
        let x2 = SpdSolver::iterative(&a).unwrap().solve(&rhs).unwrap();
        let r = a.mul_vec(&x1);
        let res: Vec<f64> = r.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) <= 1e-12 * norm2(&rhs));
        let diff: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p - q).collect();
        assert!(norm2(&diff) <= 1e-10 * norm2(&x1));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SparseSym::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn pcg_reports_failure_with_residual() {
        let mut pcg = Pcg::new(tridiag(30)).unwrap();
        pcg.max_iter = 2;
        let rhs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        match pcg.solve(&rhs) {
            Err(Error::SolverFailure { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_eigen_extremes() {
        let a = SparseSym::from_diagonal(&[1.0, 3.0]);
        let smallest = gen_eig_extreme(&a, &SparseSym::identity(2), Extreme::Smallest).unwrap();
        assert!((smallest - 1.0).abs() < 1e-8);
        let b = SparseSym::from_diagonal(&[1.0, 0.5]);
        let largest = gen_eig_extreme(&a, &b, Extreme::Largest).unwrap();
        assert!((largest - 6.0).abs() < 6e-8);
    }

    #[test]
    fn singular_a_uses_shift() {
        // A = [[1,-1],[-1,1]] has eigenvalues 0 and 2 against the identity.
        let a = SparseSym::from_triplets(2, [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
        let b = SparseSym::from_diagonal(&[1.0, 2.0]);
        let smallest = gen_eig_extreme(&a, &b, Extreme::Smallest).unwrap();
        assert!(smallest.abs() < 1e-8);
    }

    #[test]
    fn submatrix_keeps_order() {
        let a = tridiag(4);
        let s = a.submatrix(&[1, 3]);
        assert_eq!(s.to_dense(), vec![vec![4.0, 0.0], vec![0.0, 4.0]]);
        let s = a.submatrix(&[2, 1]);
        assert_eq!(s.to_dense(), vec![vec![4.0, -1.0], vec![-1.0, 4.0]]);
    }
}
