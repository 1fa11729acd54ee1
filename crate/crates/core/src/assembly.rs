//! P1 finite-element matrices on a [`Mesh`] and the discrete coercivity and
//! trace constants derived from them.
//!
//! Discrete norms used throughout the crate:
//! * `H = L^2(Omega)`: `v^T M v`
//! * `V = H^1(Omega)`: `v^T (K + M) v`
//! * `Q = L^2(Gamma2)`: `w^T B2r w` on the Gamma2 nodes

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gen_eig_extreme, Extreme, SparseSym};
use crate::mesh::{dof_partition, BoundaryTag, Mesh, MeshDescriptor};

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    /// `a(u, v) = int grad u . grad v`
    pub stiffness: SparseSym,
    /// `(u, v)_H`
    pub mass: SparseSym,
    /// `int_{Gamma1} u v`, on all nodes.
    pub gamma1_mass: SparseSym,
    /// `int_{Gamma2} u v`, on all nodes.
    pub gamma2_mass: SparseSym,
    /// `gamma2_mass` restricted to the Gamma2 nodes: the `(.,.)_Q` product.
    pub gamma2_mass_trace: SparseSym,
    /// Global indices of the Gamma2 nodes, in the order used by boundary fields.
    pub gamma2_nodes: Vec<usize>,
    /// Sorted nodes pinned by the Dirichlet condition (on Gamma1 edges).
    pub dirichlet_nodes: Vec<usize>,
    pub free_nodes: Vec<usize>,
    pub mesh: MeshDescriptor,
    n_nodes: usize,
}

/// Element stiffness and mass on one triangle with corners `p`.
fn element_matrices(p: [[f64; 2]; 3], area: f64) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    // grad phi_a = (y_b - y_c, x_c - x_b) / (2 area), (a, b, c) cyclic
    let mut grads = [[0.0; 2]; 3];
    for a in 0..3 {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        grads[a] = [
            (p[b][1] - p[c][1]) / (2.0 * area),
            (p[c][0] - p[b][0]) / (2.0 * area),
        ];
    }
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            m[a][b] = area / 12.0 * if a == b { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

pub fn assemble(mesh: &Mesh) -> Result<DiscreteOperators> {
    let n = mesh.n_nodes();
    let mut k_trip = Vec::with_capacity(9 * mesh.triangles().len());
    let mut m_trip = Vec::with_capacity(9 * mesh.triangles().len());

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: t, area });
        }
        let p = tri.map(|i| mesh.nodes()[i]);
        let (ke, me) = element_matrices(p, area);
        for a in 0..3 {
            for b in 0..3 {
                k_trip.push((tri[a], tri[b], ke[a][b]));
                m_trip.push((tri[a], tri[b], me[a][b]));
            }
        }
    }

    let mut g1_trip = Vec::new();
    let mut g2_trip = Vec::new();
    for edge in mesh.boundary_edges() {
        let len = mesh.edge_length(edge);
        let [a, b] = edge.nodes;
        let target = match edge.tag {
            BoundaryTag::Gamma1 => &mut g1_trip,
            BoundaryTag::Gamma2 => &mut g2_trip,
        };
        let (diag, off) = (len / 3.0, len / 6.0);
        target.extend([(a, a, diag), (b, b, diag), (a, b, off), (b, a, off)]);
    }

    let gamma2_mass = SparseSym::from_triplets(n, g2_trip);
    let gamma2_nodes = mesh.tagged_nodes(BoundaryTag::Gamma2);
    let gamma2_mass_trace = gamma2_mass.submatrix(&gamma2_nodes);
    let part = dof_partition(mesh);

    Ok(DiscreteOperators {
        stiffness: SparseSym::from_triplets(n, k_trip),
        mass: SparseSym::from_triplets(n, m_trip),
        gamma1_mass: SparseSym::from_triplets(n, g1_trip),
        gamma2_mass,
        gamma2_mass_trace,
        gamma2_nodes,
        dirichlet_nodes: part.dirichlet,
        free_nodes: part.free,
        mesh: mesh.descriptor(),
        n_nodes: n,
    })
}

impl DiscreteOperators {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_gamma2(&self) -> usize {
        self.gamma2_nodes.len()
    }

    /// Nodal field -> values at the Gamma2 nodes.
    pub fn trace_gamma2(&self, field: &[f64]) -> Vec<f64> {
        self.gamma2_nodes.iter().map(|&i| field[i]).collect()
    }

    /// Gamma2 field -> nodal field, zero off Gamma2.
    pub fn extend_gamma2(&self, trace: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (&i, &v) in self.gamma2_nodes.iter().zip(trace) {
            out[i] = v;
        }
        out
    }

    /// Dirichlet-node field -> nodal field, zero elsewhere.
    pub fn extend_dirichlet(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for (&i, &v) in self.dirichlet_nodes.iter().zip(values) {
            out[i] = v;
        }
        out
    }

    /// `K + M`, the Gram matrix of the discrete V-norm.
    pub fn v_gram(&self) -> SparseSym {
        self.stiffness.linear_combination(1.0, &self.mass, 1.0)
    }

    pub fn compute_constants(&self) -> Result<ConstantsReport> {
        let gram = self.v_gram();
        let lambda0 = gen_eig_extreme(
            &self.stiffness.submatrix(&self.free_nodes),
            &gram.submatrix(&self.free_nodes),
            Extreme::Smallest,
        )?;
        let lambda1 = gen_eig_extreme(
            &self.stiffness.linear_combination(1.0, &self.gamma1_mass, 1.0),
            &gram,
            Extreme::Smallest,
        )?;
        let trace_sq = gen_eig_extreme(&self.gamma2_mass, &gram, Extreme::Largest)?;
        Ok(ConstantsReport {
            lambda0,
            lambda1,
            trace_norm: trace_sq.sqrt(),
            mesh: self.mesh.clone(),
        })
    }
}

/// Discrete coercivity and trace constants of one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Coercivity of `a` on the Dirichlet-constrained subspace.
    pub lambda0: f64,
    /// Coercivity of `a + int_{Gamma1}` on the full space.
    pub lambda1: f64,
    /// Operator norm of the restriction `V -> L^2(Gamma2)`.
    pub trace_norm: f64,
    pub mesh: MeshDescriptor,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Side};

    fn total(a: &SparseSym) -> f64 {
        let ones = vec![1.0; a.dim()];
        a.quad_form(&ones)
    }

    #[test]
    fn unit_mesh_masses() {
        let ops = assemble(&build_rect_mesh(1, 1, &[Side::Left]).unwrap()).unwrap();
        assert!((total(&ops.mass) - 1.0).abs() < 1e-14);
        assert!((total(&ops.gamma1_mass) - 1.0).abs() < 1e-14);
        assert!((total(&ops.gamma2_mass) - 3.0).abs() < 1e-14);
        assert_eq!(ops.gamma2_nodes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        for (nx, ny) in [(1, 1), (3, 2), (8, 8)] {
            let ops = assemble(&build_rect_mesh(nx, ny, &[Side::Left]).unwrap()).unwrap();
            let k1 = ops.stiffness.mul_vec(&vec![1.0; ops.n_nodes()]);
            assert!(k1.iter().all(|v| v.abs() < 1e-12), "{k1:?}");
        }
    }

    #[test]
    fn symmetry_and_geometry() {
        let ops = assemble(&build_rect_mesh(5, 3, &[Side::Left, Side::Bottom]).unwrap()).unwrap();
        for a in [&ops.stiffness, &ops.mass, &ops.gamma1_mass, &ops.gamma2_mass] {
            assert!(a.symmetry_defect() < 1e-14);
        }
        assert!((total(&ops.mass) - 1.0).abs() < 1e-12);
        assert!((total(&ops.gamma1_mass) - 2.0).abs() < 2e-12);
        assert!((total(&ops.gamma2_mass) - 2.0).abs() < 2e-12);
        assert!((total(&ops.gamma2_mass_trace) - 2.0).abs() < 2e-12);
    }

    #[test]
    fn trace_round_trip() {
        let ops = assemble(&build_rect_mesh(3, 3, &[Side::Left]).unwrap()).unwrap();
        let w: Vec<f64> = (0..ops.n_gamma2()).map(|i| i as f64 + 1.0).collect();
        assert_eq!(ops.trace_gamma2(&ops.extend_gamma2(&w)), w);
    }

    #[test]
    fn constants_ranges() {
        let ops = assemble(&build_rect_mesh(4, 4, &[Side::Left]).unwrap()).unwrap();
        let c = ops.compute_constants().unwrap();
        assert!(c.lambda0 > 0.0 && c.lambda0 <= 1.0, "{c:?}");
        assert!(c.lambda1 > 0.0 && c.lambda1 <= 1.0, "{c:?}");
        assert!(c.trace_norm > 0.0, "{c:?}");
    }
}
