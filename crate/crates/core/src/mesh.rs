//! Structured triangulations of the unit square with a two-way boundary
//! partition, and the uniform time grid.
//!
//! Node `(i, j)` sits at `(i / nx, j / ny)` and has index `j * (nx + 1) + i`.
//! Every cell is split along its lower-left to upper-right diagonal.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "bottom" => Ok(Side::Bottom),
            "top" => Ok(Side::Top),
            other => Err(Error::config(format!(
                "unknown rectangle side '{other}' (expected left, right, bottom or top)"
            ))),
        }
    }
}

/// Which portion of the boundary an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Dirichlet portion for the mixed problem, Robin portion for the penalized one.
    Gamma1,
    /// Flux (Neumann) portion carrying the boundary control.
    Gamma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    nx: usize,
    ny: usize,
    gamma1: BTreeSet<Side>,
}

/// Unit square `[0,1]^2` split into `2 * nx * ny` triangles. Edges on the
/// sides listed in `gamma1` are tagged [`BoundaryTag::Gamma1`], the rest
/// [`BoundaryTag::Gamma2`].
pub fn build_rect_mesh(nx: usize, ny: usize, gamma1: &[Side]) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!(
            "subdivision counts must be positive (nx = {nx}, ny = {ny})"
        )));
    }
    let gamma1: BTreeSet<Side> = gamma1.iter().copied().collect();
    if gamma1.is_empty() {
        return Err(Error::InvalidMesh("Gamma1 must contain at least one side".into()));
    }
    if gamma1.len() == Side::ALL.len() {
        return Err(Error::InvalidMesh(
            "Gamma1 cannot cover all four sides; Gamma2 would be empty".into(),
        ));
    }

    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }

    let tag_of = |side: Side| {
        if gamma1.contains(&side) {
            BoundaryTag::Gamma1
        } else {
            BoundaryTag::Gamma2
        }
    };
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i, 0), id(i + 1, 0)],
            side: Side::Bottom,
            tag: tag_of(Side::Bottom),
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(nx, j), id(nx, j + 1)],
            side: Side::Right,
            tag: tag_of(Side::Right),
        });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(i + 1, ny), id(i, ny)],
            side: Side::Top,
            tag: tag_of(Side::Top),
        });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge {
            nodes: [id(0, j + 1), id(0, j)],
            side: Side::Left,
            tag: tag_of(Side::Left),
        });
    }

    Ok(Mesh {
        nodes,
        triangles,
        boundary_edges,
        nx,
        ny,
        gamma1,
    })
}

impl Mesh {
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn gamma1_sides(&self) -> Vec<Side> {
        self.gamma1.iter().copied().collect()
    }

    /// Signed area of triangle `t`; positive for counterclockwise orientation.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes;
        let (pa, pb) = (self.nodes[a], self.nodes[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| self.edge_length(e))
            .sum()
    }

    /// Sorted indices of the nodes touched by edges carrying `tag`.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        set.into_iter().collect()
    }

    pub fn descriptor(&self) -> MeshDescriptor {
        MeshDescriptor {
            nx: self.nx,
            ny: self.ny,
            gamma1: self.gamma1_sides(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub nx: usize,
    pub ny: usize,
    pub gamma1: Vec<Side>,
}

/// Split of the nodes into those pinned by the Dirichlet condition on
/// Gamma1 and the remaining free ones. Both lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofPartition {
    pub dirichlet: Vec<usize>,
    pub free: Vec<usize>,
}

/// Corner nodes shared by a Gamma1 and a Gamma2 edge count as Dirichlet.
pub fn dof_partition(mesh: &Mesh) -> DofPartition {
    let dirichlet = mesh.tagged_nodes(BoundaryTag::Gamma1);
    let mut pinned = vec![false; mesh.n_nodes()];
    for &i in &dirichlet {
        pinned[i] = true;
    }
    let free = (0..mesh.n_nodes()).filter(|&i| !pinned[i]).collect();
    DofPartition { dirichlet, free }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    final_time: f64,
    n_steps: usize,
    tau: f64,
}

impl TimeGrid {
    /// Uniform grid with `n_steps` implicit steps. When `final_time / n_steps`
    /// does not multiply back to `final_time` exactly, the stored final time
    /// is set to `tau * n_steps`.
    pub fn new(final_time: f64, n_steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::contract(format!(
                "final time must be positive, got {final_time}"
            )));
        }
        if n_steps == 0 {
            return Err(Error::contract("time grid needs at least one step"));
        }
        let tau = final_time / n_steps as f64;
        Ok(TimeGrid {
            final_time: tau * n_steps as f64,
            n_steps,
            tau,
        })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Time of slice `n` (slice 0 is the initial time).
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }
}
