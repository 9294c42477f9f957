//! Uniform lattice graphs on rectangular boxes and the discrete
//! divergence, gradient and Laplacian operators over them.
//!
//! Nodes are stored in row-major order (last axis fastest). Every edge joins
//! two nodes one grid step apart along a single axis and is oriented from the
//! lower multi-index (tail) to the higher one (head). Edges only ever join
//! two lattice nodes, so no flux can leave the domain: the zero-flux boundary
//! condition holds structurally.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Geometry of a uniform lattice: dimension, points per axis and the box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n_pts: usize,
    extents: Vec<(f64, f64)>,
    spacing: f64,
}

impl GridSpec {
    pub const MAX_DIM: usize = 2;

    /// Builds a grid spec from per-axis extents. All axes must share the same
    /// spacing `(hi - lo) / (n_pts - 1)`.
    pub fn new(dim: usize, n_pts: usize, extents: Vec<(f64, f64)>) -> Result<Self> {
        if dim == 0 || dim > Self::MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not supported (expected 1 or 2)")));
        }
        if n_pts < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points per axis, got {n_pts}")));
        }
        if extents.len() != dim {
            return Err(Error::InvalidGrid(format!("{} extents given for a {dim}-d grid", extents.len())));
        }
        let spacings: Vec<f64> = extents.iter().map(|&(lo, hi)| (hi - lo) / (n_pts - 1) as f64).collect();
        let spacing = spacings[0];
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("axis extent {:?} gives non-positive spacing", extents[0])));
        }
        if spacings.iter().any(|s| ((s - spacing) / spacing).abs() > 1e-12) {
            return Err(Error::InvalidGrid("axes must share one spacing".into()));
        }
        Ok(Self { dim, n_pts, extents, spacing })
    }

    /// Grid on the cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, n_pts: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(dim, n_pts, vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pts(&self) -> usize {
        self.n_pts
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    /// Grid spacing Δx.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.n_pts.pow(self.dim as u32)
    }

    pub fn edge_count(&self) -> usize {
        self.dim * self.n_pts.pow(self.dim as u32 - 1) * (self.n_pts - 1)
    }

    /// Coordinate of grid index `k` along `axis`.
    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        self.extents[axis].0 + k as f64 * self.spacing
    }
}

/// An oriented lattice edge from `tail` to `head = tail + e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub axis: usize,
}

/// The lattice graph `G = (V, E)` with adjacency and boundary flags.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: GridSpec,
    strides: Vec<usize>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl Lattice {
    pub fn new(spec: GridSpec) -> Self {
        let d = spec.dim();
        let n = spec.n_pts();
        let n_nodes = spec.node_count();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * n;
        }

        let mut edges = Vec::with_capacity(spec.edge_count());
        let mut neighbors = vec![Vec::new(); n_nodes];
        let mut incident = vec![Vec::new(); n_nodes];
        let mut boundary = vec![false; n_nodes];
        for node in 0..n_nodes {
            let idx = unflatten(node, &strides, n);
            boundary[node] = idx.iter().any(|&k| k == 0 || k == n - 1);
        }
        for axis in 0..d {
            for tail in 0..n_nodes {
                if (tail / strides[axis]) % n == n - 1 {
                    continue;
                }
                let head = tail + strides[axis];
                let e = edges.len();
                edges.push(Edge { tail, head, axis });
                neighbors[tail].push(head);
                neighbors[head].push(tail);
                incident[tail].push(e);
                incident[head].push(e);
            }
        }
        Self { spec, strides, edges, neighbors, incident, boundary }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighborhood `N(i)`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    /// Edge indices touching `node`.
    pub fn incident_edges(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        assert_eq!(multi.len(), self.dim());
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        unflatten(node, &self.strides, self.spec.n_pts())
    }

    /// Physical coordinates of a node.
    pub fn position(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .into_iter()
            .enumerate()
            .map(|(axis, k)| self.spec.coordinate(axis, k))
            .collect()
    }

    /// `div(m)|_i = (1/Δx) Σ_v (m_{i+e_v/2} - m_{i-e_v/2})`.
    pub fn divergence(&self, flux: &[f64]) -> Result<Vec<f64>> {
        check_len(self.edge_count(), flux.len())?;
        let mut out = vec![0.0; self.node_count()];
        self.add_divergence(flux, 1.0, &mut out);
        Ok(out)
    }

    /// Accumulates `scale · div(flux)` into `out` without allocating.
    pub(crate) fn add_divergence(&self, flux: &[f64], scale: f64, out: &mut [f64]) {
        let c = scale / self.spacing();
        for (edge, &m) in self.edges.iter().zip(flux) {
            out[edge.tail] += c * m;
            out[edge.head] -= c * m;
        }
    }

    /// Edge-wise difference `Φ_head - Φ_tail` (no 1/Δx factor).
    pub fn gradient(&self, potential: &[f64]) -> Result<Vec<f64>> {
        check_len(self.node_count(), potential.len())?;
        Ok(self.edges.iter().map(|e| potential[e.head] - potential[e.tail]).collect())
    }

    /// Matrix of `Φ ↦ div(gradient(Φ))`: symmetric, negative semi-definite,
    /// with the constants as its null space.
    pub fn laplacian(&self) -> CsrMatrix {
        let c = 1.0 / self.spacing();
        let mut t = Vec::with_capacity(4 * self.edge_count());
        for e in &self.edges {
            t.push((e.tail, e.tail, -c));
            t.push((e.head, e.head, -c));
            t.push((e.tail, e.head, c));
            t.push((e.head, e.tail, c));
        }
        CsrMatrix::from_triplets(self.node_count(), self.node_count(), &t)
    }
}

fn unflatten(mut node: usize, strides: &[usize], n: usize) -> Vec<usize> {
    strides
        .iter()
        .map(|&s| {
            let k = node / s;
            node -= k * s;
            debug_assert!(k < n);
            k
        })
        .collect()
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
