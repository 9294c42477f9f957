//! The discrete regularized transport objective: kinetic energy of the flux
//! path plus β² times the discrete Fisher information of the density path,
//! with its exact gradient and sparse Hessian.
//!
//! Unknowns are packed as `u = (m, p)`: all flux levels (intervals
//! `l = 0..=L`, `|E|` entries each) followed by the interior density levels
//! (`l = 1..=L`, `|V|` entries each). Boundary density levels are data.

use crate::error::{Error, Result};
use crate::lattice::{check_len, Lattice};
use crate::sparse::CsrMatrix;

/// Uniform time grid with `L` interior levels and `Δt = 1/(L+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeGrid {
    interior: usize,
}

impl TimeGrid {
    pub fn new(interior: usize) -> Result<Self> {
        if interior == 0 {
            return Err(Error::InvalidConfig("need at least one interior time level".into()));
        }
        Ok(Self { interior })
    }

    /// Number of interior levels `L`.
    pub fn interior_levels(&self) -> usize {
        self.interior
    }

    /// Levels `0..=L+1`.
    pub fn level_count(&self) -> usize {
        self.interior + 2
    }

    /// Intervals `0..=L`, one flux level each.
    pub fn interval_count(&self) -> usize {
        self.interior + 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / (self.interior + 1) as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }
}

/// Node masses at every time level, boundary levels included.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPath {
    nodes: usize,
    data: Vec<f64>,
}

impl DensityPath {
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        let nodes = levels.first().map_or(0, Vec::len);
        for lv in &levels {
            check_len(nodes, lv.len())?;
        }
        Ok(Self { nodes, data: levels.concat() })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn level_count(&self) -> usize {
        self.data.len() / self.nodes.max(1)
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.data[l * self.nodes..(l + 1) * self.nodes]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.nodes..(l + 1) * self.nodes]
    }

    pub fn levels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.nodes.max(1))
    }

    /// Smallest mass over the interior levels `1..=L`.
    pub fn min_interior(&self) -> f64 {
        let n = self.level_count();
        (1..n - 1).flat_map(|l| self.level(l).iter().copied()).fold(f64::INFINITY, f64::min)
    }
}

/// Edge fluxes, one level per time interval.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxPath {
    edges: usize,
    data: Vec<f64>,
}

impl FluxPath {
    pub fn zeros(edges: usize, intervals: usize) -> Self {
        Self { edges, data: vec![0.0; edges * intervals] }
    }

    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        let edges = levels.first().map_or(0, Vec::len);
        for lv in &levels {
            check_len(edges, lv.len())?;
        }
        Ok(Self { edges, data: levels.concat() })
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn interval_count(&self) -> usize {
        self.data.len() / self.edges.max(1)
    }

    pub fn level(&self, l: usize) -> &[f64] {
        &self.data[l * self.edges..(l + 1) * self.edges]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[l * self.edges..(l + 1) * self.edges]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Which density levels supply the edge densities in the kinetic term of
/// interval `l` (the interval between levels `l` and `l + 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KineticRule {
    /// Left endpoint `p_l` only.
    LeftLevel,
    /// Average of the two half-terms built from `p_l` and `p_{l+1}`;
    /// invariant under time reversal.
    #[default]
    Trapezoidal,
}

impl KineticRule {
    /// `(level, weight)` pairs for interval `l`.
    pub fn stencil(self, interval: usize) -> impl Iterator<Item = (usize, f64)> {
        let pairs: [(usize, f64); 2] = match self {
            KineticRule::LeftLevel => [(interval, 1.0), (interval + 1, 0.0)],
            KineticRule::Trapezoidal => [(interval, 0.5), (interval + 1, 0.5)],
        };
        pairs.into_iter().filter(|&(_, w)| w > 0.0)
    }
}

/// The full problem: lattice, time grid, endpoint histograms and β².
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub lattice: Lattice,
    pub time: TimeGrid,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub beta2: f64,
    pub kinetic_rule: KineticRule,
}

impl ProblemSpec {
    pub fn new(lattice: Lattice, time: TimeGrid, start: Vec<f64>, end: Vec<f64>, beta2: f64) -> Result<Self> {
        let n = lattice.node_count();
        check_len(n, start.len())?;
        check_len(n, end.len())?;
        for h in [&start, &end] {
            if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidHistogram("entries must be finite and nonnegative".into()));
            }
            let total: f64 = h.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidHistogram(format!("histogram sums to {total}, expected 1")));
            }
        }
        let gap = (start.iter().sum::<f64>() - end.iter().sum::<f64>()).abs();
        if gap > 1e-12 {
            return Err(Error::MassMismatch(gap));
        }
        if !(beta2 >= 0.0 && beta2.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta2 must be >= 0, got {beta2}")));
        }
        Ok(Self { lattice, time, start, end, beta2, kinetic_rule: KineticRule::default() })
    }

    pub fn with_kinetic_rule(mut self, rule: KineticRule) -> Self {
        self.kinetic_rule = rule;
        self
    }

    pub fn layout(&self) -> Layout {
        Layout {
            edges: self.lattice.edge_count(),
            nodes: self.lattice.node_count(),
            interior: self.time.interior_levels(),
        }
    }

    /// Density path with the given interior levels and this problem's
    /// endpoints.
    pub fn density_path(&self, interior: Vec<Vec<f64>>) -> Result<DensityPath> {
        if interior.len() != self.time.interior_levels() {
            return Err(Error::DimensionMismatch { expected: self.time.interior_levels(), actual: interior.len() });
        }
        let mut levels = Vec::with_capacity(interior.len() + 2);
        levels.push(self.start.clone());
        levels.extend(interior);
        levels.push(self.end.clone());
        DensityPath::from_levels(levels)
    }

    pub(crate) fn check_paths(&self, p: &DensityPath, m: &FluxPath) -> Result<()> {
        check_len(self.lattice.node_count(), p.node_count())?;
        check_len(self.time.level_count(), p.level_count())?;
        check_len(self.lattice.edge_count(), m.edge_count())?;
        check_len(self.time.interval_count(), m.interval_count())
    }

    fn is_interior(&self, level: usize) -> bool {
        level >= 1 && level <= self.time.interior_levels()
    }
}

/// Index map between `(m, p)` paths and the packed unknown vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub edges: usize,
    pub nodes: usize,
    pub interior: usize,
}

impl Layout {
    pub fn flux_len(&self) -> usize {
        self.edges * (self.interior + 1)
    }

    pub fn density_len(&self) -> usize {
        self.nodes * self.interior
    }

    pub fn len(&self) -> usize {
        self.flux_len() + self.density_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flux(&self, edge: usize, interval: usize) -> usize {
        interval * self.edges + edge
    }

    /// Index of interior density `p_{node, level}`, `1 <= level <= L`.
    pub fn density(&self, node: usize, level: usize) -> usize {
        debug_assert!(level >= 1 && level <= self.interior);
        self.flux_len() + (level - 1) * self.nodes + node
    }

    pub fn pack(&self, p: &DensityPath, m: &FluxPath) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.len());
        u.extend_from_slice(&m.data);
        for l in 1..=self.interior {
            u.extend_from_slice(p.level(l));
        }
        u
    }

    /// Overwrites the unknown entries of `(p, m)` from a packed vector.
    pub fn unpack_into(&self, u: &[f64], p: &mut DensityPath, m: &mut FluxPath) {
        assert_eq!(u.len(), self.len());
        m.data.copy_from_slice(&u[..self.flux_len()]);
        for l in 1..=self.interior {
            let start = self.density(0, l);
            p.level_mut(l).copy_from_slice(&u[start..start + self.nodes]);
        }
    }
}

/// Per-edge arithmetic mean `g = (p_tail + p_head) / 2`.
pub fn edge_densities(lat: &Lattice, p: &[f64]) -> Result<Vec<f64>> {
    check_len(lat.node_count(), p.len())?;
    Ok(lat.edges().iter().map(|e| 0.5 * (p[e.tail] + p[e.head])).collect())
}

/// `Σ_e m_e² / g_e`. Edges with zero flux contribute nothing; nonzero flux
/// through a zero edge density is infinite.
pub fn kinetic_energy(lat: &Lattice, m: &[f64], p: &[f64]) -> Result<f64> {
    check_len(lat.edge_count(), m.len())?;
    let g = edge_densities(lat, p)?;
    Ok(m.iter().zip(&g).map(|(&mi, &gi)| kinetic_term(mi, gi)).sum())
}

fn kinetic_term(m: f64, g: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else if g > 0.0 {
        m * m / g
    } else {
        f64::INFINITY
    }
}

/// `Σ_e (log p_i - log p_j)² g_e / Δx²` with `0·log²0 = 0` on doubly-empty
/// edges and `+∞` when exactly one endpoint is empty.
pub fn fisher_information(lat: &Lattice, p: &[f64]) -> Result<f64> {
    check_len(lat.node_count(), p.len())?;
    let inv_dx2 = 1.0 / (lat.spacing() * lat.spacing());
    let mut total = 0.0;
    for e in lat.edges() {
        let (a, b) = (p[e.tail], p[e.head]);
        let term = match (a > 0.0, b > 0.0) {
            (true, true) => {
                let d = a.ln() - b.ln();
                d * d * 0.5 * (a + b)
            }
            (false, false) => 0.0,
            _ => return Ok(f64::INFINITY),
        };
        total += term * inv_dx2;
    }
    Ok(total)
}

/// `t(a, b) = (a - b)(log a - log b) + (a + b)`, the edge weight of the
/// Fisher-information Hessian.
pub fn t_coeff(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveDensity { index: 0, value: a });
    }
    if !(b > 0.0) {
        return Err(Error::NonPositiveDensity { index: 1, value: b });
    }
    Ok(t_unchecked(a, b))
}

fn t_unchecked(a: f64, b: f64) -> f64 {
    (a - b) * (a.ln() - b.ln()) + (a + b)
}

/// `D = Σ p¹ log p¹ - Σ p⁰ log p⁰` with `0 log 0 = 0`.
pub fn relative_entropy_gap(p0: &[f64], p1: &[f64]) -> Result<f64> {
    fn neg_entropy(h: &[f64]) -> Result<f64> {
        h.iter().try_fold(0.0, |acc, &v| {
            if v < 0.0 {
                Err(Error::InvalidHistogram(format!("negative entry {v}")))
            } else if v == 0.0 {
                Ok(acc)
            } else {
                Ok(acc + v * v.ln())
            }
        })
    }
    Ok(neg_entropy(p1)? - neg_entropy(p0)?)
}

/// Objective split into its two parts; `total = kinetic + β²·fisher`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveTerms {
    pub kinetic: f64,
    pub fisher: f64,
    pub total: f64,
}

/// Kinetic part of a single interval under the problem's kinetic rule.
pub fn interval_kinetic(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath, interval: usize) -> f64 {
    prob.kinetic_rule
        .stencil(interval)
        .map(|(level, w)| {
            let (ml, pl) = (m.level(interval), p.level(level));
            w * prob
                .lattice
                .edges()
                .iter()
                .zip(ml)
                .map(|(e, &me)| kinetic_term(me, 0.5 * (pl[e.tail] + pl[e.head])))
                .sum::<f64>()
        })
        .sum()
}

pub fn objective_terms(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<ObjectiveTerms> {
    prob.check_paths(p, m)?;
    let kinetic: f64 = (0..prob.time.interval_count()).map(|l| interval_kinetic(prob, p, m, l)).sum();
    let mut fisher = 0.0;
    for l in 1..=prob.time.interior_levels() {
        fisher += fisher_information(&prob.lattice, p.level(l))?;
    }
    let total = if prob.beta2 == 0.0 { kinetic } else { kinetic + prob.beta2 * fisher };
    Ok(ObjectiveTerms { kinetic, fisher, total })
}

/// The minimized objective `Σ_l K_l + β² Σ_{l=1}^{L} I(p_l)`.
pub fn objective(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<f64> {
    Ok(objective_terms(prob, p, m)?.total)
}

/// Partial derivatives with respect to every flux and interior density.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub flux: Vec<f64>,
    pub density: Vec<f64>,
}

impl Gradient {
    /// Packed in [`Layout`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.flux.clone();
        v.extend_from_slice(&self.density);
        v
    }
}

fn check_interior_positive(prob: &ProblemSpec, p: &DensityPath) -> Result<()> {
    let layout = prob.layout();
    for l in 1..=prob.time.interior_levels() {
        if let Some((i, &v)) = p.level(l).iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDensity { index: layout.density(i, l), value: v });
        }
    }
    Ok(())
}

pub fn gradient(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<Gradient> {
    prob.check_paths(p, m)?;
    check_interior_positive(prob, p)?;
    let layout = prob.layout();
    let mut g = vec![0.0; layout.len()];
    let lat = &prob.lattice;

    for interval in 0..prob.time.interval_count() {
        let ml = m.level(interval);
        for (level, w) in prob.kinetic_rule.stencil(interval) {
            let pl = p.level(level);
            let interior = prob.is_interior(level);
            for (e, edge) in lat.edges().iter().enumerate() {
                let ge = 0.5 * (pl[edge.tail] + pl[edge.head]);
                let me = ml[e];
                g[layout.flux(e, interval)] += w * 2.0 * me / ge;
                if interior {
                    let dp = -w * 0.5 * me * me / (ge * ge);
                    g[layout.density(edge.tail, level)] += dp;
                    g[layout.density(edge.head, level)] += dp;
                }
            }
        }
    }

    let c = prob.beta2 / (lat.spacing() * lat.spacing());
    if c != 0.0 {
        for level in 1..=prob.time.interior_levels() {
            let pl = p.level(level);
            for edge in lat.edges() {
                let (a, b) = (pl[edge.tail], pl[edge.head]);
                let ell = a.ln() - b.ln();
                let s = a + b;
                g[layout.density(edge.tail, level)] += c * (ell * s / a + 0.5 * ell * ell);
                g[layout.density(edge.head, level)] += c * (-ell * s / b + 0.5 * ell * ell);
            }
        }
    }

    let density = g.split_off(layout.flux_len());
    Ok(Gradient { flux: g, density })
}

/// Sparse Hessian over the packed unknowns. The sparsity pattern depends only
/// on the problem, not on the point, so symbolic factorizations can be reused.
pub fn hessian(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<CsrMatrix> {
    prob.check_paths(p, m)?;
    check_interior_positive(prob, p)?;
    let layout = prob.layout();
    let lat = &prob.lattice;
    let mut t: Vec<(usize, usize, f64)> = Vec::new();

    for interval in 0..prob.time.interval_count() {
        let ml = m.level(interval);
        for (level, w) in prob.kinetic_rule.stencil(interval) {
            let pl = p.level(level);
            let interior = prob.is_interior(level);
            for (e, edge) in lat.edges().iter().enumerate() {
                let ge = 0.5 * (pl[edge.tail] + pl[edge.head]);
                let me = ml[e];
                let k = layout.flux(e, interval);
                t.push((k, k, w * 2.0 / ge));
                if interior {
                    let (i, j) = (layout.density(edge.tail, level), layout.density(edge.head, level));
                    let mp = -w * me / (ge * ge);
                    let pp = w * 0.5 * me * me / (ge * ge * ge);
                    t.extend_from_slice(&[
                        (k, i, mp),
                        (i, k, mp),
                        (k, j, mp),
                        (j, k, mp),
                        (i, i, pp),
                        (j, j, pp),
                        (i, j, pp),
                        (j, i, pp),
                    ]);
                }
            }
        }
    }

    let c = prob.beta2 / (lat.spacing() * lat.spacing());
    for level in 1..=prob.time.interior_levels() {
        let pl = p.level(level);
        for edge in lat.edges() {
            let (a, b) = (pl[edge.tail], pl[edge.head]);
            let tij = t_unchecked(a, b);
            let (i, j) = (layout.density(edge.tail, level), layout.density(edge.head, level));
            let off = -c * tij / (a * b);
            t.extend_from_slice(&[(i, i, c * tij / (a * a)), (j, j, c * tij / (b * b)), (i, j, off), (j, i, off)]);
        }
    }

    Ok(CsrMatrix::from_triplets(layout.len(), layout.len(), &t))
}
