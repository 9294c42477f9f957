//! Independent checks for the solver: the exact 1D quadratic transport cost,
//! finite-difference derivative oracles, and reduced-Hessian eigenvalue
//! certificates of strict convexity.
//!
//! Dense linear algebra is used throughout, so these tools are meant for
//! small instances (a few hundred unknowns).

use faer::{Mat, Side};
use rand::Rng;
use serde::Serialize;

use crate::energy::{self, DensityPath, FluxPath, ProblemSpec};
use crate::error::{Error, Result};
use crate::feasible_init;
use crate::lattice::Lattice;
use crate::newton::assemble_constraints;
use crate::sparse::CsrMatrix;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Two discrete distributions on a common axis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantilePair {
    source: Vec<(f64, f64)>,
    target: Vec<(f64, f64)>,
}

impl QuantilePair {
    /// Both inputs are `(position, mass)` lists with strictly increasing
    /// positions and unit total mass.
    pub fn new(source: Vec<(f64, f64)>, target: Vec<(f64, f64)>) -> Result<Self> {
        for side in [&source, &target] {
            if side.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::InvalidHistogram("positions must be strictly increasing".into()));
            }
            if side.iter().any(|&(x, w)| !x.is_finite() || !(w >= 0.0)) {
                return Err(Error::InvalidHistogram("masses must be nonnegative".into()));
            }
            let total: f64 = side.iter().map(|s| s.1).sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidHistogram(format!("distribution has mass {total}, expected 1")));
            }
        }
        Ok(Self { source, target })
    }

    /// Merged cumulative levels `0 < s_1 < … < 1` at which either quantile
    /// function jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let cum = |d: &[(f64, f64)]| {
            d.iter()
                .scan(0.0, |acc, &(_, w)| {
                    *acc += w;
                    Some(*acc)
                })
                .collect::<Vec<_>>()
        };
        let mut all = cum(&self.source);
        all.extend(cum(&self.target));
        all.sort_by(f64::total_cmp);
        all.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        all
    }

    /// `∫₀¹ |Q₀(s) - Q₁(s)|² ds`, exact for piecewise-constant quantiles.
    pub fn w2_squared(&self) -> f64 {
        let (a, b) = (&self.source, &self.target);
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0].1, b[0].1);
        let mut cost = 0.0;
        while i < a.len() && j < b.len() {
            let t = ra.min(rb);
            let gap = a[i].0 - b[j].0;
            cost += t * gap * gap;
            ra -= t;
            rb -= t;
            if ra <= 0.0 {
                i += 1;
                ra = a.get(i).map_or(0.0, |s| s.1);
            }
            if rb <= 0.0 {
                j += 1;
                rb = b.get(j).map_or(0.0, |s| s.1);
            }
        }
        cost
    }
}

/// Exact squared 2-Wasserstein distance between two histograms supported on
/// the same increasing positions.
pub fn w2_squared_1d(positions: &[f64], p0: &[f64], p1: &[f64]) -> Result<f64> {
    if positions.len() != p0.len() || positions.len() != p1.len() {
        return Err(Error::DimensionMismatch { expected: positions.len(), actual: p0.len().max(p1.len()) });
    }
    let zip = |h: &[f64]| positions.iter().copied().zip(h.iter().copied()).collect::<Vec<_>>();
    Ok(QuantilePair::new(zip(p0), zip(p1))?.w2_squared())
}

/// Positions of a 1D lattice.
pub fn axis_positions(lat: &Lattice) -> Vec<f64> {
    (0..lat.node_count()).map(|i| lat.position(i)[0]).collect()
}

fn perturbed(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath, k: usize, delta: f64) -> (DensityPath, FluxPath) {
    let layout = prob.layout();
    let mut u = layout.pack(p, m);
    u[k] += delta;
    let (mut p2, mut m2) = (p.clone(), m.clone());
    layout.unpack_into(&u, &mut p2, &mut m2);
    (p2, m2)
}

/// Per-coordinate step, shrunk so density coordinates stay positive.
fn safe_step(prob: &ProblemSpec, u: &[f64], k: usize, h: f64) -> f64 {
    if k >= prob.layout().flux_len() {
        h.min(0.5 * u[k])
    } else {
        h
    }
}

/// Central differences of the objective with respect to every unknown, in
/// packed order.
pub fn fd_gradient(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath, h: f64) -> Result<Vec<f64>> {
    let layout = prob.layout();
    let u = layout.pack(p, m);
    (0..layout.len())
        .map(|k| {
            let hk = safe_step(prob, &u, k, h);
            let (pp, mp) = perturbed(prob, p, m, k, hk);
            let (pm, mm) = perturbed(prob, p, m, k, -hk);
            Ok((energy::objective(prob, &pp, &mp)? - energy::objective(prob, &pm, &mm)?) / (2.0 * hk))
        })
        .collect()
}

/// Central differences of the analytic gradient, one column per unknown.
pub fn fd_hessian(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath, h: f64) -> Result<Mat<f64>> {
    let layout = prob.layout();
    let n = layout.len();
    let u = layout.pack(p, m);
    let mut out = Mat::zeros(n, n);
    for k in 0..n {
        let hk = safe_step(prob, &u, k, h);
        let (pp, mp) = perturbed(prob, p, m, k, hk);
        let (pm, mm) = perturbed(prob, p, m, k, -hk);
        let gp = energy::gradient(prob, &pp, &mp)?.to_vec();
        let gm = energy::gradient(prob, &pm, &mm)?.to_vec();
        for r in 0..n {
            out[(r, k)] = (gp[r] - gm[r]) / (2.0 * hk);
        }
    }
    Ok(out)
}

/// Orthonormal basis (as columns) of `{d : A d = 0}`.
pub fn nullspace_basis(a: &CsrMatrix) -> Mat<f64> {
    let dense = a.to_dense();
    let n = a.ncols();
    let svd = dense.svd().expect("dense SVD converges");
    let s = svd.S().column_vector();
    let largest = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let cutoff = largest * 1e-10 * (a.nrows().max(n) as f64);
    let rank = (0..s.nrows()).filter(|&i| s[i] > cutoff).count();
    let v = svd.V();
    Mat::from_fn(n, n - rank, |r, c| v[(r, rank + c)])
}

/// Smallest eigenvalue of a symmetric dense matrix.
pub fn min_eigenvalue(m: &Mat<f64>) -> f64 {
    let sym = Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    sym.self_adjoint_eigenvalues(Side::Lower).expect("symmetric eigensolve converges")[0]
}

/// `λ_min(Zᵀ H Z)` with `Z` spanning the null space of the continuity
/// constraints. Positive at interior points whenever β² > 0.
pub fn reduced_hessian_min_eigenvalue(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<f64> {
    let h = energy::hessian(prob, p, m)?.to_dense();
    let z = nullspace_basis(&assemble_constraints(prob)?.matrix);
    let reduced = z.transpose() * &h * &z;
    Ok(min_eigenvalue(&reduced))
}

/// `λ_min` of the single-level Fisher Hessian `β² I_pp` restricted to
/// zero-sum directions.
pub fn fisher_block_min_eigenvalue(lat: &Lattice, p: &[f64], beta2: f64) -> Result<f64> {
    let n = lat.node_count();
    let inv_dx2 = 1.0 / (lat.spacing() * lat.spacing());
    let mut h = Mat::<f64>::zeros(n, n);
    for e in lat.edges() {
        let (a, b) = (p[e.tail], p[e.head]);
        let t = energy::t_coeff(a, b)? * inv_dx2 * beta2;
        h[(e.tail, e.tail)] += t / (a * a);
        h[(e.head, e.head)] += t / (b * b);
        h[(e.tail, e.head)] -= t / (a * b);
        h[(e.head, e.tail)] -= t / (a * b);
    }
    let ones = CsrMatrix::from_triplets(1, n, &(0..n).map(|i| (0, i, 1.0)).collect::<Vec<_>>());
    let z = nullspace_basis(&ones);
    Ok(min_eigenvalue(&(z.transpose() * &h * &z)))
}

/// Random histogram with entries in `[lo, 1]` before normalization.
pub fn random_histogram<R: Rng>(rng: &mut R, n: usize, lo: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Random point with strictly positive, normalized interior levels and
/// random fluxes in `[-1, 1]` (not necessarily feasible).
pub fn random_point<R: Rng>(prob: &ProblemSpec, rng: &mut R) -> Result<(DensityPath, FluxPath)> {
    let n = prob.lattice.node_count();
    let e = prob.lattice.edge_count();
    let p = prob.density_path((0..prob.time.interior_levels()).map(|_| random_histogram(rng, n, 0.05)).collect())?;
    let m = FluxPath::from_levels(
        (0..prob.time.interval_count()).map(|_| (0..e).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
    )?;
    Ok((p, m))
}

/// Random point of `interior(Θ)`: random positive density levels joined by
/// potential-flow fluxes, so every continuity constraint holds.
pub fn random_feasible_point<R: Rng>(prob: &ProblemSpec, rng: &mut R) -> Result<(DensityPath, FluxPath)> {
    let n = prob.lattice.node_count();
    let p = prob.density_path((0..prob.time.interior_levels()).map(|_| random_histogram(rng, n, 0.05)).collect())?;
    let (m, _) = feasible_init::potential_flow_flux(&prob.lattice, &p, prob.time)?;
    Ok((p, m))
}

/// Largest relative discrepancy `|a - b| / max(|b|, floor)` between two vectors.
pub fn max_relative_error(analytic: &[f64], reference: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Largest entrywise gap between a sparse and a dense matrix, divided by the
/// largest sparse entry.
pub fn max_normalized_hessian_error(analytic: &CsrMatrix, reference: &Mat<f64>) -> f64 {
    let scale = analytic.max_abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for r in 0..reference.nrows() {
        for c in 0..reference.ncols() {
            worst = worst.max((analytic.get(r, c) - reference[(r, c)]).abs());
        }
    }
    worst / scale
}

/// Outcome of one named verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold }
    }

    fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value > threshold }
    }
}

/// Runs the derivative, convexity and barrier checks on small random
/// instances drawn from `rng`.
pub fn verification_suite<R: Rng>(rng: &mut R) -> Result<Vec<Check>> {
    use crate::energy::TimeGrid;
    use crate::lattice::GridSpec;

    let mut checks = Vec::new();
    for (label, dim, n, levels) in [("1d", 1, 8, 4), ("2d", 2, 4, 3)] {
        let lat = Lattice::new(GridSpec::cube(dim, n, 0.0, 1.0)?);
        let nodes = lat.node_count();
        let mut grad_err: f64 = 0.0;
        let mut hess_err: f64 = 0.0;
        for _ in 0..10 {
            let prob = ProblemSpec::new(
                lat.clone(),
                TimeGrid::new(levels)?,
                random_histogram(rng, nodes, 0.05),
                random_histogram(rng, nodes, 0.05),
                rng.gen_range(1e-3..1e-1),
            )?;
            let (p, m) = random_point(&prob, rng)?;
            let analytic = energy::gradient(&prob, &p, &m)?.to_vec();
            let fd = fd_gradient(&prob, &p, &m, FD_STEP)?;
            let scale = analytic.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            grad_err = grad_err.max(max_relative_error(&analytic, &fd, 1e-3 * scale));
            let h = energy::hessian(&prob, &p, &m)?;
            hess_err = hess_err.max(max_normalized_hessian_error(&h, &fd_hessian(&prob, &p, &m, FD_STEP)?));
        }
        checks.push(Check::below(&format!("gradient-vs-fd-{label}"), grad_err, 1e-5));
        checks.push(Check::below(&format!("hessian-vs-fd-{label}"), hess_err, 1e-4));
    }

    let lat = Lattice::new(GridSpec::cube(1, 5, 0.0, 1.0)?);
    let mut lambda = f64::INFINITY;
    for _ in 0..10 {
        let prob = ProblemSpec::new(
            lat.clone(),
            TimeGrid::new(3)?,
            random_histogram(rng, 5, 0.05),
            random_histogram(rng, 5, 0.05),
            1e-6,
        )?;
        let (p, m) = random_feasible_point(&prob, rng)?;
        lambda = lambda.min(reduced_hessian_min_eigenvalue(&prob, &p, &m)?);
    }
    checks.push(Check::above("reduced-hessian-min-eigenvalue", lambda, 0.0));

    let pair = Lattice::new(GridSpec::cube(1, 2, 0.0, 1.0)?);
    let values = (1..=6)
        .map(|k| {
            let eps = 10f64.powi(-2 * k);
            energy::fisher_information(&pair, &[1.0 - eps, eps])
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_increment = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    checks.push(Check::above("fisher-barrier-increment", worst_increment, 0.0));
    Ok(checks)
}
