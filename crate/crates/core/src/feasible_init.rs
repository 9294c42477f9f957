//! Strictly feasible starting points: linear-in-time density interpolation
//! plus potential-flow fluxes from one graph Poisson solve per interval.

use crate::energy::{DensityPath, FluxPath, ProblemSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::lattice::{check_len, Lattice};
use crate::sparse::CsrMatrix;

/// Relative residual reached by the Poisson solves.
pub const POISSON_TOLERANCE: f64 = 1e-12;

/// Per-interval potentials `Φ_l`, each stored with zero mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub levels: Vec<Vec<f64>>,
}

/// `p_l = (1 - t_l) p⁰ + t_l p¹` for every level `0..=L+1`.
pub fn linear_interpolate_path(p0: &[f64], p1: &[f64], tg: TimeGrid) -> Result<DensityPath> {
    check_len(p0.len(), p1.len())?;
    if p0.iter().chain(p1).any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidHistogram("endpoint entries must be nonnegative".into()));
    }
    let gap = (p0.iter().sum::<f64>() - p1.iter().sum::<f64>()).abs();
    if gap > 1e-12 {
        return Err(Error::MassMismatch(gap));
    }
    let last = tg.level_count() - 1;
    let levels = (0..tg.level_count())
        .map(|l| match l {
            0 => p0.to_vec(),
            l if l == last => p1.to_vec(),
            l => {
                let t = tg.time(l);
                p0.iter().zip(p1).map(|(a, b)| (1.0 - t) * a + t * b).collect()
            }
        })
        .collect();
    DensityPath::from_levels(levels)
}

/// Solves `div(grad Φ_l) = -(p_{l+1} - p_l)/Δt` for each interval and sets
/// `m_l = grad Φ_l`, so that every continuity constraint holds.
pub fn potential_flow_flux(lat: &Lattice, path: &DensityPath, tg: TimeGrid) -> Result<(FluxPath, Potential)> {
    check_len(lat.node_count(), path.node_count())?;
    check_len(tg.level_count(), path.level_count())?;
    let lap = lat.laplacian();
    let dt = tg.dt();
    let mut flux = FluxPath::zeros(lat.edge_count(), tg.interval_count());
    let mut potentials = Vec::with_capacity(tg.interval_count());
    for l in 0..tg.interval_count() {
        // -L Φ = (p_{l+1} - p_l)/Δt, with -L positive semi-definite.
        let rhs: Vec<f64> = path.level(l + 1).iter().zip(path.level(l)).map(|(b, a)| (b - a) / dt).collect();
        let total: f64 = rhs.iter().sum();
        let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
        if total.abs() > 1e-10 * scale.max(1.0) {
            return Err(Error::MassMismatch(total.abs() * dt));
        }
        let phi = solve_neumann_poisson(&lap, &rhs, POISSON_TOLERANCE)?;
        flux.level_mut(l).copy_from_slice(&lat.gradient(&phi)?);
        potentials.push(phi);
    }
    Ok((flux, Potential { levels: potentials }))
}

/// Conjugate gradient on `-lap · x = rhs` restricted to mean-zero vectors.
/// `lap` must be a connected graph Laplacian (null space = constants).
pub(crate) fn solve_neumann_poisson(lap: &CsrMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut b = rhs.to_vec();
    remove_mean(&mut b);
    let b_norm = norm(&b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        let mut q = lap.mul_vec(&d);
        q.iter_mut().for_each(|v| *v = -*v);
        let alpha = rr / dot(&d, &q);
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        remove_mean(&mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * b_norm {
            // confirm against the true residual
            let mut true_r = lap.mul_vec(&x);
            true_r.iter_mut().zip(&b).for_each(|(v, bi)| *v += bi);
            if norm(&true_r) <= tol * b_norm {
                remove_mean(&mut x);
                return Ok(x);
            }
            r = true_r;
            remove_mean(&mut r);
            d = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
        rr = rr_new;
    }
    let mut true_r = lap.mul_vec(&x);
    true_r.iter_mut().zip(&b).for_each(|(v, bi)| *v += bi);
    Err(Error::LinearSolve { reason: "Poisson CG did not converge".into(), residual: norm(&true_r) / b_norm })
}

/// `max_{i,l} |(p_{i,l+1} - p_{i,l})/Δt + div(m_l)_i|`.
pub fn feasibility_residual(prob: &ProblemSpec, p: &DensityPath, m: &FluxPath) -> Result<f64> {
    prob.check_paths(p, m)?;
    let dt = prob.time.dt();
    let mut worst: f64 = 0.0;
    let mut buf = vec![0.0; prob.lattice.node_count()];
    for l in 0..prob.time.interval_count() {
        for ((b, hi), lo) in buf.iter_mut().zip(p.level(l + 1)).zip(p.level(l)) {
            *b = (hi - lo) / dt;
        }
        prob.lattice.add_divergence(m.level(l), 1.0, &mut buf);
        worst = buf.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    Ok(worst)
}

/// Feasible interior starting point `(p, m)` for `prob`.
pub fn initial_point(prob: &ProblemSpec) -> Result<(DensityPath, FluxPath)> {
    let p = linear_interpolate_path(&prob.start, &prob.end, prob.time)?;
    let (m, _) = potential_flow_flux(&prob.lattice, &p, prob.time)?;
    Ok((p, m))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}
