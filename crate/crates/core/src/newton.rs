//! Proximal Newton iteration for the constrained problem
//! `min f(u)  s.t.  A u = b,  p > 0`.
//!
//! Each step minimizes the local quadratic model over the null space of `A`
//! by solving the saddle-point system
//!
//! ```text
//! [ H  Aᵀ ] [ d ]   [ -∇f ]
//! [ A  0  ] [ λ ] = [  0  ]
//! ```
//!
//! and moves `u ← u + α d` with the fixed step `α`, capped by a
//! fraction-to-boundary rule so interior densities stay positive.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::prelude::*;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};
use serde::Serialize;

use crate::energy::{self, DensityPath, FluxPath, Layout, ObjectiveTerms, ProblemSpec};
use crate::error::{Error, Result};
use crate::feasible_init;
use crate::sparse::CsrMatrix;

/// Iteration parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Fixed step size α.
    pub step_size: f64,
    /// Relative objective decrease that stops the iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fraction-to-boundary factor τ.
    pub boundary_fraction: f64,
    /// Relative residual demanded from each KKT solve.
    pub kkt_tolerance: f64,
    /// Projected-gradient norm below which the current point is accepted.
    pub gradient_tolerance: f64,
    /// Smallest admissible step before the run is declared stuck.
    pub min_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.3,
            tolerance: 1e-5,
            max_iterations: 500,
            boundary_fraction: 0.99,
            kkt_tolerance: 1e-10,
            gradient_tolerance: 1e-9,
            min_step: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return bad("step size must lie in (0, 1]");
        }
        if !(self.boundary_fraction > 0.0 && self.boundary_fraction < 1.0) {
            return bad("fraction-to-boundary factor must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0 && self.kkt_tolerance > 0.0 && self.gradient_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        Ok(())
    }
}

/// Discrete continuity constraints `A u = b` with the one redundant row removed.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    /// Full-row-rank constraint matrix.
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Index (in the unreduced row numbering `l·|V| + i`) of the dropped row.
    pub removed_row: usize,
    full_matrix: CsrMatrix,
    full_rhs: Vec<f64>,
}

impl ConstraintSystem {
    /// `‖A u - b‖_∞` over every continuity row, the dropped one included.
    pub fn residual(&self, u: &[f64]) -> f64 {
        self.full_matrix
            .mul_vec(u)
            .iter()
            .zip(&self.full_rhs)
            .fold(0.0, |w, (a, b)| w.max((a - b).abs()))
    }

    /// Matrix with every row, before redundancy removal.
    pub fn full_matrix(&self) -> &CsrMatrix {
        &self.full_matrix
    }

    pub fn full_rhs(&self) -> &[f64] {
        &self.full_rhs
    }
}

/// One row per (node, interval): `(p_{i,l+1} - p_{i,l})/Δt + div(m_l)_i = 0`,
/// fixed endpoint levels moved to the right-hand side.
pub fn assemble_constraints(prob: &ProblemSpec) -> Result<ConstraintSystem> {
    let layout = prob.layout();
    let lat = &prob.lattice;
    let nodes = lat.node_count();
    let intervals = prob.time.interval_count();
    let last = intervals - 1;
    let inv_dt = 1.0 / prob.time.dt();
    let inv_dx = 1.0 / lat.spacing();

    let rows = nodes * intervals;
    let mut t = Vec::new();
    let mut rhs = vec![0.0; rows];
    for l in 0..intervals {
        for i in 0..nodes {
            let r = l * nodes + i;
            if l < layout.interior {
                t.push((r, layout.density(i, l + 1), inv_dt));
            } else {
                rhs[r] -= prob.end[i] * inv_dt;
            }
            if l >= 1 {
                t.push((r, layout.density(i, l), -inv_dt));
            } else {
                rhs[r] += prob.start[i] * inv_dt;
            }
        }
        for (e, edge) in lat.edges().iter().enumerate() {
            let c = layout.flux(e, l);
            t.push((l * nodes + edge.tail, c, inv_dx));
            t.push((l * nodes + edge.head, c, -inv_dx));
        }
    }
    let full = CsrMatrix::from_triplets(rows, layout.len(), &t);

    // The rows sum to zero on the unknowns (telescoping in time, conservative
    // divergence in space); the sum of b must vanish too.
    let col_sums = full.mul_vec_transposed(&vec![1.0; rows]);
    let scale = full.max_abs();
    debug_assert!(col_sums.iter().all(|v| v.abs() <= 1e-12 * scale));
    let b_sum: f64 = rhs.iter().sum();
    let b_scale: f64 = rhs.iter().map(|v| v.abs()).sum();
    if b_sum.abs() > 1e-10 * b_scale.max(1.0) {
        return Err(Error::MassMismatch(b_sum.abs() * prob.time.dt()));
    }
    let removed_row = last * nodes + nodes - 1;
    let matrix = full.without_row(removed_row);
    let mut reduced_rhs = rhs.clone();
    reduced_rhs.remove(removed_row);
    Ok(ConstraintSystem { matrix, rhs: reduced_rhs, removed_row, full_matrix: full, full_rhs: rhs })
}

/// Solution of one KKT system.
#[derive(Clone, Debug)]
pub struct KktSolution {
    pub direction: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `‖K x - rhs‖_∞ / ‖rhs‖_∞` after refinement.
    pub relative_residual: f64,
}

/// Factorizes saddle systems sharing one sparsity pattern, reusing the
/// symbolic analysis between calls.
///
/// The primary path is a supernodal `LDLᵀ` of the symmetric system with
/// fill-reducing AMD ordering, where pivots that come out tiny or with the
/// wrong sign (positive on the `H` block, negative on the constraint block)
/// are replaced by a small regularization. Iterative refinement against the
/// exact system removes that perturbation; if it does not reach the tolerance
/// the system is refactorized with pivoted sparse LU.
pub struct KktSolver {
    constraints: CsrMatrix,
    tolerance: f64,
    ldlt: Option<SymbolicCholesky<usize>>,
    lu: Option<SymbolicLu<usize>>,
}

enum Factor {
    /// Factor values of `S K S` and the diagonal equilibration `S`.
    Ldlt { values: Vec<f64>, scaling: Vec<f64> },
    Lu(Box<Lu<usize, f64>>),
}

impl KktSolver {
    pub fn new(constraints: &CsrMatrix, tolerance: f64) -> Self {
        Self { constraints: constraints.clone(), tolerance, ldlt: None, lu: None }
    }

    fn assemble(&self, hessian: &CsrMatrix, lower_only: bool) -> SparseColMat<usize, f64> {
        let n = hessian.nrows();
        let size = n + self.constraints.nrows();
        let mut t: Vec<Triplet<usize, usize, f64>> = hessian
            .triplets()
            .filter(|&(r, c, _)| !lower_only || r >= c)
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        for (r, c, v) in self.constraints.triplets() {
            t.push(Triplet::new(n + r, c, v));
            if !lower_only {
                t.push(Triplet::new(c, n + r, v));
            }
        }
        SparseColMat::try_new_from_triplets(size, size, &t).expect("KKT entries in bounds")
    }

    fn apply(&self, hessian: &CsrMatrix, x: &[f64]) -> Vec<f64> {
        let n = hessian.nrows();
        let (d, lambda) = x.split_at(n);
        let mut top = hessian.mul_vec(d);
        for (t, a) in top.iter_mut().zip(self.constraints.mul_vec_transposed(lambda)) {
            *t += a;
        }
        top.extend(self.constraints.mul_vec(d));
        top
    }

    /// Solves for the direction minimizing `dᵀg + ½ dᵀHd` subject to `Ad = 0`.
    pub fn solve(&mut self, hessian: &CsrMatrix, grad: &[f64]) -> Result<KktSolution> {
        self.factor(hessian)?.solve(grad)
    }

    /// Factorizes the saddle system for `hessian` once, for repeated solves.
    pub fn factor(&mut self, hessian: &CsrMatrix) -> Result<FactoredKkt<'_>> {
        assert_eq!(self.constraints.ncols(), hessian.nrows(), "constraint width");
        let factor = match self.factorize_ldlt(hessian) {
            Ok((values, scaling)) => Factor::Ldlt { values, scaling },
            Err(_) => Factor::Lu(Box::new(self.factorize_lu(hessian)?)),
        };
        Ok(FactoredKkt { solver: self, hessian: hessian.clone(), factor })
    }

    fn factorize_ldlt(&mut self, hessian: &CsrMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let fail = |e: &dyn std::fmt::Debug| Error::LinearSolve { reason: format!("sparse LDLT failed: {e:?}"), residual: f64::NAN };
        let kkt = self.assemble(hessian, true);
        if self.ldlt.is_none() {
            let sym = factorize_symbolic_cholesky(kkt.symbolic(), Side::Lower, SymmetricOrdering::Amd, Default::default())
                .map_err(|e| fail(&e))?;
            self.ldlt = Some(sym);
        }
        let sym = self.ldlt.as_ref().expect("symbolic factorization present");
        let size = kkt.nrows();

        // Ruiz equilibration: densities near zero make Hessian entries span
        // many orders of magnitude.
        let mut scaling = vec![1.0; size];
        let mut scaled = kkt.clone();
        for _ in 0..12 {
            let mut col_max = vec![0.0f64; size];
            for c in 0..size {
                for (&r, &v) in scaled.row_idx_of_col_raw(c).iter().zip(scaled.val_of_col(c)) {
                    col_max[c] = col_max[c].max(v.abs());
                    col_max[r] = col_max[r].max(v.abs());
                }
            }
            if col_max.iter().all(|&m| (m - 1.0).abs() < 1e-3 || m == 0.0) {
                break;
            }
            let step: Vec<f64> = col_max.iter().map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 }).collect();
            scaling.iter_mut().zip(&step).for_each(|(s, t)| *s *= t);
            for c in 0..size {
                let rows: Vec<usize> = scaled.row_idx_of_col_raw(c).to_vec();
                for (v, r) in scaled.val_of_col_mut(c).iter_mut().zip(rows) {
                    *v *= step[r] * step[c];
                }
            }
        }

        let n = hessian.nrows();
        let signs: Vec<i8> = (0..size).map(|k| if k < n { 1 } else { -1 }).collect();
        let regularization = LdltRegularization {
            dynamic_regularization_signs: Some(&signs),
            dynamic_regularization_delta: 1e-10,
            dynamic_regularization_epsilon: 1e-14,
        };
        let mut values = vec![0.0; sym.len_val()];
        let mut buf = MemBuffer::new(sym.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        sym.factorize_numeric_ldlt(&mut values, scaled.as_ref(), Side::Lower, regularization, Par::Seq, MemStack::new(&mut buf), Default::default())
            .map_err(|e| fail(&e))?;
        Ok((values, scaling))
    }

    fn factorize_lu(&mut self, hessian: &CsrMatrix) -> Result<Lu<usize, f64>> {
        let fail = |e: &dyn std::fmt::Debug| Error::LinearSolve { reason: format!("sparse LU failed: {e:?}"), residual: f64::NAN };
        let kkt = self.assemble(hessian, false);
        if self.lu.is_none() {
            self.lu = Some(SymbolicLu::try_new(kkt.symbolic()).map_err(|e| fail(&e))?);
        }
        let symbolic = self.lu.clone().expect("symbolic factorization present");
        Lu::try_new_with_symbolic(symbolic, kkt.as_ref()).map_err(|e| fail(&e))
    }
}

/// A factorized saddle system.
pub struct FactoredKkt<'a> {
    solver: &'a mut KktSolver,
    hessian: CsrMatrix,
    factor: Factor,
}

impl FactoredKkt<'_> {
    /// Solves with right-hand side `(-grad, 0)`, refining until the relative
    /// residual meets the solver tolerance.
    pub fn solve(&mut self, grad: &[f64]) -> Result<KktSolution> {
        match self.refine(grad) {
            Err(_) if matches!(self.factor, Factor::Ldlt { .. }) => {
                self.factor = Factor::Lu(Box::new(self.solver.factorize_lu(&self.hessian)?));
                self.refine(grad)
            }
            other => other,
        }
    }

    /// Whether the pivoted LU fallback is in use.
    pub fn uses_lu(&self) -> bool {
        matches!(self.factor, Factor::Lu(_))
    }

    fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        match &self.factor {
            Factor::Lu(lu) => b = lu.solve(&b),
            Factor::Ldlt { values, scaling } => {
                let sym = self.solver.ldlt.as_ref().expect("symbolic factorization present");
                let mut buf = MemBuffer::new(sym.solve_in_place_scratch::<f64>(1, Par::Seq));
                (0..rhs.len()).for_each(|i| b[(i, 0)] *= scaling[i]);
                LdltRef::new(sym, values).solve_in_place_with_conj(Conj::No, b.as_mut(), Par::Seq, MemStack::new(&mut buf));
                (0..rhs.len()).for_each(|i| b[(i, 0)] *= scaling[i]);
            }
        }
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }

    fn refine(&self, grad: &[f64]) -> Result<KktSolution> {
        let n = self.hessian.nrows();
        assert_eq!(grad.len(), n, "gradient length");
        let rows = self.solver.constraints.nrows();
        let mut rhs = vec![0.0; n + rows];
        for (r, g) in rhs.iter_mut().zip(grad) {
            *r = -g;
        }
        let rhs_norm = inf_norm(&rhs);
        if rhs_norm == 0.0 {
            return Ok(KktSolution { direction: vec![0.0; n], multipliers: vec![0.0; rows], relative_residual: 0.0 });
        }
        let tolerance = self.solver.tolerance;
        let mut x = vec![0.0; n + rows];
        let mut residual = rhs.clone();
        let mut rel = 1.0;
        for _ in 0..10 {
            let correction = self.apply_inverse(&residual);
            if correction.iter().any(|v| !v.is_finite()) {
                return Err(Error::LinearSolve { reason: "KKT factorization produced non-finite values".into(), residual: rel });
            }
            x.iter_mut().zip(&correction).for_each(|(a, b)| *a += b);
            let kx = self.solver.apply(&self.hessian, &x);
            residual.iter_mut().zip(rhs.iter().zip(&kx)).for_each(|(r, (b, k))| *r = b - k);
            rel = inf_norm(&residual) / rhs_norm;
            if rel <= 0.01 * tolerance {
                break;
            }
        }
        if !(rel <= tolerance) {
            return Err(Error::LinearSolve { reason: "KKT system is singular or ill-conditioned".into(), residual: rel });
        }
        let multipliers = x.split_off(n);
        Ok(KktSolution { direction: x, multipliers, relative_residual: rel })
    }
}

/// One-shot solve of the saddle system for a single `(H, ∇f, A)`.
pub fn solve_kkt(hessian: &CsrMatrix, grad: &[f64], constraints: &ConstraintSystem, tolerance: f64) -> Result<KktSolution> {
    KktSolver::new(&constraints.matrix, tolerance).solve(hessian, grad)
}

/// Largest step in `(0, 1]` keeping `p + α d > 0` with margin `τ`:
/// `min(1, τ · min{-p_k / d_k : d_k < 0})`.
pub fn fraction_to_boundary(p: &[f64], d: &[f64], tau: f64) -> f64 {
    p.iter()
        .zip(d)
        .filter(|(_, &dk)| dk < 0.0)
        .map(|(&pk, &dk)| tau * (-pk / dk))
        .fold(1.0, f64::min)
}

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    StepFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::StepFailure => "step-failure",
        }
    }
}

/// Diagnostics recorded after every Newton step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
    /// `dᵀ∇f` at the point the step was taken from.
    pub directional_derivative: f64,
    pub projected_gradient: f64,
    pub feasibility: f64,
    pub mass_error: f64,
    pub min_interior_mass: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub density: DensityPath,
    pub flux: FluxPath,
    /// Objective at the initial point followed by one value per step.
    pub trace: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// Number of stopping checks performed.
    pub iterations: usize,
    pub termination: Termination,
    pub objective: ObjectiveTerms,
    /// `Δt · kinetic`, the estimate of the squared transport distance.
    pub distance_estimate: f64,
    /// `2β · D`, the constant left out of the minimized objective.
    pub entropy_gap: f64,
    pub removed_constraint_row: usize,
    pub initial_feasibility: f64,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// `true` when every recorded objective value is below its predecessor.
    pub fn trace_strictly_decreasing(&self) -> bool {
        self.trace.windows(2).all(|w| w[1] < w[0])
    }
}

/// Runs the proximal Newton iteration from the linear-interpolation /
/// potential-flow starting point.
pub fn newton_solve(prob: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    newton_solve_with(prob, cfg, |_| {})
}

/// Like [`newton_solve`], invoking `observe` after each recorded step.
pub fn newton_solve_with<F>(prob: &ProblemSpec, cfg: &SolverConfig, mut observe: F) -> Result<SolveResult>
where
    F: FnMut(&IterationRecord),
{
    cfg.validate()?;
    let layout = prob.layout();
    let constraints = assemble_constraints(prob)?;
    let (mut p, mut m) = feasible_init::initial_point(prob)?;
    let mut u = layout.pack(&p, &m);
    let initial_feasibility = constraints.residual(&u);

    let mut f = energy::objective(prob, &p, &m)?;
    if !f.is_finite() {
        return Err(Error::InfiniteObjective);
    }

    let mut kkt = KktSolver::new(&constraints.matrix, cfg.kkt_tolerance);
    let identity = CsrMatrix::from_triplets(layout.len(), layout.len(), &(0..layout.len()).map(|k| (k, k, 1.0)).collect::<Vec<_>>());
    let mut projector_solver = KktSolver::new(&constraints.matrix, cfg.kkt_tolerance);
    // projection onto the null space of A; H = I never changes
    let mut projector = projector_solver.factor(&identity)?;

    let mut trace = vec![f];
    let mut records = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let reference_mass: f64 = prob.start.iter().sum();

    for k in 1..=cfg.max_iterations {
        iterations = k;
        let grad = energy::gradient(prob, &p, &m)?.to_vec();
        let projected = inf_norm(&projector.solve(&grad)?.direction);
        if projected <= cfg.gradient_tolerance {
            termination = Termination::Converged;
            break;
        }

        let hess = energy::hessian(prob, &p, &m)?;
        let dir = kkt.solve(&hess, &grad)?.direction;
        let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return Err(Error::NonDescent(slope));
        }

        let density_part = layout.flux_len()..layout.len();
        let cap = fraction_to_boundary(&u[density_part.clone()], &dir[density_part], cfg.boundary_fraction);
        let step = cfg.step_size.min(cap);
        if step < cfg.min_step {
            termination = Termination::StepFailure;
            break;
        }
        u.iter_mut().zip(&dir).for_each(|(x, d)| *x += step * d);
        layout.unpack_into(&u, &mut p, &mut m);

        let f_next = energy::objective(prob, &p, &m)?;
        if !f_next.is_finite() {
            termination = Termination::StepFailure;
            break;
        }
        let record = IterationRecord {
            iteration: k,
            objective: f_next,
            step,
            directional_derivative: slope,
            projected_gradient: projected,
            feasibility: constraints.residual(&u),
            mass_error: max_mass_error(&p, reference_mass),
            min_interior_mass: p.min_interior(),
        };
        observe(&record);
        records.push(record);
        trace.push(f_next);

        let change = (f_next - f).abs() / f.abs();
        f = f_next;
        if change < cfg.tolerance {
            termination = Termination::Converged;
            break;
        }
    }

    let objective = energy::objective_terms(prob, &p, &m)?;
    let beta = prob.beta2.sqrt();
    Ok(SolveResult {
        distance_estimate: prob.time.dt() * objective.kinetic,
        entropy_gap: 2.0 * beta * energy::relative_entropy_gap(&prob.start, &prob.end)?,
        density: p,
        flux: m,
        trace,
        records,
        iterations,
        termination,
        objective,
        removed_constraint_row: constraints.removed_row,
        initial_feasibility,
    })
}

fn max_mass_error(p: &DensityPath, reference: f64) -> f64 {
    p.levels().map(|lv| (lv.iter().sum::<f64>() - reference).abs()).fold(0.0, f64::max)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Packed unknowns of a path pair, for callers checking `A u = b` directly.
pub fn pack(layout: &Layout, p: &DensityPath, m: &FluxPath) -> Vec<f64> {
    layout.pack(p, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::TimeGrid;
    use crate::lattice::{GridSpec, Lattice};
    use crate::oracle;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn small_problem(n: usize, levels: usize) -> ProblemSpec {
        let lat = Lattice::new(GridSpec::cube(1, n, 0.0, 1.0).unwrap());
        let mut rng = StdRng::seed_from_u64(3);
        let p0 = oracle::random_histogram(&mut rng, n, 0.1);
        let p1 = oracle::random_histogram(&mut rng, n, 0.1);
        ProblemSpec::new(lat, TimeGrid::new(levels).unwrap(), p0, p1, 1e-3).unwrap()
    }

    #[test]
    fn constraint_shape_and_rank() {
        let prob = small_problem(3, 2);
        let c = assemble_constraints(&prob).unwrap();
        assert_eq!(c.full_matrix().ncols(), 12);
        assert_eq!(c.full_matrix().nrows(), 9);
        assert_eq!(c.matrix.nrows(), 8);
        assert_eq!(c.removed_row, 8);
        let s = faer::Mat::<f64>::from_fn(8, 12, |r, k| c.matrix.get(r, k)).singular_values().unwrap();
        assert!(s.iter().all(|&v| v > 1e-8));
        // Only the first and last intervals see the fixed endpoints.
        assert!(c.full_rhs()[3..6].iter().all(|&v| v == 0.0));
        assert!(c.full_rhs()[..3].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn initial_point_is_feasible() {
        let prob = small_problem(6, 4);
        let c = assemble_constraints(&prob).unwrap();
        let (p, m) = feasible_init::initial_point(&prob).unwrap();
        assert!(c.residual(&pack(&prob.layout(), &p, &m)) < 1e-10);
    }

    #[test]
    fn kkt_single_row() {
        let a = CsrMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1.0), (0, 2, 1.0)]);
        let h = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let sol = KktSolver::new(&a, 1e-12).solve(&h, &[1.0, 0.0, 0.0]).unwrap();
        for (d, want) in sol.direction.iter().zip([-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
            assert!((d - want).abs() < 1e-12);
        }
        let zero = KktSolver::new(&a, 1e-12).solve(&h, &[0.0; 3]).unwrap();
        assert!(zero.direction.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kkt_random_spd() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 12;
        let b = faer::Mat::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &b * b.transpose() + faer::Mat::<f64>::identity(n, n);
        let mut t = Vec::new();
        for r in 0..n {
            for c in 0..n {
                t.push((r, c, spd[(r, c)]));
            }
        }
        let h = CsrMatrix::from_triplets(n, n, &t);
        let a_t: Vec<_> = (0..5).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| (r, c, rng.gen_range(-1.0..1.0))).collect();
        let a = CsrMatrix::from_triplets(5, n, &a_t);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut solver = KktSolver::new(&a, 1e-10);
        let mut factored = solver.factor(&h).unwrap();
        let sol = factored.solve(&g).unwrap();
        assert!(!factored.uses_lu());
        assert!(sol.relative_residual <= 1e-10);
        assert!(a.mul_vec(&sol.direction).iter().all(|v| v.abs() < 1e-10));
        let slope: f64 = sol.direction.iter().zip(&g).map(|(d, g)| d * g).sum();
        assert!(slope < 0.0);
    }

    #[test]
    fn lu_fallback_agrees_with_ldlt() {
        let prob = small_problem(6, 4);
        let c = assemble_constraints(&prob).unwrap();
        let (p, m) = feasible_init::initial_point(&prob).unwrap();
        let h = energy::hessian(&prob, &p, &m).unwrap();
        let g = energy::gradient(&prob, &p, &m).unwrap().to_vec();
        let mut solver = KktSolver::new(&c.matrix, 1e-10);
        let ldlt = solver.factor(&h).unwrap().solve(&g).unwrap();
        let lu = solver.factorize_lu(&h).unwrap();
        let mut forced = FactoredKkt { solver: &mut solver, hessian: h, factor: Factor::Lu(Box::new(lu)) };
        assert!(forced.uses_lu());
        let via_lu = forced.solve(&g).unwrap();
        let scale = inf_norm(&ldlt.direction);
        for (a, b) in ldlt.direction.iter().zip(&via_lu.direction) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn boundary_fraction_cases() {
        assert!((fraction_to_boundary(&[1.0, 0.5], &[-1.0, -1.0], 0.99) - 0.495).abs() < 1e-15);
        assert_eq!(fraction_to_boundary(&[1.0], &[2.0], 0.99), 1.0);
        assert!((fraction_to_boundary(&[0.01], &[-0.1], 0.99) - 0.099).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        for bad in [
            SolverConfig { step_size: 0.0, ..Default::default() },
            SolverConfig { step_size: 1.5, ..Default::default() },
            SolverConfig { tolerance: -1.0, ..Default::default() },
            SolverConfig { max_iterations: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn uniform_endpoints_stop_immediately() {
        let lat = Lattice::new(GridSpec::cube(1, 6, 0.0, 1.0).unwrap());
        let h = vec![1.0 / 6.0; 6];
        let prob = ProblemSpec::new(lat, TimeGrid::new(5).unwrap(), h.clone(), h, 1e-4).unwrap();
        let r = newton_solve(&prob, &SolverConfig::default()).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert!(r.objective.total <= 1e-12);
        assert_eq!(r.flux.max_abs(), 0.0);
    }

    #[test]
    fn small_solve_descends_and_stays_feasible() {
        let prob = small_problem(8, 6);
        let c = assemble_constraints(&prob).unwrap();
        let r = newton_solve_with(&prob, &SolverConfig::default(), |rec| {
            assert!(rec.feasibility < 1e-8);
            assert!(rec.mass_error < 1e-10);
            assert!(rec.min_interior_mass > 0.0);
        })
        .unwrap();
        assert!(r.converged());
        assert!(r.trace_strictly_decreasing());
        assert!(c.residual(&pack(&prob.layout(), &r.density, &r.flux)) < 1e-8);
    }
}
