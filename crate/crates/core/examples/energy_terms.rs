// Building a problem by hand and evaluating the energy pieces along the
// linear-interpolation starting path.

use fisher_ot::energy::{self, objective_terms};
use fisher_ot::feasible_init::{feasibility_residual, initial_point};
use fisher_ot::{GridSpec, Lattice, ProblemSpec, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let lattice = Lattice::new(GridSpec::cube(1, 5, 0.0, 1.0)?);
    let start = vec![0.4, 0.3, 0.15, 0.1, 0.05];
    let end: Vec<f64> = start.iter().rev().copied().collect();
    let prob = ProblemSpec::new(lattice.clone(), TimeGrid::new(4)?, start.clone(), end.clone(), 1e-2)?;

    println!("fisher(start)    {:.6}", energy::fisher_information(&lattice, &start)?);
    println!("entropy gap      {:.6}", energy::relative_entropy_gap(&start, &end)?);

    let (p, m) = initial_point(&prob)?;
    let terms = objective_terms(&prob, &p, &m)?;
    println!("kinetic          {:.6}", terms.kinetic);
    println!("fisher (summed)  {:.6}", terms.fisher);
    println!("total            {:.6}", terms.total);
    println!("continuity gap   {:.1e}", feasibility_residual(&prob, &p, &m)?);
    Ok(())
}
