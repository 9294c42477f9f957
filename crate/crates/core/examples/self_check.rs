// Derivative, convexity and barrier checks on small random problems: the
// analytic gradient and Hessian against central differences, the smallest
// eigenvalue of the Hessian restricted to the constraint null space, and the
// growth of the Fisher term near the simplex boundary.
//
//     cargo run --release --example self_check [SEED]

use fisher_ot::oracle::verification_suite;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&std::env::args().skip(1).collect::<Vec<_>>())
}

pub fn run_example(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let seed = args.first().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let checks = verification_suite(&mut StdRng::seed_from_u64(seed))?;
    for c in &checks {
        println!("{} {:<32} {:.3e} (threshold {:.0e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    if checks.iter().any(|c| !c.passed) {
        return Err("self-check failed".into());
    }
    Ok(())
}
