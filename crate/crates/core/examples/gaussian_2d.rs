// Gaussian bump moving diagonally on a 20 × 20 grid with 30 interior time
// levels; writes 32 PGM frames sharing one intensity scale.
//
//     cargo run --release --example gaussian_2d [OUT_DIR]

use fisher_ot::newton::newton_solve_with;
use fisher_ot::{io, recipes, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&std::env::args().skip(1).collect::<Vec<_>>())
}

pub fn run_example(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let out_dir: std::path::PathBuf = args.first().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("fisher-ot-gaussian-2d"));
    let exp = recipes::example_2d()?;
    let prob = exp.problem()?;
    let clock = std::time::Instant::now();
    let result = newton_solve_with(&prob, &SolverConfig::default(), |r| {
        println!("iter {:3}  f = {:.6}  min p = {:.2e}", r.iteration, r.objective, r.min_interior_mass);
    })?;
    println!("{:?} in {:.1}s", result.termination, clock.elapsed().as_secs_f64());

    let frames = io::write_frames(&result, &exp.lattice, &out_dir)?;
    println!("{} frames in {}", frames.frames.len(), out_dir.display());
    Ok(())
}
