// A square splitting into two rectangles. Mass has to tear apart, which
// plain transport does with sharp fronts; the Fisher term keeps the path
// smooth and strictly positive.
//
//     cargo run --release --example square_split [OUT_DIR]

use fisher_ot::{io, newton_solve, recipes, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&std::env::args().skip(1).collect::<Vec<_>>())
}

pub fn run_example(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let out_dir: std::path::PathBuf = args.first().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("fisher-ot-square-split"));
    let exp = recipes::square_split(24, 20, 0.01)?;
    let result = newton_solve(&exp.problem()?, &SolverConfig::default())?;
    println!("{:?} after {} iterations", result.termination, result.iterations);
    println!("kinetic {:.6}  fisher {:.6}", result.objective.kinetic, result.objective.fisher);
    println!("smallest interior mass {:.3e}", result.density.min_interior());
    let frames = io::write_frames(&result, &exp.lattice, &out_dir)?;
    println!("{} frames in {}", frames.frames.len(), out_dir.display());
    Ok(())
}
