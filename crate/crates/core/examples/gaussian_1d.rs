// A Gaussian bump sliding across `[0, 2]` (40 points, 50 time levels).
//
// Prints the objective trace, compares the distance estimate with the exact
// quantile-function W2², and writes one CSV per time level.
//
//     cargo run --release --example gaussian_1d [OUT_DIR]

use fisher_ot::{io, newton_solve, oracle, recipes, SolverConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&std::env::args().skip(1).collect::<Vec<_>>())
}

pub fn run_example(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let out_dir: std::path::PathBuf = args.first().map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("fisher-ot-gaussian-1d"));
    let exp = recipes::example_1d()?;
    let prob = exp.problem()?;
    let result = newton_solve(&prob, &SolverConfig::default())?;

    for (k, f) in result.trace.iter().enumerate() {
        println!("{k:3}  {f:.8}");
    }
    let exact = oracle::w2_squared_1d(&oracle::axis_positions(&exp.lattice), &exp.start, &exp.end)?;
    println!("termination      {:?} after {} iterations", result.termination, result.iterations);
    println!("distance est.    {:.6}", result.distance_estimate);
    println!("exact W2^2       {exact:.6}  (rel. error {:.2}%)", 100.0 * (result.distance_estimate - exact).abs() / exact);

    let frames = io::write_frames(&result, &exp.lattice, &out_dir)?;
    println!("{} frames in {}", frames.frames.len(), out_dir.display());
    Ok(())
}
