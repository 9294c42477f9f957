// Interpolates between two 28 × 28 grayscale digits.
//
// Pass two PGM files (for instance exported MNIST digits); without
// arguments a drawn "4" and "1" are used. Exact zeros are lifted by the
// default relative floor of 0.01 before normalization.
//
//     cargo run --release --example digits [A.pgm B.pgm [OUT_DIR]]

use fisher_ot::io::{self, read_pgm};
use fisher_ot::newton::newton_solve_with;
use fisher_ot::{recipes, GridSpec, Lattice, ProblemSpec, SolverConfig, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example(&std::env::args().skip(1).collect::<Vec<_>>())
}

pub fn run_example(args: &[String]) -> Result<(), Box<dyn std::error::Error>> {
    let scratch = std::env::temp_dir().join("fisher-ot-digits");
    std::fs::create_dir_all(&scratch)?;
    let (a, b) = if args.len() >= 2 {
        (args[0].clone().into(), args[1].clone().into())
    } else {
        let (four, one) = recipes::digit_rasters();
        let (a, b) = (scratch.join("four.pgm"), scratch.join("one.pgm"));
        std::fs::write(&a, recipes::encode_pgm(&four, 28))?;
        std::fs::write(&b, recipes::encode_pgm(&one, 28))?;
        (a, b)
    };
    let out_dir: std::path::PathBuf = args.get(2).map(Into::into).unwrap_or_else(|| scratch.join("frames"));

    let (mut h0, mut h1) = (read_pgm(&a)?, read_pgm(&b)?);
    let lattice = Lattice::new(GridSpec::cube(2, h0.n_pts, 0.0, 1.0)?);
    let prob = ProblemSpec::new(lattice.clone(), TimeGrid::new(30)?, h0.normalize(0.01)?, h1.normalize(0.01)?, 1e-6)?;
    let result = newton_solve_with(&prob, &SolverConfig::default(), |r| {
        println!("iter {:3}  f = {:.6}  |Au-b| = {:.1e}  min p = {:.2e}", r.iteration, r.objective, r.feasibility, r.min_interior_mass);
    })?;
    println!("{:?} after {} iterations", result.termination, result.iterations);
    let frames = io::write_frames(&result, &lattice, &out_dir)?;
    println!("{} frames in {}", frames.frames.len(), out_dir.display());
    Ok(())
}
