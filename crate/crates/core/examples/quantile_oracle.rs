// Exact squared W2 distance between 1D histograms through their quantile
// functions, the reference the solver's distance estimate is checked against.

use fisher_ot::oracle::{w2_squared_1d, QuantilePair};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Point mass moving by 0.5.
    let x = [0.0, 0.5, 1.0];
    println!("delta shift      {}", w2_squared_1d(&x, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])?);
    // Half the mass moves by 1.
    println!("half moves       {}", w2_squared_1d(&x, &[1.0, 0.0, 0.0], &[0.5, 0.0, 0.5])?);
    // Arbitrary supports work too.
    let pair = QuantilePair::new(vec![(0.0, 0.25), (1.0, 0.75)], vec![(0.5, 1.0)])?;
    println!("breakpoints      {:?}", pair.breakpoints());
    println!("two atoms -> one {}", pair.w2_squared());
    Ok(())
}
