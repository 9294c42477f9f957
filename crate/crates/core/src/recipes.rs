//! Ready-made experiment configurations: translating Gaussians in 1D and 2D,
//! a square splitting in two, and a pair of digit-like images.

use crate::energy::{ProblemSpec, TimeGrid};
use crate::error::Result;
use crate::io::normalize_with_floor;
use crate::lattice::{GridSpec, Lattice};

/// Endpoint histograms on a lattice with the time resolution and β² to use.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: &'static str,
    pub lattice: Lattice,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub time_steps: usize,
    pub beta2: f64,
}

impl Experiment {
    pub fn problem(&self) -> Result<ProblemSpec> {
        ProblemSpec::new(self.lattice.clone(), TimeGrid::new(self.time_steps)?, self.start.clone(), self.end.clone(), self.beta2)
    }

    /// Same endpoints, swapped.
    pub fn reversed(&self) -> Self {
        Self { start: self.end.clone(), end: self.start.clone(), ..self.clone() }
    }
}

/// `exp(-|x - c|² / 0.01) + 0.01` at every node, before normalization.
pub fn floored_gaussian(lat: &Lattice, centre: &[f64]) -> Vec<f64> {
    (0..lat.node_count())
        .map(|i| {
            let d2: f64 = lat.position(i).iter().zip(centre).map(|(x, c)| (x - c) * (x - c)).sum();
            (-d2 / 0.01).exp() + 0.01
        })
        .collect()
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Gaussian bump moving from 0.4 to 1.6 on `[0, 2]`.
pub fn gaussian_1d(n_pts: usize, time_steps: usize) -> Result<Experiment> {
    let lattice = Lattice::new(GridSpec::cube(1, n_pts, 0.0, 2.0)?);
    Ok(Experiment {
        name: "gaussian-1d",
        start: normalized(floored_gaussian(&lattice, &[0.4])),
        end: normalized(floored_gaussian(&lattice, &[1.6])),
        lattice,
        time_steps,
        beta2: 1e-6,
    })
}

/// Reference 1D configuration: 40 points, 50 time levels.
pub fn example_1d() -> Result<Experiment> {
    gaussian_1d(40, 50)
}

/// Gaussian bump moving from (0.2, 0.5) to (1.5, 1.5) on `[0, 2]²`.
pub fn gaussian_2d(n_pts: usize, time_steps: usize) -> Result<Experiment> {
    let lattice = Lattice::new(GridSpec::cube(2, n_pts, 0.0, 2.0)?);
    Ok(Experiment {
        name: "gaussian-2d",
        start: normalized(floored_gaussian(&lattice, &[0.2, 0.5])),
        end: normalized(floored_gaussian(&lattice, &[1.5, 1.5])),
        lattice,
        time_steps,
        beta2: 1e-6,
    })
}

/// Reference 2D configuration: 20 × 20 points, 30 time levels.
pub fn example_2d() -> Result<Experiment> {
    gaussian_2d(20, 30)
}

/// Centred square splitting into two half-height squares side by side,
/// on an `n × n` image with the default relative floor.
pub fn square_split(n: usize, time_steps: usize, floor: f64) -> Result<Experiment> {
    let lattice = Lattice::new(GridSpec::cube(2, n, 0.0, 1.0)?);
    let inside = |lo: f64, hi: f64, v: f64| v >= lo && v <= hi;
    let paint = |boxes: &[(f64, f64, f64, f64)]| -> Vec<f64> {
        (0..lattice.node_count())
            .map(|i| {
                let x = lattice.position(i);
                let hit = boxes.iter().any(|&(x0, x1, y0, y1)| inside(x0, x1, x[0]) && inside(y0, y1, x[1]));
                if hit {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let start = paint(&[(0.3, 0.7, 0.3, 0.7)]);
    let end = paint(&[(0.05, 0.45, 0.4, 0.6), (0.55, 0.95, 0.4, 0.6)]);
    Ok(Experiment {
        name: "square-split",
        start: normalize_with_floor(&start, floor)?,
        end: normalize_with_floor(&end, floor)?,
        lattice,
        time_steps,
        beta2: 1e-5,
    })
}

/// 28 × 28 stroke drawings of a "4" and a "1" as 8-bit rasters (rows top to
/// bottom), standing in for handwritten digit images.
pub fn digit_rasters() -> (Vec<u8>, Vec<u8>) {
    const N: usize = 28;
    fn stroke(img: &mut [u8], (r0, c0): (f64, f64), (r1, c1): (f64, f64)) {
        let steps = 200;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (r, c) = (r0 + t * (r1 - r0), c0 + t * (c1 - c0));
            for dr in -1i32..=1 {
                for dc in -1i32..=1 {
                    let (rr, cc) = (r.round() as i32 + dr, c.round() as i32 + dc);
                    if (0..N as i32).contains(&rr) && (0..N as i32).contains(&cc) {
                        let k = rr as usize * N + cc as usize;
                        let v = if dr == 0 && dc == 0 { 255 } else { 160 };
                        img[k] = img[k].max(v);
                    }
                }
            }
        }
    }
    let mut four = vec![0u8; N * N];
    stroke(&mut four, (5.0, 9.0), (15.0, 7.0));
    stroke(&mut four, (15.0, 7.0), (15.0, 20.0));
    stroke(&mut four, (5.0, 17.0), (23.0, 17.0));
    let mut one = vec![0u8; N * N];
    stroke(&mut one, (4.0, 15.0), (23.0, 13.0));
    stroke(&mut one, (4.0, 15.0), (8.0, 12.0));
    (four, one)
}

/// PGM (P5) encoding of an 8-bit square raster.
pub fn encode_pgm(pixels: &[u8], n: usize) -> Vec<u8> {
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Uniform endpoints on a `dim`-dimensional cube; the solution is static.
pub fn uniform(dim: usize, n_pts: usize, time_steps: usize) -> Result<Experiment> {
    let lattice = Lattice::new(GridSpec::cube(dim, n_pts, 0.0, 1.0)?);
    let n = lattice.node_count();
    let h = vec![1.0 / n as f64; n];
    Ok(Experiment { name: "uniform", start: h.clone(), end: h, lattice, time_steps, beta2: 1e-6 })
}
