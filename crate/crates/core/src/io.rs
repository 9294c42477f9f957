//! Histogram ingestion (CSV and PGM), normalization with a positivity floor,
//! and emission of frames, objective traces and run reports.
//!
//! Lattice node order is row-major with the last axis fastest. CSV grids are
//! read in file order, so row `r`, column `c` of a 2D CSV is node `(r, c)`.
//! PGM images follow the image convention instead: column `c` is the first
//! coordinate and image rows run down the second coordinate, so pixel
//! `(row r, col c)` of an `n × n` image is node `(c, n - 1 - r)`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::newton::{SolveResult, SolverConfig, Termination};

/// Maxval used for emitted PGM frames.
pub const FRAME_MAXVAL: u16 = u16::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Pgm,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Pgm => "pgm",
        })
    }
}

/// Raw nonnegative grid values in lattice node order.
#[derive(Clone, Debug, PartialEq)]
pub struct InputHistogram {
    pub values: Vec<f64>,
    pub dim: usize,
    pub n_pts: usize,
    pub source: PathBuf,
    pub format: Format,
    /// Absolute amount added to every entry by the last normalization.
    pub floor_applied: Option<f64>,
    /// Sum the floored values were divided by.
    pub normalization: Option<f64>,
}

impl InputHistogram {
    /// Applies [`normalize_with_floor`] and records the floor and divisor.
    pub fn normalize(&mut self, floor: f64) -> Result<Vec<f64>> {
        let (hist, added, total) = floor_and_normalize(&self.values, floor)?;
        self.floor_applied = Some(added);
        self.normalization = Some(total);
        Ok(hist)
    }
}

/// Adds `floor · max(raw)` to every entry and rescales to unit mass.
pub fn normalize_with_floor(raw: &[f64], floor: f64) -> Result<Vec<f64>> {
    floor_and_normalize(raw, floor).map(|(h, _, _)| h)
}

fn floor_and_normalize(raw: &[f64], floor: f64) -> Result<(Vec<f64>, f64, f64)> {
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::InvalidConfig(format!("floor must be >= 0, got {floor}")));
    }
    if raw.is_empty() {
        return Err(Error::InvalidHistogram("empty histogram".into()));
    }
    if let Some(v) = raw.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidHistogram(format!("entry {v} is negative or not finite")));
    }
    let peak = raw.iter().copied().fold(0.0, f64::max);
    // an all-zero input with a positive floor becomes uniform
    let added = if peak > 0.0 { floor * peak } else { floor };
    let total: f64 = raw.iter().map(|v| v + added).sum();
    if total == 0.0 {
        return Err(Error::InvalidHistogram("all-zero histogram needs a positive floor".into()));
    }
    Ok((raw.iter().map(|v| (v + added) / total).collect(), added, total))
}

/// Reads one value per line (1D), a single comma-separated row (1D), or a
/// square block of comma-separated rows (2D).
pub fn read_histogram_csv(path: impl AsRef<Path>) -> Result<InputHistogram> {
    let path = path.as_ref();
    let parse_err = |reason: String| Error::Parse { path: path.display().to_string(), reason };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                let v: f64 = field.parse().map_err(|_| parse_err(format!("row {}, column {}: '{field}' is not a number", r + 1, c + 1)))?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(parse_err(format!("row {}, column {}: negative or non-finite value {v}", r + 1, c + 1)));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err("file contains no values".into()));
    }

    let width = rows[0].len();
    let (values, dim, n_pts) = if rows.iter().all(|r| r.len() == 1) {
        let v: Vec<f64> = rows.into_iter().flatten().collect();
        let n = v.len();
        (v, 1, n)
    } else if rows.len() == 1 {
        (rows.remove(0), 1, width)
    } else {
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != width) {
            return Err(parse_err(format!("ragged rows: row {} has {} values, expected {width}", r + 1, row.len())));
        }
        if rows.len() != width {
            return Err(parse_err(format!("2D grids must be square, got {} x {width}", rows.len())));
        }
        (rows.concat(), 2, width)
    };
    Ok(InputHistogram { values, dim, n_pts, source: path.to_path_buf(), format: Format::Csv, floor_applied: None, normalization: None })
}

/// Decoded PGM raster, rows top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

/// Parses binary (P5) or ASCII (P2) PGM data.
pub fn parse_pgm(bytes: &[u8]) -> std::result::Result<PgmImage, String> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(bytes)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(format!("unsupported magic number '{other}' (expected P2 or P5)")),
    };
    let mut header_num = |what: &str| -> std::result::Result<usize, String> {
        let t = token(bytes)?;
        t.parse::<usize>().map_err(|_| format!("malformed {what} '{t}'"))
    };
    let width = header_num("width")?;
    let height = header_num("height")?;
    let maxval = header_num("maxval")?;
    if width == 0 || height == 0 {
        return Err("image has zero size".into());
    }
    if maxval == 0 || maxval > u16::MAX as usize {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    let count = width * height;

    let pixels: Vec<u16> = if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let bpp = if maxval < 256 { 1 } else { 2 };
        let payload = bytes.get(pos..).unwrap_or(&[]);
        if payload.len() < count * bpp {
            return Err(format!("truncated payload: {} of {} bytes", payload.len(), count * bpp));
        }
        if bpp == 1 {
            payload[..count].iter().map(|&b| b as u16).collect()
        } else {
            payload[..2 * count].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        }
    } else {
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let t = token(bytes).map_err(|_| format!("truncated payload: {k} of {count} samples"))?;
            out.push(t.parse::<u16>().map_err(|_| format!("malformed sample '{t}'"))?);
        }
        out
    };
    if let Some(v) = pixels.iter().find(|&&v| v as usize > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    Ok(PgmImage { width, height, maxval: maxval as u16, pixels })
}

/// Reads a square PGM image; pixel value `v` becomes raw mass `v / maxval`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<InputHistogram> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let parse_err = |reason: String| Error::Parse { path: path.display().to_string(), reason };
    let img = parse_pgm(&bytes).map_err(parse_err)?;
    if img.width != img.height {
        return Err(parse_err(format!("image must be square, got {} x {}", img.width, img.height)));
    }
    let n = img.width;
    let mut values = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            values[pixel_to_node(n, r, c)] = img.pixels[r * n + c] as f64 / img.maxval as f64;
        }
    }
    Ok(InputHistogram { values, dim: 2, n_pts: n, source: path.to_path_buf(), format: Format::Pgm, floor_applied: None, normalization: None })
}

/// Lattice node shown at image pixel `(row, col)`.
pub fn pixel_to_node(n: usize, row: usize, col: usize) -> usize {
    col * n + (n - 1 - row)
}

/// Writes a 2D lattice vector as a binary PGM image, mapping `scale` to
/// `maxval`.
pub fn write_pgm(path: impl AsRef<Path>, values: &[f64], n: usize, scale: f64, maxval: u16) -> Result<()> {
    let mut out = format!("P5\n{n} {n}\n{maxval}\n").into_bytes();
    for r in 0..n {
        for c in 0..n {
            let v = values[pixel_to_node(n, r, c)];
            let level = if scale > 0.0 { (v / scale * maxval as f64).round().clamp(0.0, maxval as f64) } else { 0.0 };
            if maxval < 256 {
                out.push(level as u8);
            } else {
                out.extend_from_slice(&(level as u16).to_be_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes one value per line using the shortest round-tripping decimal form.
pub fn write_csv_column(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for v in values {
        writeln!(f, "{v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes a 2D lattice vector as a square CSV block in lattice order.
pub fn write_csv_grid(path: impl AsRef<Path>, values: &[f64], n: usize) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for row in values.chunks(n) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Paths emitted by [`write_frames`].
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<PathBuf>,
    pub trace: PathBuf,
    /// Mass mapped to the PGM maxval (2D only).
    pub intensity_scale: Option<f64>,
}

/// One frame per time level (`frame_0000.csv` in 1D, `frame_0000.pgm` in 2D)
/// plus `trace.csv` with the objective per iteration.
pub fn write_frames(result: &SolveResult, lattice: &Lattice, dir: impl AsRef<Path>) -> Result<FrameSet> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let n = lattice.spec().n_pts();
    let mut frames = Vec::new();
    let mut intensity_scale = None;
    match lattice.dim() {
        1 => {
            for (l, level) in result.density.levels().enumerate() {
                let path = dir.join(format!("frame_{l:04}.csv"));
                write_csv_column(&path, level)?;
                frames.push(path);
            }
        }
        _ => {
            let scale = result.density.levels().flatten().copied().fold(0.0, f64::max);
            intensity_scale = Some(scale);
            for (l, level) in result.density.levels().enumerate() {
                let path = dir.join(format!("frame_{l:04}.pgm"));
                write_pgm(&path, level, n, scale, FRAME_MAXVAL)?;
                frames.push(path);
            }
        }
    }
    let trace = dir.join("trace.csv");
    write_trace(&trace, &result.trace)?;
    Ok(FrameSet { frames, trace, intensity_scale })
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Io(e.into()))?;
    let io_err = |e: csv::Error| Error::Io(e.into());
    w.write_record(["iteration", "objective"]).map_err(io_err)?;
    for (k, f) in trace.iter().enumerate() {
        w.write_record([k.to_string(), f.to_string()]).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridReport {
    pub dim: usize,
    pub n_pts: usize,
    pub domain: Vec<(f64, f64)>,
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigReport {
    pub beta2: f64,
    pub time_steps: usize,
    pub floor: f64,
    pub kinetic_rule: String,
    pub solver: SolverConfig,
    pub grid: GridReport,
}

/// Summary of one solve, serialized as JSON with a fixed key order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ConfigReport,
    pub iterations: usize,
    pub termination: Termination,
    pub final_objective: f64,
    pub kinetic: f64,
    pub fisher: f64,
    pub distance_estimate: f64,
    pub entropy_gap: f64,
    pub final_feasibility: f64,
    pub min_interior_mass: f64,
    pub trace_file: Option<String>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(result: &SolveResult, config: ConfigReport, feasibility: f64, trace_file: Option<String>, wall_time_seconds: f64) -> Self {
        Self {
            config,
            iterations: result.iterations,
            termination: result.termination,
            final_objective: result.objective.total,
            kinetic: result.objective.kinetic,
            fisher: result.objective.fisher,
            distance_estimate: result.distance_estimate,
            entropy_gap: result.entropy_gap,
            final_feasibility: feasibility,
            min_interior_mass: result.density.min_interior(),
            trace_file,
            wall_time_seconds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn csv_column_and_grid() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "1\n1\n1\n1\n").unwrap();
        let h = read_histogram_csv(&p).unwrap();
        assert_eq!((h.dim, h.n_pts), (1, 4));
        assert_eq!(h.values, vec![1.0; 4]);

        fs::write(&p, "1,2\n3,4\n").unwrap();
        let h = read_histogram_csv(&p).unwrap();
        assert_eq!((h.dim, h.n_pts), (2, 2));
        assert_eq!(h.values, vec![1.0, 2.0, 3.0, 4.0]);

        fs::write(&p, "0.5, 0.25, 0.25\n").unwrap();
        assert_eq!(read_histogram_csv(&p).unwrap().values, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn csv_errors() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        for body in ["1,2\n3\n", "1\n-2\n", "", "1,x\n2,3\n", "1,2,3\n4,5,6\n"] {
            fs::write(&p, body).unwrap();
            assert!(matches!(read_histogram_csv(&p), Err(Error::Parse { .. })), "accepted {body:?}");
        }
        assert!(read_histogram_csv(dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn floor_and_normalization() {
        let h = normalize_with_floor(&[1.0, 0.0], 0.01).unwrap();
        assert!((h[0] - 1.01 / 1.02).abs() < 1e-15 && (h[1] - 0.01 / 1.02).abs() < 1e-15);
        assert!((h[0] - 0.990196).abs() < 1e-6 && (h[1] - 0.009804).abs() < 1e-6);
        assert_eq!(normalize_with_floor(&[3.0; 4], 0.2).unwrap(), vec![0.25; 4]);
        assert_eq!(normalize_with_floor(&[1.0, 3.0], 0.0).unwrap(), vec![0.25, 0.75]);
        assert_eq!(normalize_with_floor(&[0.0; 4], 0.01).unwrap(), vec![0.25; 4]);
        assert!(normalize_with_floor(&[0.0; 4], 0.0).is_err());
        assert!(normalize_with_floor(&[1.0, -1.0], 0.1).is_err());
        assert!(normalize_with_floor(&[1.0], -0.1).is_err());

        let mut input = InputHistogram {
            values: vec![2.0, 0.0],
            dim: 1,
            n_pts: 2,
            source: PathBuf::from("mem"),
            format: Format::Csv,
            floor_applied: None,
            normalization: None,
        };
        let h = input.normalize(0.5).unwrap();
        assert_eq!(input.floor_applied, Some(1.0));
        assert_eq!(input.normalization, Some(4.0));
        assert_eq!(h, vec![0.75, 0.25]);
    }

    #[test]
    fn pgm_ascii_and_binary() {
        let img = parse_pgm(b"P2\n# comment\n2 2\n255\n255 0\n0 0\n").unwrap();
        assert_eq!(img.pixels, vec![255, 0, 0, 0]);

        let dir = tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        fs::write(&p, b"P2 2 2 255 255 0 0 0").unwrap();
        let h = read_pgm(&p).unwrap();
        // pixel (row 0, col 0) is node (x = 0, y = 1)
        let mut expected = vec![0.0; 4];
        expected[pixel_to_node(2, 0, 0)] = 1.0;
        assert_eq!(h.values, expected);
        assert_eq!(expected, vec![0.0, 1.0, 0.0, 0.0]);

        let mut bin = b"P5\n3 3\n255\n".to_vec();
        bin.extend([0u8, 1, 2, 3, 4, 5, 6, 7, 255]);
        let img = parse_pgm(&bin).unwrap();
        assert_eq!(img.pixels[8], 255);

        let mut wide = b"P5 1 1 65535\n".to_vec();
        wide.extend(1000u16.to_be_bytes());
        assert_eq!(parse_pgm(&wide).unwrap().pixels, vec![1000]);
    }

    #[test]
    fn pgm_errors() {
        assert!(parse_pgm(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0\0").unwrap_err().contains("truncated"));
        assert!(parse_pgm(b"P2\n2 2\n255\n1 2 3").unwrap_err().contains("truncated"));
        assert!(parse_pgm(b"P2\n2 x\n255\n").is_err());
        assert!(parse_pgm(b"P2\n1 1\n70000\n1").is_err());
        assert!(parse_pgm(b"P2\n1 1\n10\n11").is_err());
        assert!(parse_pgm(b"P2\n").is_err());
    }

    #[test]
    fn all_zero_image_floors_to_uniform() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("z.pgm");
        fs::write(&p, b"P2 3 3 255 0 0 0 0 0 0 0 0 0").unwrap();
        let mut h = read_pgm(&p).unwrap();
        let hist = h.normalize(0.01).unwrap();
        assert!(hist.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn pgm_round_trip_within_quantization() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("r.pgm");
        let n = 5;
        let values: Vec<f64> = (0..n * n).map(|k| ((k * 37) % 11) as f64 / 10.0).collect();
        let scale = 1.0;
        write_pgm(&p, &values, n, scale, FRAME_MAXVAL).unwrap();
        let back = read_pgm(&p).unwrap();
        for (a, b) in values.iter().zip(&back.values) {
            assert!((a - b * scale).abs() <= scale / (2.0 * FRAME_MAXVAL as f64) + 1e-15);
        }
    }

    #[test]
    fn csv_frame_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let values = vec![0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-7, 0.0];
        write_csv_column(&p, &values).unwrap();
        assert_eq!(read_histogram_csv(&p).unwrap().values, values);

        let grid = vec![0.5, 1.0 / 7.0, 3.0, 0.25];
        write_csv_grid(&p, &grid, 2).unwrap();
        assert_eq!(read_histogram_csv(&p).unwrap().values, grid);
    }
}
