#![allow(dead_code)]

mod quantile_oracle {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/quantile_oracle.rs"));
}

mod energy_terms {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/energy_terms.rs"));
}

mod self_check {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/self_check.rs"));
}

mod gaussian_1d {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gaussian_1d.rs"));
}

#[test]
fn quantile_oracle_runs() {
    quantile_oracle::run_example().expect("quantile oracle example");
}

#[test]
fn energy_terms_runs() {
    energy_terms::run_example().expect("energy terms example");
}

#[test]
fn self_check_passes() {
    self_check::run_example(&["7".to_string()]).expect("self-check example");
}

#[test]
fn gaussian_1d_writes_frames() {
    let dir = tempfile::tempdir().unwrap();
    gaussian_1d::run_example(&[dir.path().display().to_string()]).expect("1D example");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 53);
}
