use std::fs;
use std::path::Path;

use cfsi_core::bench::{run_single, run_sweep, RunSpec, SweepSpec, RESULTS_FILE, RESULTS_HEADER};
use cfsi_core::image::{psnr, synthetic_scene};
use cfsi_core::{save_image, Error, Method, Mode};

fn write_scene(dir: &Path, size: usize) -> std::path::PathBuf {
    let path = dir.join("scene.pgm");
    save_image(&synthetic_scene(size, size), &path).unwrap();
    path
}

fn spec(dir: &Path, object: std::path::PathBuf) -> SweepSpec {
    SweepSpec {
        object_path: object,
        methods: Method::ALL.to_vec(),
        modes: vec![Mode::Grayscale],
        budgets: vec![4, 8, 12, 16, 20, 24, 28, 32],
        sigmas: vec![0.0],
        seeds: vec![1],
        output_dir: dir.join("out"),
        background_flux: 0.0,
    }
}

fn csv_rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("out").join(RESULTS_FILE))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn sweep_writes_one_row_and_image_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = spec(tmp.path(), write_scene(tmp.path(), 16));
    let summary = run_sweep(&spec).unwrap();
    assert_eq!((summary.computed, summary.skipped), (32, 0));

    let rows = csv_rows(tmp.path());
    assert_eq!(rows[0], RESULTS_HEADER);
    assert_eq!(rows.len(), 33);
    let pgms = fs::read_dir(tmp.path().join("out"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgms, 32);
    assert!(tmp.path().join("out/two-step_grayscale_m28_s0_seed1.pgm").exists());

    // coefficients_covered = floor(budget / steps)
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let method: Method = f[0].parse().unwrap();
        let budget: usize = f[2].parse().unwrap();
        assert_eq!(f[5].parse::<usize>().unwrap(), budget / method.steps());
        assert!(f[8].parse::<u64>().unwrap() > 0);
    }
}

#[test]
fn sweep_resumes_missing_cells_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = spec(tmp.path(), write_scene(tmp.path(), 16));
    spec.budgets = vec![8, 16];
    assert_eq!(run_sweep(&spec).unwrap().computed, 8);

    let again = run_sweep(&spec).unwrap();
    assert_eq!((again.computed, again.skipped), (0, 8));

    // drop the last row, as if the run had been interrupted
    let path = tmp.path().join("out").join(RESULTS_FILE);
    let rows = csv_rows(tmp.path());
    fs::write(&path, rows[..rows.len() - 1].join("\n") + "\n").unwrap();
    let resumed = run_sweep(&spec).unwrap();
    assert_eq!((resumed.computed, resumed.skipped), (1, 7));

    spec.sigmas = vec![0.0, 0.5];
    let extended = run_sweep(&spec).unwrap();
    assert_eq!((extended.computed, extended.skipped), (8, 8));
    assert_eq!(csv_rows(tmp.path()).len(), 17);
    assert!(tmp.path().join("out/cfsi_grayscale_m8_s0p5_seed1.pgm").exists());
}

#[test]
fn sweep_validation_happens_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = spec(tmp.path(), write_scene(tmp.path(), 16));
    bad.methods.clear();
    assert!(matches!(run_sweep(&bad), Err(Error::Config { ref field, .. }) if field == "methods"));

    // a regular file where the output directory should be
    let blocker = tmp.path().join("blocked");
    fs::write(&blocker, b"x").unwrap();
    let mut unwritable = spec(tmp.path(), tmp.path().join("does-not-exist.pgm"));
    unwritable.output_dir = blocker.join("out");
    assert!(matches!(run_sweep(&unwritable), Err(Error::Io { .. })));
}

#[test]
fn run_single_is_deterministic() {
    let obj = synthetic_scene(32, 32);
    let spec = RunSpec::new(Method::ThreeStep, Mode::Binary, 300).with_noise(0.5, 9);
    let (a_img, mut a_row) = run_single(&obj, &spec).unwrap();
    let (b_img, mut b_row) = run_single(&obj, &spec).unwrap();
    a_row.wall_ms = 0;
    b_row.wall_ms = 0;
    assert_eq!(a_row, b_row);
    assert_eq!(a_img.to_bytes(), b_img.to_bytes());
}

#[test]
fn full_cfsi_sampling_reproduces_the_object() {
    let obj = synthetic_scene(128, 128);
    let (recon, row) = run_single(&obj, &RunSpec::new(Method::Cfsi, Mode::Grayscale, 16388)).unwrap();
    assert_eq!(row.coefficients_covered, 8194);
    // reported metric uses the unrounded reconstruction: only round-off remains
    assert!(row.mse < 1e-20, "mse {}", row.mse);
    assert!(psnr(&obj, &recon.quantized(), 8).unwrap().is_perfect());
    assert_eq!(recon.to_bytes(), obj.to_bytes());
}
