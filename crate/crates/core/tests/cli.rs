use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cvl::container::{self, ArrayStack};
use cvl::{Complex64, ComplexImage, RealImage};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["cvl"];
    full.extend_from_slice(args);
    let code = cvl::cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn run_ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "args {args:?}: {err}");
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn real_frames(path: &Path) -> Vec<RealImage> {
    container::load(path).unwrap().into_real().unwrap()
}

fn clean_image(tmp: &TempDir) -> PathBuf {
    let path = tmp.path().join("clean.cvl");
    let img = RealImage::from_fn(12, 12, |r, c| 0.1 + 0.8 * ((r * 12 + c) % 17) as f64 / 16.0);
    container::save(&path, &ArrayStack::Real(vec![img])).unwrap();
    path
}

fn object(n: usize) -> ComplexImage {
    ComplexImage::from_fn(n, n, |r, c| {
        let a = 0.5 + 0.3 * (r as f64 * 0.7).cos() * (c as f64 * 0.5).sin();
        Complex64::from_polar(a, 0.6 * (c as f64 * 0.4).sin())
    })
}

fn save_complex(tmp: &TempDir, name: &str, o: &ComplexImage) -> PathBuf {
    let path = tmp.path().join(name);
    container::save(&path, &ArrayStack::Complex(vec![o.clone()])).unwrap();
    path
}

/// All files in `a` and `b` are byte-identical.
fn assert_same_outputs(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let (x, y) = (a.join(&name), b.join(&name));
        if x.is_dir() {
            continue;
        }
        assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{name:?} differs");
    }
}

#[test]
fn simulate_identity_lands_on_quantization_grid() {
    let tmp = TempDir::new().unwrap();
    let input = clean_image(&tmp);
    let out = tmp.path().join("sim");
    run_ok(&["simulate", "--input", p(&input), "--set", "fwc=10000", "--set", "quant_bits=8", "-o", p(&out)]);
    let frames = real_frames(&out.join("measurements.cvl"));
    assert_eq!(frames.len(), 1);
    for &v in frames[0].as_slice() {
        let level = v * 255.0;
        assert!((level - level.round()).abs() < 1e-4, "{v} is off the 256-level grid");
    }
    let m = manifest(&out);
    assert_eq!(m["results"]["m"], 1);
    assert_eq!(m["results"]["quant_bits"], 8);
    assert_eq!(m["results"]["rho"], 1.0);
    assert!((m["results"]["sigma0"].as_f64().unwrap() - 0.01).abs() < 1e-12);
}

#[test]
fn simulate_ptychography_writes_one_image_per_led() {
    let tmp = TempDir::new().unwrap();
    let input = save_complex(&tmp, "obj.cvl", &object(16));
    let out = tmp.path().join("sim");
    run_ok(&["simulate", "--input", p(&input), "--model", "ptychography", "--set", "rho=0.5", "-o", p(&out)]);
    assert_eq!(real_frames(&out.join("measurements.cvl")).len(), 89);
    assert_eq!(manifest(&out)["results"]["m"], 89);
}

#[test]
fn input_errors_exit_with_usage_code() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.cvl");
    let (code, _, err) = run(&["simulate", "--input", p(&missing), "-o", p(tmp.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.cvl"), "{err}");
    let (code, _, err) = run(&["simulate", "-o", p(tmp.path())]);
    assert_eq!(code, 2);
    assert!(err.contains("--input"), "{err}");
    let (code, _, _) = run(&["denoise", "--set", "no_such_key=1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["--help"]);
    assert_eq!(code, 0);
}

#[test]
fn denoise_with_zero_step_returns_clamped_input() {
    let tmp = TempDir::new().unwrap();
    let y = RealImage::from_fn(5, 6, |r, c| if (r + c) % 3 == 0 { 0.0 } else { 0.1 * r as f64 });
    let meas = tmp.path().join("y.cvl");
    container::save(&meas, &ArrayStack::Real(vec![y.clone()])).unwrap();
    let out = tmp.path().join("out");
    run_ok(&[
        "denoise", "--measurements", p(&meas), "--set", "eps=0", "--n-runs", "1", "-o", p(&out),
    ]);
    let est = real_frames(&out.join("estimate.cvl"));
    assert_eq!(est.len(), 1);
    let expected: Vec<f32> = y.as_slice().iter().map(|&v| v.max(1e-4) as f32).collect();
    let got: Vec<f32> = est[0].as_slice().iter().map(|&v| v as f32).collect();
    assert_eq!(got, expected);
}

#[test]
fn phase_retrieval_manifest_records_hio_residual_and_seed() {
    let tmp = TempDir::new().unwrap();
    let truth = ComplexImage::from_fn(8, 8, |r, c| {
        Complex64::new(if (1..6).contains(&r) && (2..7).contains(&c) { 0.4 } else { 0.05 }, 0.0)
    });
    let input = save_complex(&tmp, "obj.cvl", &truth);
    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--input", p(&input), "--model", "fourier-magnitude", "-o", p(&sim)]);
    let out = tmp.path().join("pr");
    run_ok(&[
        "phase-retrieval",
        "--config", p(&sim.join("config.txt")),
        "--measurements", p(&sim.join("measurements.cvl")),
        "--truth", p(&input),
        "--init", "hio",
        "--hio-restarts", "50",
        "--n-runs", "2",
        "--seed", "21",
        "--set", "levels=100",
        "-o", p(&out),
    ]);
    let m = manifest(&out);
    assert_eq!(m["seed"], 21);
    assert_eq!(m["config"]["seed"], "21");
    assert_eq!(m["config"]["hio_restarts"], "50");
    let residual = m["results"]["hio_residual"].as_f64().unwrap();
    assert!((0.0..1.0).contains(&residual), "{residual}");
    assert!(m["results"]["metrics"]["phase_psnr"].is_number());
    assert!(out.join("amplitude_variance.cvl").exists());
    assert_eq!(
        container::load(&out.join("estimate.cvl")).unwrap().count(),
        2
    );
}

#[test]
fn ptychography_with_single_atom_prior_reaches_30_db() {
    let tmp = TempDir::new().unwrap();
    let truth = object(16);
    let input = save_complex(&tmp, "obj.cvl", &truth);
    let sim = tmp.path().join("sim");
    run_ok(&[
        "simulate", "--input", p(&input), "--model", "ptychography",
        "--set", "sigma0=0.1", "--set", "rho=0.5", "-o", p(&sim),
    ]);
    let out = tmp.path().join("fp");
    run_ok(&[
        "ptychography",
        "--config", p(&sim.join("config.txt")),
        "--measurements", p(&sim.join("measurements.cvl")),
        "--truth", p(&input),
        "--prior", &format!("discrete:{}", p(&input)),
        "--n-runs", "1",
        "-o", p(&out),
    ]);
    let psnr = manifest(&out)["results"]["metrics"]["psnr"].as_f64().unwrap();
    assert!(psnr >= 30.0, "amplitude PSNR {psnr}");
}

#[test]
fn metrics_command_output() {
    let tmp = TempDir::new().unwrap();
    let real = clean_image(&tmp);
    let (code, out, _) = run(&["metrics", "--estimate", p(&real), "--truth", p(&real)]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["psnr"], 200.0);
    assert_eq!(v["ssim"], 1.0);
    assert!(v.get("phase_psnr").is_none());

    let obj = save_complex(&tmp, "obj.cvl", &object(12));
    let v: Value = serde_json::from_str(
        run_ok(&["metrics", "--estimate", p(&obj), "--truth", p(&obj)]).trim(),
    )
    .unwrap();
    assert_eq!(v["phase_psnr"], 200.0);

    let small = save_complex(&tmp, "small.cvl", &object(8));
    let (code, _, err) = run(&["metrics", "--estimate", p(&small), "--truth", p(&obj)]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn reruns_from_manifest_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let clean = clean_image(&tmp);
    let sim = tmp.path().join("sim");
    run_ok(&["simulate", "--input", p(&clean), "--seed", "5", "-o", p(&sim)]);
    let sim2 = tmp.path().join("sim2");
    run_ok(&["simulate", "--from-manifest", p(&sim.join("manifest.json")), "-o", p(&sim2)]);
    assert_same_outputs(&sim, &sim2);

    let den = tmp.path().join("den");
    run_ok(&[
        "denoise", "--measurements", p(&sim.join("measurements.cvl")), "--truth", p(&clean),
        "--n-runs", "3", "--set", "levels=200", "--set", "record_trajectory=true", "-o", p(&den),
    ]);
    let den2 = tmp.path().join("den2");
    run_ok(&["denoise", "--from-manifest", p(&den.join("manifest.json")), "-o", p(&den2)]);
    assert_same_outputs(&den, &den2);
    assert_same_outputs(&den.join("trajectory"), &den2.join("trajectory"));

    // the thread count does not change results
    let den3 = tmp.path().join("den3");
    run_ok(&[
        "denoise", "--from-manifest", p(&den.join("manifest.json")), "--jobs", "3", "-o", p(&den3),
    ]);
    assert_eq!(
        fs::read(den.join("estimate.cvl")).unwrap(),
        fs::read(den3.join("estimate.cvl")).unwrap()
    );

    // a manifest only replays its own command
    let (code, _, _) = run(&["hio", "--from-manifest", p(&den.join("manifest.json"))]);
    assert_eq!(code, 2);
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let clean = clean_image(&tmp);
    let bin = env!("CARGO_BIN_EXE_cvl");
    let run_bin = |out: &Path, extra: &[&str]| {
        let status = Command::new(bin)
            .args(["simulate", "--input", p(&clean), "-o", p(out)])
            .args(extra)
            .env("CVL_SEED", "17")
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        manifest(out)["seed"].as_u64().unwrap()
    };
    assert_eq!(run_bin(&tmp.path().join("a"), &[]), 17);
    assert_eq!(run_bin(&tmp.path().join("b"), &["--seed", "3"]), 3);
    let cfg = tmp.path().join("seed.txt");
    fs::write(&cfg, "seed = 9\n").unwrap();
    assert_eq!(run_bin(&tmp.path().join("c"), &["--config", p(&cfg)]), 9);
}
