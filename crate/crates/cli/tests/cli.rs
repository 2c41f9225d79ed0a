use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shear-tracer"))
}

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/presets")
        .join(format!("{name}.cfg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parsed CSV: header and rows of fields.
fn read_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

/// A short version of a preset, written into `dir`.
fn short_preset(dir: &Path, name: &str, t_end: f64) -> PathBuf {
    let text = fs::read_to_string(preset(name)).unwrap();
    let text: String = text
        .lines()
        .map(|l| if l.starts_with("t_end") { format!("t_end = {t_end}") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join(format!("{name}.cfg"));
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_exit_codes() {
    let ok = run(&["validate", "--config", preset("single_mode_qg_linear").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("ok"));

    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[zonal]\nkind = cubic\na = 2\nc = 0\n").unwrap();
    let o = run(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("cubic damping must be positive"));

    let o = run(&["validate", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_preset_validates() {
    for entry in fs::read_dir(preset("x").parent().unwrap()).unwrap() {
        let path = entry.unwrap().path();
        let o = run(&["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", path.display());
    }
}

#[test]
fn simulate_is_deterministic_and_crosses_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = short_preset(dir.path(), "single_mode_qg_linear", 120.0);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectory.csv", "crossings.csv", "ensemble_samples.csv"] {
        assert_eq!(fs::read(out_a.join(f)).unwrap(), fs::read(out_b.join(f)).unwrap(), "{f}");
    }
    let (header, rows) = read_csv(&fs::read_to_string(out_a.join("trajectory.csv")).unwrap());
    assert_eq!(header, ["t", "u", "v1_re", "v1_im", "T1_re", "T1_im"]);
    let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(times.windows(2).all(|w| ((w[1] - w[0]) - 0.01).abs() < 1e-9));

    let (header, rows) = read_csv(&fs::read_to_string(out_a.join("crossings.csv")).unwrap());
    assert_eq!(header, ["k", "u_res", "count", "trajectory"]);
    let count: u64 = rows[0][2].parse().unwrap();
    assert!(count > 0);

    let manifest = fs::read_to_string(out_a.join("manifest.csv")).unwrap();
    assert!(manifest.contains("subcommand,simulate"));
    assert!(manifest.contains("seed,5"));
}

#[test]
fn seed_changes_output() {
    let dir = TempDir::new().unwrap();
    let cfg = short_preset(dir.path(), "single_mode_qg_linear", 30.0);
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn ensemble_multiplies_pooled_samples() {
    let dir = TempDir::new().unwrap();
    let cfg = short_preset(dir.path(), "single_mode_qg_linear", 40.0);
    let count = |n: &str| {
        let out = dir.path().join(format!("ens{n}"));
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--ensemble", n]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("ensemble_samples.csv")).unwrap().lines().count() - 1
    };
    assert_eq!(count("4"), 4 * count("1"));
}

#[test]
fn complex_root_switch_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = short_preset(dir.path(), "single_mode_qg_linear", 30.0);
    let out = dir.path().join("lit");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--paper-literal"]);
    assert_eq!(o.status.code(), Some(0));
    let exact = dir.path().join("exact");
    run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", exact.to_str().unwrap()]);
    assert_ne!(fs::read(out.join("trajectory.csv")).unwrap(), fs::read(exact.join("trajectory.csv")).unwrap());
}

#[test]
fn field_output_for_multimode() {
    let dir = TempDir::new().unwrap();
    let cfg = short_preset(dir.path(), "multimode_qg_equip", 16.0);
    let out = dir.path().join("mm");
    assert_eq!(
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let (header, rows) = read_csv(&fs::read_to_string(out.join("field.csv")).unwrap());
    assert_eq!(header, ["t", "x", "T"]);
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(rows.len(), 64 * (traj.lines().count() - 1));
    assert_eq!(traj.lines().next().unwrap().split(',').count(), 2 + 4 * 5);
}

#[test]
fn regime_points_and_sweep() {
    let (_, rows) = read_csv(&stdout(&run(&["regime", "--a", "2", "--b", "0", "--c", "1", "--f", "0"])));
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 32.0);
    assert_eq!(rows[0][5], "3");
    assert!((rows[0][7].parse::<f64>().unwrap() - 1.088_662).abs() < 1e-6);

    let (_, rows) = read_csv(&stdout(&run(&["regime", "--a", "-1", "--f", "0"])));
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), -4.0);
    assert_eq!(rows[0][5], "1");
    assert_eq!(rows[0][6], "");

    let o = run(&["regime", "--a", "1", "--c", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let dir = TempDir::new().unwrap();
    let o = run(&[
        "regime",
        "--a-range",
        "-1:4",
        "--f-range",
        "-2:2",
        "--n",
        "101",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&fs::read_to_string(dir.path().join("regime.csv")).unwrap());
    assert_eq!(rows.len(), 101 * 101);
}

#[test]
fn resonance_tables() {
    let table = |name: &str| {
        let o = run(&["resonance", "--config", preset(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        read_csv(&stdout(&o)).1
    };
    for row in table("random_shear") {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    }
    for row in table("nondispersive_advective") {
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0183);
    }
    let qg = table("multimode_qg_equip");
    assert_eq!(qg.len(), 5);
    for row in &qg {
        let k: f64 = row[0].parse().unwrap();
        let expect = -8.91 * k * k / (2.5 * (k * k + 2.5));
        assert!((row[1].parse::<f64>().unwrap() - expect).abs() < 1e-12);
        let p: f64 = row[3].parse().unwrap();
        assert!(p > 0.0 && p < 0.5);
    }
}

#[test]
fn modes_table() {
    let o = run(&["modes", "--config", preset("multimode_qg_kolm").to_str().unwrap()]);
    let (header, rows) = read_csv(&stdout(&o));
    assert_eq!(header, ["k", "a_k", "b_k", "gamma_v", "gamma_T", "E_v", "sigma_v", "u_res"]);
    let total: f64 = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).sum();
    assert!((total - 5.0).abs() < 1e-12);
    assert!((rows[1][1].parse::<f64>().unwrap() + 0.75).abs() < 1e-15);
}

#[test]
fn zonal_pdf_is_normalized() {
    let o = run(&["zonal-pdf", "--config", preset("single_mode_qg_cubic_f1_B25").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&stdout(&o));
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    assert!((mass - 1.0).abs() < 1e-6);
}

#[test]
fn variance_profile_columns() {
    let o = run(&[
        "variance-profile",
        "--config",
        preset("multimode_qg_equip").to_str().unwrap(),
        "--points",
        "4001",
    ]);
    let (header, rows) = read_csv(&stdout(&o));
    assert_eq!(header.len(), 2 + 5);
    assert_eq!(header[1], "Sigma_total");
    // the total is twice the sum of the per-mode columns
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        let sum: f64 = v[2..].iter().sum();
        assert!((v[1] - 2.0 * sum).abs() < 1e-12 * v[1]);
    }
    // peak of mode 1 near its resonant speed
    let best = rows
        .iter()
        .max_by(|a, b| a[2].parse::<f64>().unwrap().total_cmp(&b[2].parse::<f64>().unwrap()))
        .unwrap();
    assert!((best[0].parse::<f64>().unwrap() + 1.018_285_7).abs() < 5e-3);
}

#[test]
fn pdf_command() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("narrow.cfg");
    // nearly frozen zonal flow: the analytic law is close to one Gaussian
    fs::write(&cfg, "[zonal]\nf = 0.4431\nsigma_u = 1e-4\n[run]\nt_end = 60\ndt = 1e-3\n").unwrap();
    let out = dir.path().join("pdf");
    let o = run(&["pdf", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&fs::read_to_string(out.join("pdf.csv")).unwrap());
    assert_eq!(
        header,
        ["lambda", "analytic_density", "empirical_density", "log10_analytic", "log10_empirical"]
    );
    assert_eq!(rows.len(), 1001);
    let u = 0.4431;
    let (a, b) = (1.5, 8.91 / 3.5);
    let wr = -(a + 1.0) * u - b;
    let var = 2.0 / (0.101f64.powi(2) + wr * wr);
    let lam: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    let dens: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for (l, d) in lam.iter().zip(&dens) {
        let g = (-0.5 * l * l / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        assert!((d - g).abs() < 1e-3 * (1.0 + g), "{l}: {d} vs {g}");
    }

    let zero = dir.path().join("alpha0.cfg");
    fs::write(&zero, "[tracer]\nalpha = 0\n[run]\nt_end = 20\n").unwrap();
    let o = run(&["pdf", "--config", zero.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn manifest_hash_follows_config_bytes() {
    let dir = TempDir::new().unwrap();
    let hash = |text: &str, tag: &str| {
        let cfg = dir.path().join(format!("{tag}.cfg"));
        fs::write(&cfg, text).unwrap();
        let out = dir.path().join(tag);
        let o = run(&["modes", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let m = fs::read_to_string(out.join("manifest.csv")).unwrap();
        m.lines().find(|l| l.starts_with("config_hash,")).unwrap().to_string()
    };
    let a = hash("[run]\nkmax = 2\n", "a");
    assert_eq!(a, hash("[run]\nkmax = 2\n", "b"));
    assert_ne!(a, hash("[run]\nkmax = 2 # same config, other bytes\n", "c"));
}

#[test]
fn presets_are_written() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["presets", "--out", dir.path().to_str().unwrap()]).status.code(), Some(0));
    let n = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(n, 12);
    assert_eq!(
        fs::read(dir.path().join("random_shear.cfg")).unwrap(),
        fs::read(preset("random_shear")).unwrap()
    );
}
