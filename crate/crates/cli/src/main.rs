//! Command-line front end: validation, simulation and analysis of tracer
//! experiments, with CSV output for external plotting.

mod output;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use shear_tracer::config::{build_mode_table, validate_config, ExperimentConfig};
use shear_tracer::integrator::{simulate_ensemble, NoiseScheme, SystemState};
use shear_tracer::presets::PRESETS;
use shear_tracer::shear::ModeTable;
use shear_tracer::statistics::{
    histogram_on_grid, ks_distance, reconstruct_field, resonance_table, tracer_field_mixture, variance_profile,
    TabulatedCdf,
};
use shear_tracer::zonal::{boundary_forcings, classify_regime, default_grid, linspace, stationary_pdf};
use shear_tracer::Error;

use output::{num, opt_num, Manifest, Sink};

#[derive(Parser)]
#[command(name = "shear-tracer", version, about = "Passive tracer in stochastic zonal and shear flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long, visible_alias = "out-dir")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of independent trajectories.
    #[arg(long)]
    ensemble: Option<u32>,
    /// Shear noise factor exactly as sqrt(dt e^{lambda dt}) instead of the exact OU variance.
    #[arg(long = "paper-literal")]
    literal_noise: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print its validation report.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the system: trajectory.csv, crossings.csv, ensemble_samples.csv, manifest.csv.
    Simulate(RunArgs),
    /// Analytic and empirical stationary PDF of the tracer at x = 0.
    Pdf {
        #[command(flatten)]
        run: RunArgs,
        /// Histogram cells (lambda grid points).
        #[arg(long, default_value_t = 1001)]
        points: usize,
    },
    /// Equilibria of the deterministic cubic zonal drift, one point or an (a, f) sweep.
    Regime(RegimeArgs),
    /// Stationary density of the zonal flow.
    ZonalPdf(ConfigArgs),
    /// Coefficient table of the configured modes.
    Modes(ConfigArgs),
    /// Resonant zonal speeds and the zonal probability beyond each.
    Resonance(ConfigArgs),
    /// Stationary conditional variance as a function of the zonal speed.
    VarianceProfile {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Write the bundled preset configs into a directory, or list them.
    Presets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RegimeArgs {
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    b: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    c: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    f: f64,
    /// Sweep a over LO:HI (with --f-range) instead of a single point.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    a_range: Option<(f64, f64)>,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    f_range: Option<(f64, f64)>,
    /// Grid points per swept axis.
    #[arg(long, default_value_t = 101)]
    n: usize,
    #[arg(long, visible_alias = "out-dir")]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number '{hi}'"))?;
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err("range must have HI > LO".into());
    }
    Ok((lo, hi))
}

enum Failure {
    Model(String),
    Io(String),
    /// Model failure already reported on stdout.
    Reported,
    Closed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            // reader went away, e.g. piped into `head`
            std::io::ErrorKind::BrokenPipe => Failure::Closed,
            _ => Failure::Io(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

struct Loaded {
    path: String,
    bytes: Vec<u8>,
    cfg: ExperimentConfig,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Io(format!("{}: not UTF-8", path.display())))?;
    let cfg: ExperimentConfig = text.parse()?;
    Ok(Loaded {
        path: path.display().to_string(),
        bytes,
        cfg,
    })
}

fn load_valid(path: &Path) -> Result<Loaded, Failure> {
    let loaded = load(path)?;
    let report = validate_config(&loaded.cfg);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.into_result()?;
    Ok(loaded)
}

fn write_manifest(loaded: &Loaded, seed: Option<u64>, subcommand: &str, out: Option<&Path>, start: Instant) -> CmdResult {
    if let Some(dir) = out {
        Manifest {
            config_path: &loaded.path,
            config_bytes: &loaded.bytes,
            seed,
            subcommand,
            out_dir: dir,
            wall_clock_s: start.elapsed().as_secs_f64(),
        }
        .write()?;
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> CmdResult {
    let loaded = load(config)?;
    let report = validate_config(&loaded.cfg);
    print!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(Failure::Reported)
    }
}

fn apply_overrides(cfg: &mut ExperimentConfig, run: &RunArgs) -> Result<(u64, NoiseScheme), Failure> {
    if let Some(n) = run.ensemble {
        if n == 0 {
            return Err(Failure::Model("--ensemble must be at least 1".into()));
        }
        cfg.n_ensemble = n;
    }
    let seed = run.seed.unwrap_or(cfg.seed);
    cfg.seed = seed;
    let scheme = if run.literal_noise {
        NoiseScheme::ComplexRoot
    } else {
        NoiseScheme::ExactOu
    };
    Ok((seed, scheme))
}

fn cmd_simulate(run: &RunArgs) -> CmdResult {
    let start = Instant::now();
    let mut loaded = load_valid(&run.common.config)?;
    let (seed, scheme) = apply_overrides(&mut loaded.cfg, run)?;
    let cfg = &loaded.cfg;
    let out = run.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let table = build_mode_table(cfg)?;

    let origin = [0.0];
    let results = simulate_ensemble(
        cfg,
        seed,
        scheme,
        |j| (j, Vec::new(), Vec::new()),
        |acc: &mut (u64, Vec<(f64, f64)>, Vec<SystemState>), s| {
            acc.1.push((s.t, reconstruct_field(&s.t_modes, &origin)[0]));
            if acc.0 == 0 {
                acc.2.push(s.clone());
            }
        },
    )?;

    let mut traj = Sink::open(Some(&out), "trajectory.csv")?;
    let mut header = vec!["t".to_string(), "u".to_string()];
    for m in table.iter() {
        header.push(format!("v{}_re", m.k));
        header.push(format!("v{}_im", m.k));
    }
    for m in table.iter() {
        header.push(format!("T{}_re", m.k));
        header.push(format!("T{}_im", m.k));
    }
    traj.row(&header)?;
    let states = &results[0].0 .2;
    for s in states {
        let mut row = vec![num(s.t), num(s.u)];
        for z in s.v_modes.iter().chain(&s.t_modes) {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        traj.row(row)?;
    }
    traj.finish()?;

    let mut cross = Sink::open(Some(&out), "crossings.csv")?;
    cross.row(["k", "u_res", "count", "trajectory"])?;
    for ((j, _, _), crossings) in &results {
        for c in crossings {
            cross.row([c.k.to_string(), opt_num(c.u_res), c.count.to_string(), j.to_string()])?;
        }
    }
    cross.finish()?;

    let mut pooled = Sink::open(Some(&out), "ensemble_samples.csv")?;
    pooled.row(["trajectory", "t", "T_x0"])?;
    for ((j, samples, _), _) in &results {
        for &(t, v) in samples {
            pooled.row([j.to_string(), num(t), num(v)])?;
        }
    }
    pooled.finish()?;

    if cfg.x_grid_n > 0 {
        let n = cfg.x_grid_n as usize;
        let xs: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let mut field = Sink::open(Some(&out), "field.csv")?;
        field.row(["t", "x", "T"])?;
        for s in states {
            let t = num(s.t);
            for (x, v) in xs.iter().zip(reconstruct_field(&s.t_modes, &xs)) {
                field.row([t.as_str(), &num(*x), &num(v)])?;
            }
        }
        field.finish()?;
    }
    let total_crossings: u64 = results[0].1.iter().map(|c| c.count).sum();
    println!(
        "{} trajectories, {} recorded states each, {} threshold crossings in trajectory 0",
        results.len(),
        states.len(),
        total_crossings
    );
    write_manifest(&loaded, Some(seed), "simulate", Some(&out), start)
}

fn zonal_density(cfg: &ExperimentConfig) -> Result<shear_tracer::ZonalStationaryPdf, Failure> {
    let pdf = stationary_pdf(&cfg.zonal, &default_grid(&cfg.zonal)?)?;
    for w in &pdf.warnings {
        eprintln!("warning: {w}");
    }
    Ok(pdf)
}

fn cmd_pdf(run: &RunArgs, points: usize) -> CmdResult {
    let start = Instant::now();
    let mut loaded = load_valid(&run.common.config)?;
    let (seed, scheme) = apply_overrides(&mut loaded.cfg, run)?;
    let cfg = &loaded.cfg;
    let out = run.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let table = build_mode_table(cfg)?;
    let zonal = zonal_density(cfg)?;
    let mix = tracer_field_mixture(&table, &zonal, cfg.tracer.alpha)?;
    if points < 3 {
        return Err(Failure::Model("--points must be at least 3".into()));
    }
    let half = 8.0 * mix.max_variance().sqrt();
    let grid = linspace(-half, half, points);
    let analytic = mix.evaluate(&grid)?;

    let origin = [0.0];
    let results = simulate_ensemble(cfg, seed, scheme, |_| Vec::new(), |acc: &mut Vec<f64>, s| {
        acc.push(reconstruct_field(&s.t_modes, &origin)[0])
    })?;
    let samples: Vec<f64> = results.into_iter().flat_map(|(v, _)| v).collect();
    let empirical = histogram_on_grid(&samples, &grid)?;

    let mut sink = Sink::open(Some(&out), "pdf.csv")?;
    sink.row(["lambda", "analytic_density", "empirical_density", "log10_analytic", "log10_empirical"])?;
    let la = analytic.log10_density();
    let le = empirical.log10_density();
    for i in 0..grid.len() {
        sink.row([
            num(grid[i]),
            num(analytic.density[i]),
            num(empirical.density[i]),
            num(la[i]),
            num(le[i]),
        ])?;
    }
    sink.finish()?;
    let cdf = TabulatedCdf::from_mixture(&mix, &linspace(-1.25 * half, 1.25 * half, 20_001));
    println!(
        "{} pooled samples; Kolmogorov-Smirnov distance to the analytic law {:.4}",
        samples.len(),
        ks_distance(&samples, |x| cdf.eval(x))
    );
    write_manifest(&loaded, Some(seed), "pdf", Some(&out), start)
}

fn cmd_regime(args: &RegimeArgs) -> CmdResult {
    let points: Vec<(f64, f64)> = match (args.a_range, args.f_range) {
        (None, None) => vec![(args.a, args.f)],
        (ar, fr) => {
            if args.n < 2 {
                return Err(Failure::Model("--n must be at least 2".into()));
            }
            let a_vals = ar.map_or(vec![args.a], |(lo, hi)| linspace(lo, hi, args.n));
            let f_vals = fr.map_or(vec![args.f], |(lo, hi)| linspace(lo, hi, args.n));
            a_vals.iter().flat_map(|&a| f_vals.iter().map(move |&f| (a, f))).collect()
        }
    };
    let mut sink = Sink::open(args.out.as_deref(), "regime.csv")?;
    sink.row(["a", "b", "c", "f", "discriminant", "n_roots", "f_minus", "f_plus"])?;
    for (a, f) in points {
        let r = classify_regime(a, args.b, args.c, f)?;
        let fb = boundary_forcings(a, args.b, args.c);
        sink.row([
            num(a),
            num(args.b),
            num(args.c),
            num(f),
            num(r.cubic_discriminant),
            r.n_real_roots.to_string(),
            opt_num(fb.map(|b| b.0)),
            opt_num(fb.map(|b| b.1)),
        ])?;
    }
    sink.finish()?;
    Ok(())
}

fn cmd_zonal_pdf(args: &ConfigArgs) -> CmdResult {
    let start = Instant::now();
    let loaded = load_valid(&args.config)?;
    let pdf = zonal_density(&loaded.cfg)?;
    let mut sink = Sink::open(args.out.as_deref(), "zonal_pdf.csv")?;
    sink.row(["u", "density"])?;
    for (u, p) in pdf.grid.iter().zip(&pdf.density) {
        sink.row([num(*u), num(*p)])?;
    }
    sink.finish()?;
    write_manifest(&loaded, None, "zonal-pdf", args.out.as_deref(), start)
}

fn cmd_modes(args: &ConfigArgs) -> CmdResult {
    let start = Instant::now();
    let loaded = load_valid(&args.config)?;
    let table = build_mode_table(&loaded.cfg)?;
    let mut sink = Sink::open(args.out.as_deref(), "modes.csv")?;
    sink.row(["k", "a_k", "b_k", "gamma_v", "gamma_T", "E_v", "sigma_v", "u_res"])?;
    for m in table.iter() {
        sink.row([
            m.k.to_string(),
            num(m.a),
            num(m.b),
            num(m.gamma_v),
            num(m.gamma_t),
            num(m.e_v),
            num(m.sigma_v),
            opt_num(m.u_res),
        ])?;
    }
    sink.finish()?;
    write_manifest(&loaded, None, "modes", args.out.as_deref(), start)
}

fn cmd_resonance(args: &ConfigArgs) -> CmdResult {
    let start = Instant::now();
    let loaded = load_valid(&args.config)?;
    let table = build_mode_table(&loaded.cfg)?;
    let zonal = zonal_density(&loaded.cfg)?;
    let mut sink = Sink::open(args.out.as_deref(), "resonance.csv")?;
    sink.row(["k", "u_res", "u_res_fluct", "tail_prob"])?;
    for r in resonance_table(&table, &zonal) {
        if r.u_res.is_none() {
            eprintln!("warning: mode k = {} is degenerate (a_k + k = 0), no resonant speed", r.k);
        }
        sink.row([r.k.to_string(), opt_num(r.u_res), opt_num(r.u_res_fluct), opt_num(r.tail_prob)])?;
    }
    sink.finish()?;
    write_manifest(&loaded, None, "resonance", args.out.as_deref(), start)
}

/// Zonal speeds spanning the bulk of the zonal law and every resonant speed.
fn profile_grid(table: &ModeTable, cfg: &ExperimentConfig, points: usize) -> Result<Vec<f64>, Failure> {
    // the default zonal grid spans 10 standard deviations each side
    let zonal_grid = default_grid(&cfg.zonal)?;
    let (first, last) = (zonal_grid[0], zonal_grid[zonal_grid.len() - 1]);
    let mid = 0.5 * (first + last);
    let (mut lo, mut hi) = (mid - 0.25 * (last - first), mid + 0.25 * (last - first));
    for u in table.iter().filter_map(|m| m.u_res) {
        lo = lo.min(u - 1.0);
        hi = hi.max(u + 1.0);
    }
    if points < 2 {
        return Err(Failure::Model("--points must be at least 2".into()));
    }
    Ok(linspace(lo, hi, points))
}

fn cmd_variance_profile(args: &ConfigArgs, points: usize) -> CmdResult {
    let start = Instant::now();
    let loaded = load_valid(&args.config)?;
    let cfg = &loaded.cfg;
    let table = build_mode_table(cfg)?;
    let grid = profile_grid(&table, cfg, points)?;
    let mut sink = Sink::open(args.out.as_deref(), "variance_profile.csv")?;
    let mut header = vec!["u".to_string(), "Sigma_total".to_string()];
    header.extend(table.iter().map(|m| format!("Sigma_{}", m.k)));
    sink.row(&header)?;
    for row in variance_profile(&table, cfg.tracer.alpha, &grid) {
        let mut fields = vec![num(row.u), num(row.total)];
        fields.extend(row.per_mode.into_iter().map(num));
        sink.row(fields)?;
    }
    sink.finish()?;
    write_manifest(&loaded, None, "variance-profile", args.out.as_deref(), start)
}

fn cmd_presets(out: Option<&Path>) -> CmdResult {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for (name, text) in PRESETS {
                fs::write(dir.join(format!("{name}.cfg")), text)?;
            }
        }
        None => PRESETS.iter().for_each(|(name, _)| println!("{name}")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { config } => cmd_validate(config),
        Command::Simulate(run) => cmd_simulate(run),
        Command::Pdf { run, points } => cmd_pdf(run, *points),
        Command::Regime(args) => cmd_regime(args),
        Command::ZonalPdf(args) => cmd_zonal_pdf(args),
        Command::Modes(args) => cmd_modes(args),
        Command::Resonance(args) => cmd_resonance(args),
        Command::VarianceProfile { common, points } => cmd_variance_profile(common, *points),
        Command::Presets { out } => cmd_presets(out.as_deref()),
    };
    match result {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(Failure::Model(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Reported) => ExitCode::from(1),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
