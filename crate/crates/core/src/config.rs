//! Model specifications, validation and the sectioned `key = value` config format.
//!
//! A config file has five sections, `[zonal]`, `[shear]`, `[spectrum]`,
//! `[tracer]` and `[run]`. Keys are the field names of the corresponding
//! spec type; keys that are absent keep their default value. `#` starts a
//! comment.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::shear::{dispersion_coeffs, energy_spectrum, ModeCoefficients, ModeTable};
use crate::zonal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZonalKind {
    Linear,
    Cubic,
}

/// Zonal cross-sweep SDE. `Linear` uses `gamma_u`, `f`, `sigma_u`; `Cubic`
/// uses `a`, `b`, `c`, `f`, the CAM pair `A`, `B`, and `sigma_u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZonalSpec {
    pub kind: ZonalKind,
    pub gamma_u: f64,
    pub f: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cam_a: f64,
    pub cam_b: f64,
    pub sigma_u: f64,
}

impl ZonalSpec {
    pub fn linear(gamma_u: f64, f: f64, sigma_u: f64) -> Self {
        Self {
            kind: ZonalKind::Linear,
            gamma_u,
            f,
            sigma_u,
            ..Self::default()
        }
    }

    /// Cubic drift `a u + b u^2 - c u^3 + f` with CAM noise `(A - B u) dW2 + sigma_u dW1`.
    pub fn cubic(a: f64, b: f64, c: f64, f: f64, cam_a: f64, cam_b: f64, sigma_u: f64) -> Self {
        Self {
            kind: ZonalKind::Cubic,
            gamma_u: 0.0,
            f,
            a,
            b,
            c,
            cam_a,
            cam_b,
            sigma_u,
        }
    }

    /// True when the multiplicative CAM term is absent.
    pub fn is_gradient(&self) -> bool {
        self.kind == ZonalKind::Linear || (self.cam_a == 0.0 && self.cam_b == 0.0)
    }
}

impl Default for ZonalSpec {
    fn default() -> Self {
        Self {
            kind: ZonalKind::Linear,
            gamma_u: 1.0,
            f: 0.0,
            a: 0.0,
            b: 0.0,
            c: 1.0,
            cam_a: 0.0,
            cam_b: 0.0,
            sigma_u: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShearKind {
    Random,
    Advective,
    Qg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearSpec {
    pub kind: ShearKind,
    pub d_v: f64,
    pub nu: f64,
    pub c_wave: f64,
    pub beta: f64,
    pub f_deform: f64,
}

impl ShearSpec {
    pub fn gamma_v(&self, k: i32) -> f64 {
        let k = f64::from(k);
        self.d_v + self.nu * k * k
    }
}

impl Default for ShearSpec {
    fn default() -> Self {
        Self {
            kind: ShearKind::Qg,
            d_v: 0.6,
            nu: 0.1,
            c_wave: 0.0,
            beta: 8.91,
            f_deform: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Equipartition,
    Kolmogorov,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub e0: f64,
    pub k0: u32,
    pub normalize_total: bool,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            kind: SpectrumKind::Equipartition,
            e0: 1.0,
            k0: 1,
            normalize_total: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracerSpec {
    pub alpha: f64,
    pub d_t: f64,
    pub kappa: f64,
}

impl TracerSpec {
    pub fn gamma_t(&self, k: i32) -> f64 {
        let k = f64::from(k);
        self.d_t + self.kappa * k * k
    }
}

impl Default for TracerSpec {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            d_t: 0.1,
            kappa: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub zonal: ZonalSpec,
    pub shear: ShearSpec,
    pub spectrum: SpectrumSpec,
    pub tracer: TracerSpec,
    pub kmax: u32,
    pub epsilon: f64,
    pub dt: f64,
    pub t_end: f64,
    /// `None` selects the default `10 / min_k gamma_v`.
    pub t_burnin: Option<f64>,
    pub subsample: u32,
    pub seed: u64,
    pub n_ensemble: u32,
    pub x_grid_n: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            zonal: ZonalSpec::default(),
            shear: ShearSpec::default(),
            spectrum: SpectrumSpec::default(),
            tracer: TracerSpec::default(),
            kmax: 1,
            epsilon: 0.01,
            dt: 1e-3,
            t_end: 100.0,
            t_burnin: None,
            subsample: 10,
            seed: 0,
            n_ensemble: 1,
            x_grid_n: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn wavenumbers(&self) -> impl Iterator<Item = i32> {
        1..=self.kmax as i32
    }

    /// Burn-in time actually used: explicit value, or `10 / min_k gamma_v`.
    pub fn burnin(&self) -> f64 {
        self.t_burnin.unwrap_or_else(|| {
            let min_gamma = self
                .wavenumbers()
                .map(|k| self.shear.gamma_v(k))
                .fold(f64::INFINITY, f64::min);
            if min_gamma.is_finite() && min_gamma > 0.0 {
                10.0 / min_gamma
            } else {
                0.0
            }
        })
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::InvalidConfig(self.errors.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        if self.errors.is_empty() {
            writeln!(f, "ok")?;
        }
        Ok(())
    }
}

fn check_finite(report: &mut ValidationReport, name: &str, value: f64) {
    if !value.is_finite() {
        report.errors.push(format!("{name} must be finite"));
    }
}

pub fn validate_zonal(z: &ZonalSpec, report: &mut ValidationReport) {
    for (name, v) in [
        ("gamma_u", z.gamma_u),
        ("f", z.f),
        ("a", z.a),
        ("b", z.b),
        ("c", z.c),
        ("A", z.cam_a),
        ("B", z.cam_b),
        ("sigma_u", z.sigma_u),
    ] {
        check_finite(report, name, v);
    }
    if z.sigma_u < 0.0 {
        report.errors.push("sigma_u must be non-negative".into());
    }
    match z.kind {
        ZonalKind::Linear => {
            if !(z.gamma_u > 0.0) {
                report.errors.push("linear zonal damping gamma_u must be positive".into());
            }
        }
        ZonalKind::Cubic => {
            if !(z.c > 0.0) {
                report.errors.push("cubic damping must be positive".into());
            }
            if z.sigma_u == 0.0 && z.cam_b == 0.0 {
                report
                    .errors
                    .push("cubic zonal model needs sigma_u or B nonzero for a stationary density".into());
            }
        }
    }
}

/// Checks every type invariant; fatal violations go to `errors`.
pub fn validate_config(cfg: &ExperimentConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_zonal(&cfg.zonal, &mut report);

    let sh = &cfg.shear;
    for (name, v) in [
        ("d_v", sh.d_v),
        ("nu", sh.nu),
        ("c_wave", sh.c_wave),
        ("beta", sh.beta),
        ("F", sh.f_deform),
    ] {
        check_finite(&mut report, name, v);
    }
    if !(sh.d_v > 0.0) {
        report.errors.push("shear damping d_v must be positive".into());
    }
    if sh.nu < 0.0 {
        report.errors.push("viscosity nu must be non-negative".into());
    }
    if sh.kind == ShearKind::Qg && !(sh.f_deform > 0.0) {
        report.errors.push("QG deformation parameter F must be positive".into());
    }

    let sp = &cfg.spectrum;
    check_finite(&mut report, "E0", sp.e0);
    if !(sp.e0 > 0.0) {
        report.errors.push("spectrum level E0 must be positive".into());
    }
    if sp.kind == SpectrumKind::Combined && sp.k0 < 1 {
        report.errors.push("combined spectrum crossover k0 must be a positive integer".into());
    }

    let tr = &cfg.tracer;
    for (name, v) in [("alpha", tr.alpha), ("d_T", tr.d_t), ("kappa", tr.kappa)] {
        check_finite(&mut report, name, v);
    }
    if !(tr.d_t > 0.0) {
        report.errors.push("tracer damping d_T must be positive".into());
    }
    if tr.kappa < 0.0 {
        report.errors.push("diffusivity kappa must be non-negative".into());
    }

    if cfg.kmax < 1 {
        report.errors.push("kmax must be at least 1".into());
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0) {
        report.errors.push("epsilon must lie in (0, 1]".into());
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        report.errors.push("dt must be positive".into());
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) {
        report.errors.push("t_end must be positive".into());
    }
    if let Some(tb) = cfg.t_burnin {
        if !(tb >= 0.0) {
            report.errors.push("t_burnin must be non-negative".into());
        }
    }
    if cfg.burnin() >= cfg.t_end {
        report
            .errors
            .push(format!("burn-in {} leaves nothing before t_end {}", cfg.burnin(), cfg.t_end));
    }
    if cfg.subsample < 1 {
        report.errors.push("subsample must be a positive integer".into());
    }
    if cfg.n_ensemble < 1 {
        report.errors.push("n_ensemble must be a positive integer".into());
    }

    for k in cfg.wavenumbers() {
        if !(sh.gamma_v(k) > 0.0) {
            report.errors.push(format!("gamma_v at k = {k} is not positive"));
        }
        if !(tr.gamma_t(k) > 0.0) {
            report.errors.push(format!("gamma_T at k = {k} is not positive"));
        }
    }

    if report.errors.is_empty() {
        let rate = zonal::drift_rate_scale(&cfg.zonal);
        if rate > 0.0 && cfg.dt > 0.1 / rate {
            report.warnings.push(format!(
                "dt = {} does not resolve the zonal drift (rate scale {rate:.4}, want dt <= {:.3e})",
                cfg.dt,
                0.1 / rate
            ));
        }
    }
    report
}

/// Coefficient table for k = 1..kmax.
pub fn build_mode_table(cfg: &ExperimentConfig) -> Result<ModeTable> {
    if cfg.kmax < 1 {
        return Err(Error::EmptyModes);
    }
    let ks: Vec<i32> = cfg.wavenumbers().collect();
    let energies = energy_spectrum(&cfg.spectrum, &ks)?;
    let mut modes = Vec::with_capacity(ks.len());
    for (&k, &e_v) in ks.iter().zip(&energies) {
        let (a, b) = dispersion_coeffs(&cfg.shear, k)?;
        modes.push(ModeCoefficients::new(k, a, b, cfg.shear.gamma_v(k), cfg.tracer.gamma_t(k), e_v));
    }
    Ok(ModeTable::new(modes))
}

fn parse_kind<T>(value: &str, options: &[(&str, T)], line: usize) -> Result<T>
where
    T: Copy,
{
    options
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(value))
        .map(|&(_, v)| v)
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown kind '{value}'"),
        })
}

fn parse_num<T: FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value '{value}' for {key}"),
    })
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                if !matches!(section.as_str(), "zonal" | "shear" | "spectrum" | "tracer" | "run") {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let z = &mut cfg.zonal;
            let sh = &mut cfg.shear;
            let sp = &mut cfg.spectrum;
            let tr = &mut cfg.tracer;
            match (section.as_str(), key) {
                ("zonal", "kind") => {
                    z.kind = parse_kind(value, &[("linear", ZonalKind::Linear), ("cubic", ZonalKind::Cubic)], line)?
                }
                ("zonal", "gamma_u") => z.gamma_u = parse_num(value, key, line)?,
                ("zonal", "f") => z.f = parse_num(value, key, line)?,
                ("zonal", "a") => z.a = parse_num(value, key, line)?,
                ("zonal", "b") => z.b = parse_num(value, key, line)?,
                ("zonal", "c") => z.c = parse_num(value, key, line)?,
                ("zonal", "A") => z.cam_a = parse_num(value, key, line)?,
                ("zonal", "B") => z.cam_b = parse_num(value, key, line)?,
                ("zonal", "sigma_u") => z.sigma_u = parse_num(value, key, line)?,
                ("shear", "kind") => {
                    sh.kind = parse_kind(
                        value,
                        &[
                            ("random", ShearKind::Random),
                            ("advective", ShearKind::Advective),
                            ("qg", ShearKind::Qg),
                        ],
                        line,
                    )?
                }
                ("shear", "d_v") => sh.d_v = parse_num(value, key, line)?,
                ("shear", "nu") => sh.nu = parse_num(value, key, line)?,
                ("shear", "c_wave") => sh.c_wave = parse_num(value, key, line)?,
                ("shear", "beta") => sh.beta = parse_num(value, key, line)?,
                ("shear", "F") => sh.f_deform = parse_num(value, key, line)?,
                ("spectrum", "kind") => {
                    sp.kind = parse_kind(
                        value,
                        &[
                            ("equipartition", SpectrumKind::Equipartition),
                            ("kolmogorov", SpectrumKind::Kolmogorov),
                            ("combined", SpectrumKind::Combined),
                        ],
                        line,
                    )?
                }
                ("spectrum", "E0") => sp.e0 = parse_num(value, key, line)?,
                ("spectrum", "k0") => sp.k0 = parse_num(value, key, line)?,
                ("spectrum", "normalize_total") => sp.normalize_total = parse_num(value, key, line)?,
                ("tracer", "alpha") => tr.alpha = parse_num(value, key, line)?,
                ("tracer", "d_T") => tr.d_t = parse_num(value, key, line)?,
                ("tracer", "kappa") => tr.kappa = parse_num(value, key, line)?,
                ("run", "kmax") => cfg.kmax = parse_num(value, key, line)?,
                ("run", "epsilon") => cfg.epsilon = parse_num(value, key, line)?,
                ("run", "dt") => cfg.dt = parse_num(value, key, line)?,
                ("run", "t_end") => cfg.t_end = parse_num(value, key, line)?,
                ("run", "t_burnin") => cfg.t_burnin = Some(parse_num(value, key, line)?),
                ("run", "subsample") => cfg.subsample = parse_num(value, key, line)?,
                ("run", "seed") => cfg.seed = parse_num(value, key, line)?,
                ("run", "n_ensemble") => cfg.n_ensemble = parse_num(value, key, line)?,
                ("run", "x_grid_n") => cfg.x_grid_n = parse_num(value, key, line)?,
                ("", _) => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("key '{key}' outside of a section"),
                    })
                }
                (s, k) => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key '{k}' in [{s}]"),
                    })
                }
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let z = &self.zonal;
        let kind = match z.kind {
            ZonalKind::Linear => "Linear",
            ZonalKind::Cubic => "Cubic",
        };
        writeln!(s, "[zonal]\nkind = {kind}").unwrap();
        writeln!(s, "gamma_u = {}\nf = {}\na = {}\nb = {}\nc = {}", z.gamma_u, z.f, z.a, z.b, z.c).unwrap();
        writeln!(s, "A = {}\nB = {}\nsigma_u = {}\n", z.cam_a, z.cam_b, z.sigma_u).unwrap();

        let sh = &self.shear;
        let kind = match sh.kind {
            ShearKind::Random => "Random",
            ShearKind::Advective => "Advective",
            ShearKind::Qg => "QG",
        };
        writeln!(s, "[shear]\nkind = {kind}").unwrap();
        writeln!(
            s,
            "d_v = {}\nnu = {}\nc_wave = {}\nbeta = {}\nF = {}\n",
            sh.d_v, sh.nu, sh.c_wave, sh.beta, sh.f_deform
        )
        .unwrap();

        let sp = &self.spectrum;
        let kind = match sp.kind {
            SpectrumKind::Equipartition => "Equipartition",
            SpectrumKind::Kolmogorov => "Kolmogorov",
            SpectrumKind::Combined => "Combined",
        };
        writeln!(s, "[spectrum]\nkind = {kind}").unwrap();
        writeln!(s, "E0 = {}\nk0 = {}\nnormalize_total = {}\n", sp.e0, sp.k0, sp.normalize_total).unwrap();

        let tr = &self.tracer;
        writeln!(s, "[tracer]\nalpha = {}\nd_T = {}\nkappa = {}\n", tr.alpha, tr.d_t, tr.kappa).unwrap();

        writeln!(s, "[run]\nkmax = {}\nepsilon = {}\ndt = {}\nt_end = {}", self.kmax, self.epsilon, self.dt, self.t_end)
            .unwrap();
        if let Some(tb) = self.t_burnin {
            writeln!(s, "t_burnin = {tb}").unwrap();
        }
        writeln!(
            s,
            "subsample = {}\nseed = {}\nn_ensemble = {}\nx_grid_n = {}",
            self.subsample, self.seed, self.n_ensemble, self.x_grid_n
        )
        .unwrap();
        out.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qg_section5() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn cubic_with_zero_c_is_rejected() {
        let mut cfg = qg_section5();
        cfg.zonal = ZonalSpec::cubic(2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let report = validate_config(&cfg);
        assert!(report.errors.iter().any(|e| e == "cubic damping must be positive"));
    }

    #[test]
    fn section5_qg_parameters_validate() {
        let mut cfg = qg_section5();
        cfg.shear.f_deform = 2.5;
        cfg.shear.beta = 8.91;
        cfg.shear.d_v = 0.6;
        let report = validate_config(&cfg);
        assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn negative_linear_damping_is_rejected() {
        let mut cfg = qg_section5();
        cfg.zonal = ZonalSpec::linear(-1.0, 0.0, 1.0);
        assert!(!validate_config(&cfg).is_ok());
    }

    #[test]
    fn kmax_zero_and_bad_epsilon_are_rejected() {
        let mut cfg = qg_section5();
        cfg.kmax = 0;
        cfg.epsilon = 1.5;
        let report = validate_config(&cfg);
        assert!(report.errors.iter().any(|e| e.contains("kmax")));
        assert!(report.errors.iter().any(|e| e.contains("epsilon")));
    }

    #[test]
    fn cubic_without_any_noise_is_rejected() {
        let mut cfg = qg_section5();
        cfg.zonal = ZonalSpec::cubic(2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(!validate_config(&cfg).is_ok());
    }

    #[test]
    fn coarse_dt_is_only_a_warning() {
        let mut cfg = qg_section5();
        cfg.dt = 0.5;
        cfg.t_end = 1000.0;
        let report = validate_config(&cfg);
        assert!(report.is_ok());
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn mode_table_values() {
        let cfg = qg_section5();
        let table = build_mode_table(&cfg).unwrap();
        let m = &table.modes()[0];
        assert_eq!(m.k, 1);
        assert!((m.a - 1.5).abs() < 1e-15);
        assert!((m.b - 2.545_714_285_714_286).abs() < 1e-12);

        let mut random = qg_section5();
        random.shear.kind = ShearKind::Random;
        random.kmax = 4;
        for m in build_mode_table(&random).unwrap().modes() {
            assert_eq!((m.a, m.b), (0.0, 0.0));
        }
    }

    #[test]
    fn gamma_v_at_k2() {
        let sh = ShearSpec {
            d_v: 0.6,
            nu: 0.1,
            ..ShearSpec::default()
        };
        assert!((sh.gamma_v(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_sections_and_defaults() {
        let text = "\
# comment
[zonal]
kind = Cubic
a = 2
c = 1
B = 2.5
[shear]
kind = QG
F = 2.5
[run]
kmax = 5
t_burnin = 3
";
        let cfg: ExperimentConfig = text.parse().unwrap();
        assert_eq!(cfg.zonal.kind, ZonalKind::Cubic);
        assert_eq!(cfg.zonal.cam_b, 2.5);
        assert_eq!(cfg.kmax, 5);
        assert_eq!(cfg.t_burnin, Some(3.0));
        assert_eq!(cfg.tracer.d_t, 0.1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = "[zonal]\nbogus = 1\n".parse::<ExperimentConfig>().unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 2,
                msg: "unknown key 'bogus' in [zonal]".into()
            }
        );
        assert!("kmax = 3".parse::<ExperimentConfig>().is_err());
        assert!("[run]\nkmax = x".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn default_burnin_uses_slowest_shear_mode() {
        let cfg = qg_section5();
        assert!((cfg.burnin() - 10.0 / 0.7).abs() < 1e-12);
    }
}
