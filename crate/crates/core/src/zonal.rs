//! Zonal cross-sweep `u_t`: drift, Euler-Maruyama stepping, stationary
//! densities for the OU, gradient and CAM cases, and the deterministic
//! regime structure of the cubic drift.

use std::f64::consts::PI;

use crate::config::{ZonalKind, ZonalSpec};
use crate::error::{Error, Result};

/// Below this |B| the closed-form CAM density loses too many digits to
/// cancellation between its O(B^-4) terms; the exponent is then integrated
/// numerically from `2 drift / D`.
const CAM_CLOSED_FORM_MIN_B: f64 = 0.05;
const TAIL_MASS_TOL: f64 = 1e-8;
const MAX_EXTENSIONS: usize = 40;
pub const DEFAULT_GRID_POINTS: usize = 4001;
pub const DEFAULT_GRID_HALF_WIDTH_SD: f64 = 10.0;

pub fn drift(spec: &ZonalSpec, u: f64) -> f64 {
    match spec.kind {
        ZonalKind::Linear => -spec.gamma_u * u + spec.f,
        ZonalKind::Cubic => spec.f + u * (spec.a + u * (spec.b - spec.c * u)),
    }
}

/// Derivative of the drift with respect to `u`.
pub fn drift_slope(spec: &ZonalSpec, u: f64) -> f64 {
    match spec.kind {
        ZonalKind::Linear => -spec.gamma_u,
        ZonalKind::Cubic => spec.a + 2.0 * spec.b * u - 3.0 * spec.c * u * u,
    }
}

/// Total noise variance rate `(A - B u)^2 + sigma_u^2`.
pub fn diffusion(spec: &ZonalSpec, u: f64) -> f64 {
    match spec.kind {
        ZonalKind::Linear => spec.sigma_u * spec.sigma_u,
        ZonalKind::Cubic => {
            let m = spec.cam_a - spec.cam_b * u;
            m * m + spec.sigma_u * spec.sigma_u
        }
    }
}

/// One Euler-Maruyama step with independent standard normals `xi1`
/// (additive) and `xi2` (CAM, ignored for the linear model).
pub fn step_euler_maruyama(spec: &ZonalSpec, u: f64, dt: f64, xi1: f64, xi2: f64) -> f64 {
    let sq = dt.sqrt();
    let mut next = u + drift(spec, u) * dt + spec.sigma_u * sq * xi1;
    if spec.kind == ZonalKind::Cubic {
        next += (spec.cam_a - spec.cam_b * u) * sq * xi2;
    }
    next
}

/// Stationary `(mean, variance)` of the forced OU process.
pub fn ou_stationary_stats(gamma_u: f64, sigma_u: f64, f: f64) -> Result<(f64, f64)> {
    if !(gamma_u > 0.0) {
        return Err(Error::InvalidConfig("linear zonal damping gamma_u must be positive".into()));
    }
    Ok((f / gamma_u, sigma_u * sigma_u / (2.0 * gamma_u)))
}

/// Gradient potential `V(x) = -f x - a x^2/2 - b x^3/3 + c x^4/4`.
pub fn potential(spec: &ZonalSpec, x: f64) -> Result<f64> {
    if spec.kind != ZonalKind::Cubic || spec.cam_a != 0.0 || spec.cam_b != 0.0 {
        return Err(Error::NotGradient);
    }
    let x2 = x * x;
    Ok(-spec.f * x - 0.5 * spec.a * x2 - spec.b * x2 * x / 3.0 + 0.25 * spec.c * x2 * x2)
}

/// Exponent coefficients of the CAM equilibrium density
/// `N0 D^-a1 exp(d atan((Bx - A)/sigma)) exp((-c1 x^2 + b1 x)/B^4)`,
/// `D = (Bx - A)^2 + sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CamCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn cam_coefficients(spec: &ZonalSpec) -> Result<CamCoefficients> {
    let (a, b, c, f) = (spec.a, spec.b, spec.c, spec.f);
    let (ca, cb, s) = (spec.cam_a, spec.cam_b, spec.sigma_u);
    if cb == 0.0 {
        return Err(Error::NotIntegrable("CAM coefficients need B != 0".into()));
    }
    if !(s > 0.0) {
        return Err(Error::NotIntegrable("CAM density requires sigma_u > 0".into()));
    }
    let b4 = cb.powi(4);
    let a1 = 1.0 - (-3.0 * ca * ca * c + a * cb * cb + 2.0 * ca * b * cb + c * s * s) / b4;
    let b1 = 2.0 * b * cb * cb - 4.0 * c * ca * cb;
    let c1 = c * cb * cb;
    let d1 = 2.0 * (ca * ca * b * cb - ca.powi(3) * c + ca * a * cb * cb + cb.powi(3) * f) / b4;
    let d2 = 2.0 * (3.0 * c * ca - b * cb) / b4;
    Ok(CamCoefficients {
        a1,
        b1,
        c1,
        d: d1 / s + d2 * s,
        d1,
        d2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZonalPdfKind {
    Gaussian,
    GradientPotential,
    CamGeneral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZonalStationaryPdf {
    pub kind: ZonalPdfKind,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub warnings: Vec<String>,
}

impl ZonalStationaryPdf {
    /// Trapezoid integral of `density * g(u)`.
    pub fn expectation(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.grid.iter().zip(&self.density).map(|(&u, &p)| p * g(u)).collect();
        trapezoid(&self.grid, &vals)
    }

    /// Probability mass below `u` (trapezoid, linear within cells).
    pub fn cdf(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.grid.len() {
            let (x0, x1) = (self.grid[i - 1], self.grid[i]);
            if u <= x0 {
                break;
            }
            let (p0, p1) = (self.density[i - 1], self.density[i]);
            if u >= x1 {
                acc += 0.5 * (p0 + p1) * (x1 - x0);
            } else {
                let pu = p0 + (p1 - p0) * (u - x0) / (x1 - x0);
                acc += 0.5 * (p0 + pu) * (u - x0);
                break;
            }
        }
        acc.clamp(0.0, 1.0)
    }

    /// Trapezoid weights `w_i` with `sum_i w_i g(u_i)` approximating `E[g(u)]`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut w = vec![0.0; n];
        for i in 1..n {
            let h = 0.5 * (self.grid[i] - self.grid[i - 1]);
            w[i - 1] += h * self.density[i - 1];
            w[i] += h * self.density[i];
        }
        w
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (ys[0] + ys[1]) * (xs[1] - xs[0]))
        .sum()
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("need at least 3 points".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Unnormalized log-density evaluated on a whole (sorted) grid.
enum LogDensity {
    Gaussian { mean: f64, var: f64 },
    Gradient { spec: ZonalSpec, sigma2: f64 },
    CamClosed { spec: ZonalSpec, coef: CamCoefficients },
    CamIntegrated { spec: ZonalSpec },
}

impl LogDensity {
    fn for_spec(spec: &ZonalSpec) -> Result<(ZonalPdfKind, Self)> {
        match spec.kind {
            ZonalKind::Linear => {
                let (mean, var) = ou_stationary_stats(spec.gamma_u, spec.sigma_u, spec.f)?;
                if !(var > 0.0) {
                    return Err(Error::NotIntegrable("zero noise: stationary law is a point mass".into()));
                }
                Ok((ZonalPdfKind::Gaussian, LogDensity::Gaussian { mean, var }))
            }
            ZonalKind::Cubic => {
                if !(spec.c > 0.0) {
                    return Err(Error::NotIntegrable("cubic damping c must be positive".into()));
                }
                if spec.is_gradient() {
                    if !(spec.sigma_u > 0.0) {
                        return Err(Error::NotIntegrable("zero noise: stationary law is a point mass".into()));
                    }
                    Ok((
                        ZonalPdfKind::GradientPotential,
                        LogDensity::Gradient {
                            spec: *spec,
                            sigma2: spec.sigma_u * spec.sigma_u,
                        },
                    ))
                } else if !(spec.sigma_u > 0.0) {
                    Err(Error::NotIntegrable("CAM density requires sigma_u > 0".into()))
                } else if spec.cam_b.abs() >= CAM_CLOSED_FORM_MIN_B {
                    Ok((
                        ZonalPdfKind::CamGeneral,
                        LogDensity::CamClosed {
                            spec: *spec,
                            coef: cam_coefficients(spec)?,
                        },
                    ))
                } else {
                    Ok((ZonalPdfKind::CamGeneral, LogDensity::CamIntegrated { spec: *spec }))
                }
            }
        }
    }

    fn eval(&self, grid: &[f64]) -> Vec<f64> {
        match self {
            LogDensity::Gaussian { mean, var } => grid.iter().map(|&x| -(x - mean).powi(2) / (2.0 * var)).collect(),
            LogDensity::Gradient { spec, sigma2 } => grid
                .iter()
                .map(|&x| -2.0 * potential(spec, x).expect("gradient spec") / sigma2)
                .collect(),
            LogDensity::CamClosed { spec, coef } => grid.iter().map(|&x| cam_log_density(spec, coef, x)).collect(),
            LogDensity::CamIntegrated { spec } => integrated_log_density(spec, grid),
        }
    }
}

/// Closed-form CAM log-density, up to the normalization constant.
pub fn cam_log_density(spec: &ZonalSpec, coef: &CamCoefficients, x: f64) -> f64 {
    let y = spec.cam_b * x - spec.cam_a;
    let dd = y * y + spec.sigma_u * spec.sigma_u;
    -coef.a1 * dd.ln() + coef.d * (y / spec.sigma_u).atan() + (-coef.c1 * x * x + coef.b1 * x) / spec.cam_b.powi(4)
}

// 8-point Gauss-Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre(x0: f64, x1: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (x0 + x1);
    let half = 0.5 * (x1 - x0);
    let mut acc = 0.0;
    for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * (g(mid - half * node) + g(mid + half * node));
    }
    acc * half
}

/// Solves the zero-flux condition `drift p = (D p)' / 2` directly:
/// `log p = -ln D + int 2 drift / D`. Used where the closed form is
/// ill-conditioned.
pub fn integrated_log_density(spec: &ZonalSpec, grid: &[f64]) -> Vec<f64> {
    let integrand = |x: f64| 2.0 * drift(spec, x) / diffusion(spec, x);
    // start from the grid point nearest the origin to keep magnitudes small
    let start = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut phi = vec![0.0; grid.len()];
    for i in start + 1..grid.len() {
        phi[i] = phi[i - 1] + gauss_legendre(grid[i - 1], grid[i], integrand);
    }
    for i in (0..start).rev() {
        phi[i] = phi[i + 1] - gauss_legendre(grid[i], grid[i + 1], integrand);
    }
    grid.iter().zip(phi).map(|(&x, p)| p - diffusion(spec, x).ln()).collect()
}

/// Normalized stationary density of `u` on `grid`.
///
/// The grid is extended symmetrically at both ends (with the end spacings)
/// until the mass added by an extension falls below 1e-8; the returned
/// grid includes any extension.
pub fn stationary_pdf(spec: &ZonalSpec, grid: &[f64]) -> Result<ZonalStationaryPdf> {
    validate_grid(grid)?;
    let (kind, logp) = LogDensity::for_spec(spec)?;
    let n = grid.len();
    let chunk = (n / 10).max(16);
    let h_lo = grid[1] - grid[0];
    let h_hi = grid[n - 1] - grid[n - 2];

    let mut ext: Vec<f64> = grid.to_vec();
    let mut added = 0usize;
    let (mut lo_tail, mut hi_tail);
    let mut extensions = 0;
    loop {
        let lp = logp.eval(&ext);
        let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NotIntegrable("log-density is not finite on the grid".into()));
        }
        let dens: Vec<f64> = lp.iter().map(|&l| (l - max).exp()).collect();
        let total = trapezoid(&ext, &dens);
        let m = ext.len();
        // mass in the outermost `chunk` cells on each side (or in the end cell
        // before any extension)
        let w = if added == 0 { 1 } else { chunk };
        lo_tail = trapezoid(&ext[..=w], &dens[..=w]) / total;
        hi_tail = trapezoid(&ext[m - 1 - w..], &dens[m - 1 - w..]) / total;
        if lo_tail.max(hi_tail) < TAIL_MASS_TOL {
            let density: Vec<f64> = dens.iter().map(|d| d / total).collect();
            let mean = trapezoid(&ext, &ext.iter().zip(&density).map(|(x, p)| x * p).collect::<Vec<_>>());
            let var = trapezoid(
                &ext,
                &ext.iter().zip(&density).map(|(x, p)| (x - mean).powi(2) * p).collect::<Vec<_>>(),
            );
            let mut warnings = Vec::new();
            let span = grid[n - 1] - grid[0];
            if span < 8.0 * var.sqrt() {
                warnings.push(format!(
                    "grid span {span:.4} covers fewer than 8 standard deviations ({:.4})",
                    var.sqrt()
                ));
            }
            if added > 0 {
                warnings.push(format!("grid extended by {added} points on each side"));
            }
            return Ok(ZonalStationaryPdf {
                kind,
                grid: ext,
                density,
                mean,
                variance: var,
                warnings,
            });
        }
        extensions += 1;
        if extensions > MAX_EXTENSIONS {
            return Err(Error::NotIntegrable(format!(
                "tail mass does not decay (lower {lo_tail:.3e}, upper {hi_tail:.3e})"
            )));
        }
        let first = ext[0];
        let last = ext[ext.len() - 1];
        let mut lower: Vec<f64> = (1..=chunk).rev().map(|j| first - j as f64 * h_lo).collect();
        lower.extend_from_slice(&ext);
        lower.extend((1..=chunk).map(|j| last + j as f64 * h_hi));
        ext = lower;
        added += chunk;
    }
}

/// Uniform grid of `n` points over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

/// Default grid: 4001 points over mean +- 10 bulk standard deviations. For
/// the nonlinear kinds the moments come from a pilot density on a wide grid.
pub fn default_grid(spec: &ZonalSpec) -> Result<Vec<f64>> {
    let (mean, sd) = match spec.kind {
        ZonalKind::Linear => {
            let (m, v) = ou_stationary_stats(spec.gamma_u, spec.sigma_u, spec.f)?;
            (m, v.sqrt())
        }
        ZonalKind::Cubic => {
            let c = spec.c.max(f64::MIN_POSITIVE);
            let root_bound = 1.0 + (spec.a.abs() + spec.b.abs() + spec.f.abs()) / c;
            let noise = spec.sigma_u + spec.cam_a.abs() + spec.cam_b.abs();
            let half = 4.0 * (root_bound + noise);
            let pilot = stationary_pdf(spec, &linspace(-half, half, 20_001))?;
            (pilot.mean, pilot.variance.sqrt())
        }
    };
    if !(sd > 0.0) {
        return Err(Error::NotIntegrable("zero stationary variance".into()));
    }
    let w = DEFAULT_GRID_HALF_WIDTH_SD * sd;
    Ok(linspace(mean - w, mean + w, DEFAULT_GRID_POINTS))
}

/// Rough inverse time scale of the zonal drift, used to sanity-check `dt`.
pub fn drift_rate_scale(spec: &ZonalSpec) -> f64 {
    match spec.kind {
        ZonalKind::Linear => spec.gamma_u.abs(),
        ZonalKind::Cubic => {
            if !(spec.c > 0.0) {
                return 0.0;
            }
            let report = classify_regime(spec.a, spec.b, spec.c, spec.f);
            let slope = report
                .map(|r| r.roots.iter().map(|e| drift_slope(spec, e.u).abs()).fold(0.0, f64::max))
                .unwrap_or(0.0);
            slope.max(spec.a.abs()) + spec.cam_b * spec.cam_b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub f: f64,
    pub cubic_discriminant: f64,
    pub n_real_roots: usize,
    pub roots: Vec<Equilibrium>,
    /// `(f_b-, f_b+)`, present when `a > -b^2 / 3c`.
    pub boundary: Option<(f64, f64)>,
}

impl RegimeReport {
    pub fn is_bistable(&self) -> bool {
        self.n_real_roots == 3
    }
}

/// `(p, q, discriminant)` of the monic cubic `x^3 + c2 x^2 + c1 x + c0`
/// whose roots are the equilibria of `f + a x + b x^2 - c x^3`.
pub fn cubic_discriminant(a: f64, b: f64, c: f64, f: f64) -> (f64, f64, f64) {
    let c2 = -b / c;
    let c1 = -a / c;
    let c0 = -f / c;
    let p = c1 - c2 * c2 / 3.0;
    let q = c0 - c2 * c1 / 3.0 + 2.0 * c2.powi(3) / 27.0;
    (p, q, -4.0 * p.powi(3) - 27.0 * q * q)
}

/// Forcings at which two equilibria merge, for `a > a_c = -b^2 / 3c`.
pub fn boundary_forcings(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let inner = a / (3.0 * c) + b * b / (9.0 * c * c);
    if a <= -b * b / (3.0 * c) || inner <= 0.0 {
        return None;
    }
    let centre = -a * b / (3.0 * c) - 2.0 * b.powi(3) / (27.0 * c * c);
    let half = 2.0 * c * inner.powf(1.5);
    Some((centre - half, centre + half))
}

/// Real roots of the depressed cubic `t^3 + p t + q` by the trigonometric /
/// hyperbolic forms, ascending.
fn depressed_cubic_roots(p: f64, q: f64, disc: f64) -> Vec<f64> {
    if disc > 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut r: Vec<f64> = (0..3).map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos()).collect();
        r.sort_by(f64::total_cmp);
        r
    } else if disc < 0.0 {
        let t = if p < 0.0 {
            let arg = (-3.0 * q.abs() / (2.0 * p)) * (-3.0 / p).sqrt();
            -2.0 * q.signum() * (-p / 3.0).sqrt() * (arg.max(1.0).acosh() / 3.0).cosh()
        } else if p > 0.0 {
            let arg = (3.0 * q / (2.0 * p)) * (3.0 / p).sqrt();
            -2.0 * (p / 3.0).sqrt() * (arg.asinh() / 3.0).sinh()
        } else {
            (-q).cbrt()
        };
        vec![t]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let mut r = vec![3.0 * q / p, -3.0 * q / (2.0 * p)];
        r.sort_by(f64::total_cmp);
        r
    }
}

/// Discriminant, equilibria with stability, and the bistability boundary of
/// the deterministic cubic drift.
pub fn classify_regime(a: f64, b: f64, c: f64, f: f64) -> Result<RegimeReport> {
    if !(c > 0.0) {
        return Err(Error::InvalidConfig("cubic damping must be positive".into()));
    }
    let spec = ZonalSpec::cubic(a, b, c, f, 0.0, 0.0, 1.0);
    let (p, q, disc) = cubic_discriminant(a, b, c, f);
    let shift = b / (3.0 * c);
    let roots: Vec<Equilibrium> = depressed_cubic_roots(p, q, disc)
        .into_iter()
        .map(|t| {
            let mut x = t + shift;
            let slope = drift_slope(&spec, x);
            if slope != 0.0 {
                let refined = x - drift(&spec, x) / slope;
                if refined.is_finite() {
                    x = refined;
                }
            }
            let s = drift_slope(&spec, x);
            let stability = if s.abs() < 1e-10 {
                Stability::Marginal
            } else if s < 0.0 {
                Stability::Stable
            } else {
                Stability::Unstable
            };
            Equilibrium { u: x, stability }
        })
        .collect();
    Ok(RegimeReport {
        a,
        b,
        c,
        f,
        cubic_discriminant: disc,
        n_real_roots: roots.len(),
        roots,
        boundary: boundary_forcings(a, b, c),
    })
}
