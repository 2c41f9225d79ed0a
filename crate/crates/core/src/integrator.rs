//! Time integration of the rescaled multiscale system and the quadrature
//! oracles for the tracer's exact solution and conditional variance.
//!
//! Time is the slow time: the zonal flow and the shear damping/forcing run
//! at unit rate, while every frequency in the shear and all tracer terms
//! carry a factor `1/epsilon`. The zonal flow is stepped by Euler-Maruyama;
//! shear and tracer modes by an exponential integrator with the coefficients
//! frozen at the start-of-step `u`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{build_mode_table, validate_config, ExperimentConfig, ZonalSpec};
use crate::error::{Error, Result};
use crate::rng::{complex_normal, normal, trajectory_rng};
use crate::shear::{ModeCoefficients, ModeTable};
use crate::statistics::CrossingCounter;
use crate::zonal::step_euler_maruyama;

/// How the shear forcing increment is scaled in the exponential update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScheme {
    /// Exact frozen-coefficient OU variance `sigma^2 (1 - e^{-2 gamma dt}) / (2 gamma)`.
    #[default]
    ExactOu,
    /// `sigma sqrt(dt e^{lambda dt})` with the principal complex square root.
    ComplexRoot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub u: f64,
    pub v_modes: Vec<Complex64>,
    pub t_modes: Vec<Complex64>,
}

impl SystemState {
    pub fn zero(n_modes: usize) -> Self {
        Self {
            t: 0.0,
            u: 0.0,
            v_modes: vec![Complex64::new(0.0, 0.0); n_modes],
            t_modes: vec![Complex64::new(0.0, 0.0); n_modes],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.v_modes.iter().all(|z| z.is_finite())
            && self.t_modes.iter().all(|z| z.is_finite())
    }
}

/// Random inputs of one step: the zonal pair `(xi1, xi2)` and one unit
/// circular complex normal `(b1 + i b2)/sqrt(2)` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDraws {
    pub zonal: [f64; 2],
    pub shear: Vec<Complex64>,
}

impl StepDraws {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            zonal: [0.0; 2],
            shear: vec![Complex64::new(0.0, 0.0); n_modes],
        }
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.zonal = [normal(rng), normal(rng)];
        for z in &mut self.shear {
            *z = complex_normal(rng);
        }
    }
}

/// Per-mode constants of the exponential update for a fixed `dt`.
#[derive(Debug, Clone, Copy)]
pub struct ModeStepper {
    coef: ModeCoefficients,
    inv_eps: f64,
    dt: f64,
    v_decay: f64,
    t_decay: f64,
    noise_std: f64,
    forcing: f64,
    scheme: NoiseScheme,
}

impl ModeStepper {
    pub fn new(coef: ModeCoefficients, alpha: f64, epsilon: f64, dt: f64, scheme: NoiseScheme) -> Self {
        let inv_eps = 1.0 / epsilon;
        let g = coef.gamma_v;
        let noise_std = match scheme {
            NoiseScheme::ExactOu => coef.sigma_v * (-(-2.0 * g * dt).exp_m1() / (2.0 * g)).sqrt(),
            NoiseScheme::ComplexRoot => coef.sigma_v * dt.sqrt(),
        };
        Self {
            coef,
            inv_eps,
            dt,
            v_decay: (-g * dt).exp(),
            t_decay: (-inv_eps * coef.gamma_t * dt).exp(),
            noise_std,
            forcing: inv_eps * alpha * dt,
            scheme,
        }
    }

    /// Advances `(v, T)` one step with frozen zonal speed `u`; `noise` is a
    /// unit circular complex normal.
    #[inline]
    pub fn step(&self, u: f64, v: Complex64, tracer: Complex64, noise: Complex64) -> (Complex64, Complex64) {
        let phase_v = self.inv_eps * self.coef.omega_v(u) * self.dt;
        let prop_v = Complex64::from_polar(self.v_decay, phase_v);
        let phase_t = self.inv_eps * self.coef.omega_t(u) * self.dt;
        let prop_t = Complex64::from_polar(self.t_decay, phase_t);
        let eta = match self.scheme {
            NoiseScheme::ExactOu => noise * self.noise_std,
            NoiseScheme::ComplexRoot => noise * self.noise_std * prop_v.sqrt(),
        };
        let v_next = prop_v * v + eta;
        let t_next = prop_t * (tracer - self.forcing * v);
        (v_next, t_next)
    }
}

/// Immutable model for stepping the full system.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub zonal: ZonalSpec,
    pub epsilon: f64,
    pub dt: f64,
    steppers: Vec<ModeStepper>,
}

impl SystemModel {
    pub fn new(table: &ModeTable, zonal: ZonalSpec, alpha: f64, epsilon: f64, dt: f64, scheme: NoiseScheme) -> Self {
        Self {
            zonal,
            epsilon,
            dt,
            steppers: table
                .iter()
                .map(|c| ModeStepper::new(*c, alpha, epsilon, dt, scheme))
                .collect(),
        }
    }

    pub fn from_config(cfg: &ExperimentConfig, scheme: NoiseScheme) -> Result<Self> {
        let table = build_mode_table(cfg)?;
        Ok(Self::new(&table, cfg.zonal, cfg.tracer.alpha, cfg.epsilon, cfg.dt, scheme))
    }

    pub fn n_modes(&self) -> usize {
        self.steppers.len()
    }

    pub fn steppers(&self) -> &[ModeStepper] {
        &self.steppers
    }
}

/// One step of the coupled system. All modes see the start-of-step `u`.
pub fn step_system(state: &mut SystemState, model: &SystemModel, draws: &StepDraws) {
    let u = state.u;
    for (i, stepper) in model.steppers.iter().enumerate() {
        let (v, t) = stepper.step(u, state.v_modes[i], state.t_modes[i], draws.shear[i]);
        state.v_modes[i] = v;
        state.t_modes[i] = t;
    }
    state.u = step_euler_maruyama(&model.zonal, u, model.dt, draws.zonal[0], draws.zonal[1]);
    state.t += model.dt;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCrossings {
    pub k: i32,
    pub u_res: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub crossings: Vec<ModeCrossings>,
    pub config_hash: String,
}

/// Identifier of a run: SHA-256 of the canonical config text, seed and
/// trajectory index (first 16 hex digits).
pub fn config_hash(cfg: &ExperimentConfig, seed: u64, trajectory: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.to_string().as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(trajectory.to_le_bytes());
    let digest = hasher.finalize();
    let mut s = String::with_capacity(16);
    for byte in &digest[..8] {
        write!(s, "{byte:02x}").unwrap();
    }
    s
}

/// Integrates one trajectory from zero initial conditions and hands every
/// recorded post-burn-in state to `observe`. Returns per-mode crossing counts
/// of `u` through each resonant speed, taken between recorded samples.
pub fn simulate_with<F>(
    cfg: &ExperimentConfig,
    seed: u64,
    trajectory: u64,
    scheme: NoiseScheme,
    mut observe: F,
) -> Result<Vec<ModeCrossings>>
where
    F: FnMut(&SystemState),
{
    validate_config(cfg).into_result()?;
    let table = build_mode_table(cfg)?;
    let model = SystemModel::new(&table, cfg.zonal, cfg.tracer.alpha, cfg.epsilon, cfg.dt, scheme);
    let mut rng = trajectory_rng(seed, trajectory);
    let mut state = SystemState::zero(table.len());
    let mut draws = StepDraws::zeros(table.len());
    let mut counters: Vec<CrossingCounter> = table
        .iter()
        .map(|m| CrossingCounter::new(m.u_res.unwrap_or(f64::NAN)))
        .collect();

    let n_steps = cfg.n_steps();
    let burnin = cfg.burnin();
    let subsample = u64::from(cfg.subsample);
    // record step n when n*dt >= burnin (with a small tolerance for rounding)
    let first_recorded = ((burnin / cfg.dt) - 1e-9).ceil().max(0.0) as u64;
    for n in 0..=n_steps {
        if n > 0 {
            draws.fill(&mut rng);
            step_system(&mut state, &model, &draws);
            state.t = n as f64 * cfg.dt;
        }
        if n >= first_recorded && n % subsample == 0 {
            if !state.is_finite() {
                return Err(Error::NonFinite { step: n });
            }
            for c in &mut counters {
                c.push(state.u);
            }
            observe(&state);
        }
    }
    Ok(table
        .iter()
        .zip(&counters)
        .map(|(m, c)| ModeCrossings {
            k: m.k,
            u_res: m.u_res,
            count: c.count(),
        })
        .collect())
}

/// Integrates one trajectory and keeps every recorded state.
pub fn simulate(cfg: &ExperimentConfig, seed: u64, scheme: NoiseScheme) -> Result<TrajectoryRecord> {
    simulate_trajectory(cfg, seed, 0, scheme)
}

pub fn simulate_trajectory(
    cfg: &ExperimentConfig,
    seed: u64,
    trajectory: u64,
    scheme: NoiseScheme,
) -> Result<TrajectoryRecord> {
    let mut states = Vec::new();
    let crossings = simulate_with(cfg, seed, trajectory, scheme, |s| states.push(s.clone()))?;
    Ok(TrajectoryRecord {
        times: states.iter().map(|s| s.t).collect(),
        states,
        crossings,
        config_hash: config_hash(cfg, seed, trajectory),
    })
}

/// Runs `cfg.n_ensemble` independent trajectories in parallel, each reduced
/// by `reduce` as it runs. Results are ordered by trajectory index.
pub fn simulate_ensemble<T, F, G>(cfg: &ExperimentConfig, seed: u64, scheme: NoiseScheme, init: F, reduce: G) -> Result<Vec<(T, Vec<ModeCrossings>)>>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
    G: Fn(&mut T, &SystemState) + Sync,
{
    (0..u64::from(cfg.n_ensemble))
        .into_par_iter()
        .map(|j| {
            let mut acc = init(j);
            let crossings = simulate_with(cfg, seed, j, scheme, |s| reduce(&mut acc, s))?;
            Ok((acc, crossings))
        })
        .collect()
}

/// A scalar path sampled on the uniform grid `t_j = j dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(dt: f64, values: Vec<f64>) -> Self {
        Self { dt, values }
    }

    pub fn constant(value: f64, dt: f64, t: f64) -> Self {
        let n = (t / dt).round() as usize;
        Self::new(dt, vec![value; n + 1])
    }

    pub fn from_fn(dt: f64, t: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = (t / dt).round() as usize;
        Self::new(dt, (0..=n).map(|j| f(j as f64 * dt)).collect())
    }

    pub fn support(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Number of grid intervals covering `[0, t]`.
    fn intervals_to(&self, t: f64) -> Result<usize> {
        let n = (t / self.dt).round() as usize;
        if t > self.support() * (1.0 + 1e-12) || n + 1 > self.values.len() {
            return Err(Error::PathMismatch(format!(
                "t = {t} exceeds path support {}",
                self.support()
            )));
        }
        if ((n as f64) * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::PathMismatch(format!("t = {t} is not on the path grid")));
        }
        Ok(n)
    }

    /// Running trapezoid integral `int_0^{t_j} g(u_s) ds` for each grid point.
    fn cumulative(&self, n: usize, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut prev = g(self.values[0]);
        out.push(0.0);
        for j in 1..=n {
            let cur = g(self.values[j]);
            acc += 0.5 * self.dt * (prev + cur);
            out.push(acc);
            prev = cur;
        }
        out
    }
}

/// Conditional variance `Sigma_{k,t|u}` of the tracer mode given the zonal
/// path, by nested trapezoid quadrature of
/// `eps^-2 alpha^2 sigma^2 int_0^t e^{-2 gamma_v (t-r)} |int_r^t e^{-gamma_R (t-s) + i omega_R[s,t]/eps} ds|^2 dr`
/// with `gamma_R = gamma_T/eps - gamma_v`. `epsilon = 1` is the unscaled model.
pub fn conditional_variance_quadrature(
    u_path: &SampledPath,
    coef: &ModeCoefficients,
    alpha: f64,
    epsilon: f64,
    t: f64,
) -> Result<f64> {
    let n = u_path.intervals_to(t)?;
    if alpha == 0.0 || coef.sigma_v == 0.0 || n == 0 {
        return Ok(0.0);
    }
    let h = u_path.dt;
    let inv_eps = 1.0 / epsilon;
    let gamma_r = inv_eps * coef.gamma_t - coef.gamma_v;
    let w = u_path.cumulative(n, |u| coef.omega_r(u));
    let total = w[n];
    let g = |j: usize| {
        let lag = t - j as f64 * h;
        Complex64::from_polar((-gamma_r * lag).exp(), inv_eps * (total - w[j]))
    };
    // inner integral from r_j to t, accumulated backwards
    let mut inner = Complex64::new(0.0, 0.0);
    let mut g_next = g(n);
    let mut outer = 0.0;
    let mut f_next = 0.0; // integrand at r = t: |I(t)|^2 = 0
    for j in (0..n).rev() {
        let g_j = g(j);
        inner += 0.5 * h * (g_j + g_next);
        let f_j = (-2.0 * coef.gamma_v * (t - j as f64 * h)).exp() * inner.norm_sqr();
        outer += 0.5 * h * (f_j + f_next);
        f_next = f_j;
        g_next = g_j;
    }
    Ok(inv_eps * inv_eps * alpha * alpha * coef.sigma_v * coef.sigma_v * outer)
}

/// Long-time upper bound
/// `(alpha^2 sigma_v^2 / gamma_R^2) (1/(2 gamma_v) + 1/(2 gamma_T))`, unscaled model.
pub fn conditional_variance_bound(coef: &ModeCoefficients, alpha: f64) -> Result<f64> {
    let gamma_r = coef.gamma_r();
    if gamma_r == 0.0 {
        return Err(Error::BoundDegenerate);
    }
    let s2 = coef.sigma_v * coef.sigma_v;
    Ok(alpha * alpha * s2 / (gamma_r * gamma_r) * (0.5 / coef.gamma_v + 0.5 / coef.gamma_t))
}

/// Tracer mode at time `t` from its exact double-integral representation,
/// evaluated against the supplied complex Brownian increments
/// (`increments[j]` spans `[t_j, t_{j+1}]`, `E|dB|^2 = dt`). Zero initial
/// conditions. Test oracle for the time stepper.
pub fn exact_tracer_oracle(
    u_path: &SampledPath,
    increments: &[Complex64],
    coef: &ModeCoefficients,
    alpha: f64,
    epsilon: f64,
    t: f64,
) -> Result<Complex64> {
    let n = u_path.intervals_to(t)?;
    if increments.len() != n {
        return Err(Error::PathMismatch(format!(
            "{} increments for {n} path intervals",
            increments.len()
        )));
    }
    let h = u_path.dt;
    let inv_eps = 1.0 / epsilon;
    let wt = u_path.cumulative(n, |u| coef.omega_t(u));
    let wv = u_path.cumulative(n, |u| coef.omega_v(u));
    // G_j: tracer kernel from s = t_j to t
    let g = |j: usize| {
        let lag = t - j as f64 * h;
        Complex64::from_polar((-inv_eps * coef.gamma_t * lag).exp(), inv_eps * (wt[n] - wt[j]))
    };
    // K_j = int_{t_j}^t exp(-gamma_T (t-s)/eps - gamma_v (s - t_j) + i (omega_T[s,t] + omega_v[t_j,s])/eps) ds
    let mut k_next = Complex64::new(0.0, 0.0);
    let mut g_next = g(n);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in (0..n).rev() {
        let rho = Complex64::from_polar((-coef.gamma_v * h).exp(), inv_eps * (wv[j + 1] - wv[j]));
        let g_j = g(j);
        let k_j = rho * k_next + 0.5 * h * (g_j + rho * g_next);
        sum += 0.5 * (k_j + k_next) * increments[j];
        k_next = k_j;
        g_next = g_j;
    }
    Ok(-inv_eps * alpha * coef.sigma_v * sum)
}
