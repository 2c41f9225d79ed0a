//! Stationary tracer statistics (conditional variances, Gaussian scale
//! mixtures), empirical estimators and resonance diagnostics.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::shear::{ModeCoefficients, ModeTable};
use crate::zonal::{linspace, trapezoid, ZonalStationaryPdf};

/// Long-time conditional variance `alpha^2 E / (gamma_T^2 + omega_R(u)^2)`
/// of mode `k` given a frozen zonal speed, in the scale-separated limit.
pub fn stationary_conditional_variance(coef: &ModeCoefficients, alpha: f64, u: f64) -> f64 {
    let wr = coef.omega_r(u);
    alpha * alpha * coef.e_v / (coef.gamma_t * coef.gamma_t + wr * wr)
}

/// Variance of the real field `T(x)` given `u`: both `+k` and `-k` of every
/// mode contribute, hence the factor 2.
pub fn total_conditional_variance(table: &ModeTable, alpha: f64, u: f64) -> f64 {
    2.0 * table
        .iter()
        .map(|c| stationary_conditional_variance(c, alpha, u))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdfSource {
    AnalyticQuadrature,
    EmpiricalHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPdf {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub source: PdfSource,
    pub n_samples: Option<usize>,
}

impl StationaryPdf {
    pub fn integral(&self) -> f64 {
        match self.source {
            PdfSource::AnalyticQuadrature => trapezoid(&self.grid, &self.density),
            PdfSource::EmpiricalHistogram => {
                let w = bin_width(&self.grid);
                self.density.iter().sum::<f64>() * w
            }
        }
    }

    /// `log10` of the density, floored at the smallest normal double so
    /// that empty bins stay finite.
    pub fn log10_density(&self) -> Vec<f64> {
        self.density.iter().map(|&d| d.max(f64::MIN_POSITIVE).log10()).collect()
    }

    /// Mean and variance by trapezoid quadrature on the grid.
    pub fn mean_variance(&self) -> (f64, f64) {
        let m = self.moment(|x| x);
        (m, self.moment(|x| (x - m) * (x - m)))
    }

    /// Excess kurtosis by quadrature on the grid.
    pub fn excess_kurtosis(&self) -> f64 {
        let (m, v) = self.mean_variance();
        self.moment(|x| (x - m).powi(4)) / (v * v) - 3.0
    }

    fn moment(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.grid.iter().zip(&self.density).map(|(&x, &p)| p * g(x)).collect();
        trapezoid(&self.grid, &vals) / self.integral()
    }
}

fn bin_width(grid: &[f64]) -> f64 {
    if grid.len() > 1 {
        grid[1] - grid[0]
    } else {
        1.0
    }
}

/// Centered Gaussian scale mixture `sum_i w_i N(0, var_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianMixture {
    /// Mixture over the zonal stationary law of `N(0, variance(u))`.
    /// Components with zero weight are dropped.
    pub fn over_zonal(zonal: &ZonalStationaryPdf, variance: impl Fn(f64) -> f64) -> Result<Self> {
        let w = zonal.quadrature_weights();
        let total: f64 = w.iter().sum();
        let mut weights = Vec::with_capacity(w.len());
        let mut variances = Vec::with_capacity(w.len());
        let mut degenerate = 0.0;
        for (&u, &wi) in zonal.grid.iter().zip(&w) {
            if wi <= 0.0 {
                continue;
            }
            let v = variance(u);
            if !(v > 0.0) {
                degenerate += wi;
                continue;
            }
            weights.push(wi / total);
            variances.push(v);
        }
        if weights.is_empty() || degenerate > 1e-12 * total {
            return Err(Error::DegenerateMixture);
        }
        Ok(Self { weights, variances })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(&w, &v)| w * (-0.5 * x * x / v).exp() / (2.0 * PI * v).sqrt())
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.variances)
            .map(|(&w, &v)| w * 0.5 * erfc(-x / (SQRT_2 * v.sqrt())))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.weights.iter().zip(&self.variances).map(|(w, v)| w * v).sum()
    }

    /// `3 E[v^2] / E[v]^2 - 3`, non-negative by Jensen.
    pub fn excess_kurtosis(&self) -> f64 {
        let m2: f64 = self.weights.iter().zip(&self.variances).map(|(w, v)| w * v * v).sum();
        let m1 = self.variance();
        3.0 * m2 / (m1 * m1) - 3.0
    }

    pub fn max_variance(&self) -> f64 {
        self.variances.iter().copied().fold(0.0, f64::max)
    }

    /// Density on `grid`, renormalized by trapezoid.
    pub fn evaluate(&self, grid: &[f64]) -> Result<StationaryPdf> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("lambda grid must be strictly increasing".into()));
        }
        let mut density: Vec<f64> = grid.par_iter().map(|&x| self.density(x)).collect();
        let z = trapezoid(grid, &density);
        if z > 0.0 {
            density.iter_mut().for_each(|d| *d /= z);
        }
        Ok(StationaryPdf {
            grid: grid.to_vec(),
            density,
            source: PdfSource::AnalyticQuadrature,
            n_samples: None,
        })
    }

    /// 1001-point grid over `+-8` standard deviations of the widest component.
    pub fn default_grid(&self) -> Vec<f64> {
        let half = 8.0 * self.max_variance().sqrt();
        linspace(-half, half, 1001)
    }
}

/// CDF tabulated exactly at grid points and interpolated linearly between;
/// 0 and 1 outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn from_mixture(mix: &GaussianMixture, grid: &[f64]) -> Self {
        Self {
            grid: grid.to_vec(),
            values: grid.par_iter().map(|&x| mix.cdf(x)).collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= x);
        if i == 0 {
            return 0.0;
        }
        if i == self.grid.len() {
            return 1.0;
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let (c0, c1) = (self.values[i - 1], self.values[i]);
        c0 + (c1 - c0) * (x - x0) / (x1 - x0)
    }
}

/// Mixture for the real field `T(x)` at a fixed point.
pub fn tracer_field_mixture(table: &ModeTable, zonal: &ZonalStationaryPdf, alpha: f64) -> Result<GaussianMixture> {
    GaussianMixture::over_zonal(zonal, |u| total_conditional_variance(table, alpha, u))
}

/// Mixture for `Re T_k`: the real part carries half the complex variance.
pub fn tracer_mode_mixture(coef: &ModeCoefficients, zonal: &ZonalStationaryPdf, alpha: f64) -> Result<GaussianMixture> {
    GaussianMixture::over_zonal(zonal, |u| 0.5 * stationary_conditional_variance(coef, alpha, u))
}

/// Stationary density of the tracer field; default `lambda` grid when `None`.
pub fn tracer_field_pdf(
    table: &ModeTable,
    zonal: &ZonalStationaryPdf,
    alpha: f64,
    lambda_grid: Option<&[f64]>,
) -> Result<StationaryPdf> {
    let mix = tracer_field_mixture(table, zonal, alpha)?;
    match lambda_grid {
        Some(g) => mix.evaluate(g),
        None => mix.evaluate(&mix.default_grid()),
    }
}

/// Stationary density of `Re T_k`.
pub fn tracer_mode_pdf(
    coef: &ModeCoefficients,
    zonal: &ZonalStationaryPdf,
    alpha: f64,
    x_grid: Option<&[f64]>,
) -> Result<StationaryPdf> {
    let mix = tracer_mode_mixture(coef, zonal, alpha)?;
    match x_grid {
        Some(g) => mix.evaluate(g),
        None => mix.evaluate(&mix.default_grid()),
    }
}

pub const MIN_PDF_SAMPLES: usize = 1000;

/// Histogram of `samples` with `n_bins` equal bins over the sample range,
/// normalized so that `sum(density) * width = 1`. With `smooth`, counts are
/// convolved with a Gaussian kernel of Silverman bandwidth.
pub fn empirical_pdf(samples: &[f64], n_bins: usize, smooth: bool) -> Result<StationaryPdf> {
    if samples.len() < MIN_PDF_SAMPLES.max(n_bins) || n_bins == 0 {
        return Err(Error::TooFewSamples {
            need: MIN_PDF_SAMPLES.max(n_bins).max(1),
            got: samples.len(),
        });
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0.0; n_bins];
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1.0;
    }
    let grid: Vec<f64> = (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    if smooth {
        let h = silverman_bandwidth(samples);
        if h > 0.0 {
            counts = (0..n_bins)
                .map(|i| {
                    counts
                        .iter()
                        .zip(&grid)
                        .map(|(&c, &g)| c * (-0.5 * ((grid[i] - g) / h).powi(2)).exp())
                        .sum()
                })
                .collect();
        }
    }
    let total: f64 = counts.iter().sum();
    let density = counts.iter().map(|c| c / (total * width)).collect();
    Ok(StationaryPdf {
        grid,
        density,
        source: PdfSource::EmpiricalHistogram,
        n_samples: Some(samples.len()),
    })
}

/// `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Density-normalized counts in cells centered on a uniform `grid` (cell
/// edges at midpoints). Samples outside the outer cells are counted in `n`
/// but not binned.
pub fn histogram_on_grid(samples: &[f64], grid: &[f64]) -> Result<StationaryPdf> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least 2 points".into()));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let w = grid[1] - grid[0];
    let lo = grid[0] - 0.5 * w;
    let mut counts = vec![0u64; grid.len()];
    for &x in samples {
        let pos = (x - lo) / w;
        if pos >= 0.0 && pos < grid.len() as f64 {
            counts[pos as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    Ok(StationaryPdf {
        grid: grid.to_vec(),
        density: counts.iter().map(|&c| c as f64 / (n * w)).collect(),
        source: PdfSource::EmpiricalHistogram,
        n_samples: Some(samples.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (n - 1) sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample moments; skewness and kurtosis use biased central moments.
pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let variance = m2 / (n - 1.0);
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    Ok(Moments {
        mean,
        variance,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means. Trailing samples that do not fill a batch are dropped.
pub fn batch_means_se(samples: &[f64], n_batches: usize) -> Result<f64> {
    if n_batches < 2 || samples.len() < n_batches {
        return Err(Error::TooFewSamples {
            need: n_batches.max(2),
            got: samples.len(),
        });
    }
    let size = samples.len() / n_batches;
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = moments(&means).map(|m| m.variance).or_else(|e| match e {
        Error::ZeroVariance => Ok(0.0),
        e => Err(e),
    })?;
    Ok((m / n_batches as f64).sqrt())
}

/// `T(x) = sum_k 2 Re(T_k e^{ikx})`, `t_modes[j]` holding `k = j + 1`.
pub fn reconstruct_field(t_modes: &[Complex64], x_grid: &[f64]) -> Vec<f64> {
    x_grid
        .iter()
        .map(|&x| {
            t_modes
                .iter()
                .enumerate()
                .map(|(j, t)| 2.0 * (t * Complex64::from_polar(1.0, (j + 1) as f64 * x)).re)
                .sum()
        })
        .collect()
}

/// Sign changes of `u - threshold` fed one sample at a time. A sample equal
/// to the threshold does not change the remembered side, so the crossing is
/// counted on the interval that leaves it. A NaN threshold never counts.
#[derive(Debug, Clone, Copy)]
pub struct CrossingCounter {
    threshold: f64,
    side: i8,
    count: u64,
}

impl CrossingCounter {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            side: 0,
            count: 0,
        }
    }

    /// Returns true when this sample completes a crossing.
    pub fn push(&mut self, u: f64) -> bool {
        let d = u - self.threshold;
        let s = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            return false;
        };
        let crossed = self.side != 0 && s != self.side;
        if crossed {
            self.count += 1;
        }
        self.side = s;
        crossed
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

pub fn count_resonance_crossings(u_samples: &[f64], threshold: f64) -> u64 {
    let mut c = CrossingCounter::new(threshold);
    u_samples.iter().for_each(|&u| {
        c.push(u);
    });
    c.count()
}

/// Indices `i >= 1` such that the interval `(i-1, i]` contains a crossing.
pub fn crossing_indices(u_samples: &[f64], threshold: f64) -> Vec<usize> {
    let mut c = CrossingCounter::new(threshold);
    u_samples
        .iter()
        .enumerate()
        .filter_map(|(i, &u)| c.push(u).then_some(i))
        .collect()
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and a
/// continuous CDF. Sorts a copy of the samples.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64 + Sync) -> f64 {
    let mut s = samples.to_vec();
    s.par_sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .reduce(|| 0.0, f64::max)
}

/// Total-variation distance between binned samples and a reference law on
/// the cells `[edges[i], edges[i+1])`, plus the mass outside the edges.
pub fn tv_distance_binned(samples: &[f64], edges: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid("edges must be strictly increasing".into()));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb + 2];
    for &x in samples {
        let slot = match edges.partition_point(|&e| e <= x) {
            0 => 0,
            p if p > nb => nb + 1,
            p => p,
        };
        counts[slot] += 1;
    }
    let n = samples.len() as f64;
    let mut prob = Vec::with_capacity(nb + 2);
    prob.push(cdf(edges[0]));
    for w in edges.windows(2) {
        prob.push(cdf(w[1]) - cdf(w[0]));
    }
    prob.push(1.0 - cdf(edges[nb]));
    Ok(0.5 * counts.iter().zip(&prob).map(|(&c, &p)| (c as f64 / n - p).abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceRow {
    pub k: i32,
    pub u_res: Option<f64>,
    /// `u_res - mean(u)`.
    pub u_res_fluct: Option<f64>,
    /// Zonal probability of lying beyond `u_res` on the side away from the mean.
    pub tail_prob: Option<f64>,
}

pub fn resonance_table(table: &ModeTable, zonal: &ZonalStationaryPdf) -> Vec<ResonanceRow> {
    table
        .iter()
        .map(|c| {
            let tail = c.u_res.map(|u| {
                let below = zonal.cdf(u);
                if u < zonal.mean {
                    below
                } else {
                    1.0 - below
                }
            });
            ResonanceRow {
                k: c.k,
                u_res: c.u_res,
                u_res_fluct: c.u_res.map(|u| u - zonal.mean),
                tail_prob: tail,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfileRow {
    pub u: f64,
    pub total: f64,
    pub per_mode: Vec<f64>,
}

pub fn variance_profile(table: &ModeTable, alpha: f64, u_grid: &[f64]) -> Vec<VarianceProfileRow> {
    u_grid
        .iter()
        .map(|&u| VarianceProfileRow {
            u,
            total: total_conditional_variance(table, alpha, u),
            per_mode: table
                .iter()
                .map(|c| stationary_conditional_variance(c, alpha, u))
                .collect(),
        })
        .collect()
}
