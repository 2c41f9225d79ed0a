//! Per-wavenumber shear-flow coefficients: dispersion, damping, energy
//! spectra, frequencies and resonant zonal speeds.

use crate::config::{ShearKind, ShearSpec, SpectrumKind, SpectrumSpec};
use crate::error::{Error, Result};

/// Everything the integrator and the statistics need to know about mode `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub k: i32,
    pub a: f64,
    pub b: f64,
    pub gamma_v: f64,
    pub gamma_t: f64,
    pub e_v: f64,
    pub sigma_v: f64,
    /// `None` for a degenerate mode (`a_k + k = 0`).
    pub u_res: Option<f64>,
}

impl ModeCoefficients {
    /// Builds the record, setting `sigma_v = sqrt(2 gamma_v E_v)` and the
    /// resonant speed from `(a, b)`.
    pub fn new(k: i32, a: f64, b: f64, gamma_v: f64, gamma_t: f64, e_v: f64) -> Self {
        let mut m = Self {
            k,
            a,
            b,
            gamma_v,
            gamma_t,
            e_v,
            sigma_v: (2.0 * gamma_v * e_v).sqrt(),
            u_res: None,
        };
        m.u_res = resonance_threshold(&m).ok();
        m
    }

    /// Shear dispersion frequency `a_k u + b_k`.
    pub fn omega_v(&self, u: f64) -> f64 {
        self.a * u + self.b
    }

    /// Tracer advection frequency `-u k`.
    pub fn omega_t(&self, u: f64) -> f64 {
        -u * f64::from(self.k)
    }

    /// Relative frequency `omega_T - omega_v = -(a_k + k) u - b_k`.
    pub fn omega_r(&self, u: f64) -> f64 {
        -(self.a + f64::from(self.k)) * u - self.b
    }

    pub fn gamma_r(&self) -> f64 {
        self.gamma_t - self.gamma_v
    }
}

/// The mode set k = 1..kmax. Negative wavenumbers are implied by conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    modes: Vec<ModeCoefficients>,
}

impl ModeTable {
    pub fn new(modes: Vec<ModeCoefficients>) -> Self {
        Self { modes }
    }

    pub fn modes(&self) -> &[ModeCoefficients] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ModeCoefficients> {
        self.modes.iter()
    }
}

impl<'a> IntoIterator for &'a ModeTable {
    type Item = &'a ModeCoefficients;
    type IntoIter = std::slice::Iter<'a, ModeCoefficients>;

    fn into_iter(self) -> Self::IntoIter {
        self.modes.iter()
    }
}

/// `(a_k, b_k)` for the three shear kinds. Valid for negative `k` as well.
pub fn dispersion_coeffs(shear: &ShearSpec, k: i32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    let kf = f64::from(k);
    Ok(match shear.kind {
        ShearKind::Random => (0.0, 0.0),
        ShearKind::Advective => (0.0, -shear.c_wave * kf),
        ShearKind::Qg => {
            let f = shear.f_deform;
            (kf * (f / (kf * kf) - 1.0), shear.beta * kf / (kf * kf + f))
        }
    })
}

fn raw_energy(spec: &SpectrumSpec, k: i32) -> f64 {
    let k = f64::from(k.unsigned_abs());
    match spec.kind {
        SpectrumKind::Equipartition => spec.e0,
        SpectrumKind::Kolmogorov => spec.e0 * k.powf(-5.0 / 3.0),
        SpectrumKind::Combined => {
            let k0 = f64::from(spec.k0);
            if k <= k0 {
                spec.e0
            } else {
                spec.e0 * (k / k0).powf(-5.0 / 3.0)
            }
        }
    }
}

/// Shear energy `E_{v,k}` for each wavenumber in `modes`, in the same order.
///
/// With `normalize_total` every value is rescaled so that the sum over
/// positive `k` in `modes` equals the equipartition total `n_pos * E0`.
pub fn energy_spectrum(spec: &SpectrumSpec, modes: &[i32]) -> Result<Vec<f64>> {
    if modes.is_empty() {
        return Err(Error::EmptyModes);
    }
    if modes.contains(&0) {
        return Err(Error::ZeroWavenumber);
    }
    let mut energies: Vec<f64> = modes.iter().map(|&k| raw_energy(spec, k)).collect();
    if spec.normalize_total {
        let positive: Vec<f64> = modes
            .iter()
            .zip(&energies)
            .filter(|(&k, _)| k > 0)
            .map(|(_, &e)| e)
            .collect();
        if !positive.is_empty() {
            let scale = positive.len() as f64 * spec.e0 / positive.iter().sum::<f64>();
            energies.iter_mut().for_each(|e| *e *= scale);
        }
    }
    Ok(energies)
}

/// `(omega_v, omega_T, omega_R)` at zonal speed `u`.
pub fn frequencies(coef: &ModeCoefficients, u: f64) -> (f64, f64, f64) {
    (coef.omega_v(u), coef.omega_t(u), coef.omega_r(u))
}

/// Zonal speed where `omega_R` vanishes: `-b_k / (a_k + k)`.
pub fn resonance_threshold(coef: &ModeCoefficients) -> Result<f64> {
    let denom = coef.a + f64::from(coef.k);
    if denom == 0.0 {
        return Err(Error::DegenerateMode(coef.k));
    }
    // -0.0 for the random kind would print oddly
    Ok(-coef.b / denom + 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qg() -> ShearSpec {
        ShearSpec::default()
    }

    fn mode(shear: &ShearSpec, k: i32) -> ModeCoefficients {
        let (a, b) = dispersion_coeffs(shear, k).unwrap();
        ModeCoefficients::new(k, a, b, shear.gamma_v(k), 0.101, 1.0)
    }

    #[test]
    fn qg_dispersion_k2() {
        let (a, b) = dispersion_coeffs(&qg(), 2).unwrap();
        assert!((a + 0.75).abs() < 1e-15);
        assert!((b - 17.82 / 6.5).abs() < 1e-14);
        assert!((b - 2.741_54).abs() < 1e-5);
    }

    #[test]
    fn advective_and_random_dispersion() {
        let adv = ShearSpec {
            kind: ShearKind::Advective,
            c_wave: 1.0183,
            ..qg()
        };
        assert_eq!(dispersion_coeffs(&adv, 1).unwrap(), (0.0, -1.0183));
        let random = ShearSpec {
            kind: ShearKind::Random,
            ..qg()
        };
        assert_eq!(dispersion_coeffs(&random, 3).unwrap(), (0.0, 0.0));
        assert_eq!(dispersion_coeffs(&random, 0), Err(Error::ZeroWavenumber));
    }

    #[test]
    fn spectra() {
        let kolm = SpectrumSpec {
            kind: SpectrumKind::Kolmogorov,
            e0: 1.0,
            ..SpectrumSpec::default()
        };
        let e = energy_spectrum(&kolm, &[2]).unwrap();
        assert!((e[0] - 0.314_98).abs() < 1e-5);

        let comb = SpectrumSpec {
            kind: SpectrumKind::Combined,
            e0: 1.0,
            k0: 3,
            normalize_total: false,
        };
        let e = energy_spectrum(&comb, &[2, 6]).unwrap();
        assert_eq!(e[0], 1.0);
        assert!((e[1] - 2f64.powf(-5.0 / 3.0)).abs() < 1e-15);

        let eq = SpectrumSpec {
            e0: 0.7,
            ..SpectrumSpec::default()
        };
        assert!(energy_spectrum(&eq, &[1, 4, -9]).unwrap().iter().all(|&x| x == 0.7));
        assert_eq!(energy_spectrum(&eq, &[]), Err(Error::EmptyModes));
    }

    #[test]
    fn normalized_kolmogorov_total_matches_equipartition() {
        let kolm = SpectrumSpec {
            kind: SpectrumKind::Kolmogorov,
            e0: 0.8,
            k0: 1,
            normalize_total: true,
        };
        let ks: Vec<i32> = (1..=5).collect();
        let e = energy_spectrum(&kolm, &ks).unwrap();
        let total: f64 = e.iter().sum();
        assert!((total - 5.0 * 0.8).abs() / 4.0 < 1e-12);
        assert!(e.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn frequencies_examples() {
        let m = mode(&qg(), 1);
        let (_, _, wr) = frequencies(&m, -1.018_285_714_285_714_3);
        assert!(wr.abs() < 1e-12);

        let random = ShearSpec {
            kind: ShearKind::Random,
            ..qg()
        };
        let m = mode(&random, 2);
        assert_eq!(frequencies(&m, 0.5).2, -1.0);
        assert_eq!(frequencies(&m, 0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn resonance_thresholds() {
        let m = mode(&qg(), 1);
        let expected = -8.91 / (2.5 * 3.5);
        assert!((m.u_res.unwrap() - expected).abs() < 1e-14);
        assert!((m.u_res.unwrap() + 1.018_29).abs() < 1e-5);

        let random = ShearSpec {
            kind: ShearKind::Random,
            ..qg()
        };
        assert_eq!(mode(&random, 4).u_res, Some(0.0));

        let adv = ShearSpec {
            kind: ShearKind::Advective,
            c_wave: 2.0,
            ..qg()
        };
        assert_eq!(mode(&adv, 5).u_res, Some(2.0));

        let degenerate = ModeCoefficients::new(2, -2.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(degenerate.u_res, None);
        assert_eq!(resonance_threshold(&degenerate), Err(Error::DegenerateMode(2)));
    }

    #[test]
    fn synchronized_thresholds_for_random_and_advective() {
        for kind in [ShearKind::Random, ShearKind::Advective] {
            let spec = ShearSpec {
                kind,
                c_wave: 1.0183,
                ..qg()
            };
            let first = mode(&spec, 1).u_res.unwrap();
            for k in 2..=12 {
                assert_eq!(mode(&spec, k).u_res.unwrap(), first);
            }
        }
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(k in 1i32..40, beta in 0.1f64..20.0, f in 0.1f64..10.0, c in -3.0f64..3.0) {
            for kind in [ShearKind::Random, ShearKind::Advective, ShearKind::Qg] {
                let spec = ShearSpec { kind, beta, f_deform: f, c_wave: c, ..qg() };
                let (ap, bp) = dispersion_coeffs(&spec, k).unwrap();
                let (an, bn) = dispersion_coeffs(&spec, -k).unwrap();
                prop_assert_eq!(ap, -an);
                prop_assert_eq!(bp, -bn);
                prop_assert_eq!(spec.gamma_v(k), spec.gamma_v(-k));
            }
        }

        #[test]
        fn forcing_reproduces_energy(gamma in 1e-3f64..50.0, e in 1e-4f64..100.0) {
            let m = ModeCoefficients::new(1, 0.0, 0.0, gamma, 1.0, e);
            let back = m.sigma_v * m.sigma_v / (2.0 * gamma);
            prop_assert!(((back - e) / e).abs() < 4.0 * f64::EPSILON);
        }

        #[test]
        fn resonance_zero_of_omega_r(k in 1i32..30, beta in 0.1f64..20.0, f in 0.1f64..10.0) {
            let spec = ShearSpec { beta, f_deform: f, ..qg() };
            let m = mode(&spec, k);
            prop_assert!(m.omega_r(m.u_res.unwrap()).abs() < 1e-12);
        }
    }
}
