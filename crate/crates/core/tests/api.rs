use shear_tracer::integrator::{simulate_ensemble, simulate_trajectory};
use shear_tracer::statistics::{moments, tracer_mode_mixture};
use shear_tracer::{build_mode_table, presets, validate_config, zonal, ExperimentConfig, NoiseScheme};

#[test]
fn config_text_round_trip() {
    for (name, _) in presets::PRESETS {
        let cfg = presets::preset(name).unwrap().unwrap();
        let again: ExperimentConfig = cfg.to_string().parse().unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn preset_lookup_accepts_suffix() {
    assert_eq!(presets::preset_text("random_shear"), presets::preset_text("random_shear.cfg"));
    assert!(presets::preset("no_such_preset").is_none());
}

#[test]
fn trajectories_are_independent_streams() {
    let mut cfg = presets::preset("single_mode_qg_linear").unwrap().unwrap();
    cfg.t_end = 30.0;
    let a = simulate_trajectory(&cfg, 1, 0, NoiseScheme::ExactOu).unwrap();
    let b = simulate_trajectory(&cfg, 1, 1, NoiseScheme::ExactOu).unwrap();
    assert_eq!(a.times, b.times);
    assert_ne!(a.states, b.states);
    assert_eq!(a, simulate_trajectory(&cfg, 1, 0, NoiseScheme::ExactOu).unwrap());
}

#[test]
fn ensemble_reduction_matches_single_runs() {
    let mut cfg = presets::preset("single_mode_qg_linear").unwrap().unwrap();
    cfg.t_end = 20.0;
    cfg.n_ensemble = 3;
    let out = simulate_ensemble(&cfg, 8, NoiseScheme::ExactOu, |_| Vec::new(), |acc, s| acc.push(s.u)).unwrap();
    assert_eq!(out.len(), 3);
    for (j, (us, _)) in out.iter().enumerate() {
        let rec = simulate_trajectory(&cfg, 8, j as u64, NoiseScheme::ExactOu).unwrap();
        let expect: Vec<f64> = rec.states.iter().map(|s| s.u).collect();
        assert_eq!(us, &expect);
    }
}

#[test]
fn zonal_mean_is_close_to_forcing_for_linear_flow() {
    let mut cfg = presets::preset("single_mode_qg_linear").unwrap().unwrap();
    cfg.t_end = 400.0;
    assert!(validate_config(&cfg).is_ok());
    let rec = simulate_trajectory(&cfg, 2, 0, NoiseScheme::ExactOu).unwrap();
    let us: Vec<f64> = rec.states.iter().map(|s| s.u).collect();
    let m = moments(&us).unwrap();
    // long-memory OU samples: loose tolerance
    assert!((m.mean - cfg.zonal.f / cfg.zonal.gamma_u).abs() < 0.3, "{}", m.mean);
}

#[test]
fn mode_mixture_variance_matches_weighted_sum() {
    let cfg = presets::preset("single_mode_qg_linear").unwrap().unwrap();
    let table = build_mode_table(&cfg).unwrap();
    let grid = zonal::default_grid(&cfg.zonal).unwrap();
    let zpdf = zonal::stationary_pdf(&cfg.zonal, &grid).unwrap();
    let mix = tracer_mode_mixture(&table.modes()[0], &zpdf, cfg.tracer.alpha).unwrap();
    let direct: f64 = mix.weights.iter().zip(&mix.variances).map(|(w, v)| w * v).sum();
    assert!((mix.variance() - direct).abs() < 1e-12 * direct);
}
