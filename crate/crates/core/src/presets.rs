//! Parameter files shipped with the crate.

use crate::config::ExperimentConfig;
use crate::error::Result;

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, file contents)` for every shipped preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../presets/", $name, ".cfg"))),)*
        ];
    };
}

presets!(
    "single_mode_qg_linear",
    "single_mode_qg_linear_eps0.1",
    "single_mode_qg_linear_eps0.01",
    "single_mode_qg_linear_eps0.001",
    "single_mode_qg_cubic_f0_B0",
    "single_mode_qg_cubic_f0_B25",
    "single_mode_qg_cubic_f1_B0",
    "single_mode_qg_cubic_f1_B25",
    "multimode_qg_equip",
    "multimode_qg_kolm",
    "nondispersive_advective",
    "random_shear",
);

/// Raw text of a preset; accepts the name with or without `.cfg`.
pub fn preset_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Option<Result<ExperimentConfig>> {
    preset_text(name).map(str::parse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate_config;

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap().unwrap();
            let report = validate_config(&cfg);
            assert!(report.is_ok(), "{name}: {report}");
        }
        assert!(preset("single_mode_qg_linear.cfg").is_some());
        assert!(preset("nope").is_none());
    }
}
