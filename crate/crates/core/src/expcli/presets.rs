//! Configurations shipped with the library: the curve, field and surface
//! figures plus the slope and envelope checks.

use super::ExpError;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1-field", include_str!("../../presets/fig1-field.json")),
    ("fig2-gaussian", include_str!("../../presets/fig2-gaussian.json")),
    ("fig2-chi2", include_str!("../../presets/fig2-chi2.json")),
    ("fig2-indicator-gaussian", include_str!("../../presets/fig2-indicator-gaussian.json")),
    ("fig2-indicator-chi2", include_str!("../../presets/fig2-indicator-chi2.json")),
    ("fig3-renyi-gaussian", include_str!("../../presets/fig3-renyi-gaussian.json")),
    ("fig3-renyi-chi2", include_str!("../../presets/fig3-renyi-chi2.json")),
    ("fig3-renyi-indicator-gaussian", include_str!("../../presets/fig3-renyi-indicator-gaussian.json")),
    ("fig3-renyi-indicator-chi2", include_str!("../../presets/fig3-renyi-indicator-chi2.json")),
    ("fig4-st-field", include_str!("../../presets/fig4-st-field.json")),
    ("fig5-st-surface", include_str!("../../presets/fig5-st-surface.json")),
    ("slope-purepower", include_str!("../../presets/slope-purepower.json")),
    ("slope-purepower-indicator", include_str!("../../presets/slope-purepower-indicator.json")),
    ("envelope-rank2", include_str!("../../presets/envelope-rank2.json")),
];

/// JSON text of a named preset.
pub fn preset(name: &str) -> Result<&'static str, ExpError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| ExpError::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expcli::ExperimentConfig;

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::from_json(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&cfg.name, name);
            assert!(cfg.violations().is_empty(), "{name}: {:?}", cfg.violations());
        }
        assert!(preset("nope").is_err());
    }
}
