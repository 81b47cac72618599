//! Example configs compiled into the binary, one per acceptance scenario.

use super::config::ScenarioConfig;
use crate::error::{NvneError, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("isospectrality", include_str!("../../presets/isospectrality.json")),
    ("pure-state", include_str!("../../presets/pure-state.json")),
    ("larmor", include_str!("../../presets/larmor.json")),
    ("equilibrium", include_str!("../../presets/equilibrium.json")),
    ("stability", include_str!("../../presets/stability.json")),
    ("composite", include_str!("../../presets/composite.json")),
    ("dephasing", include_str!("../../presets/dephasing.json")),
    ("brackets", include_str!("../../presets/brackets.json")),
    ("convergence", include_str!("../../presets/convergence.json")),
    ("spin-precession", include_str!("../../presets/spin-precession.json")),
    ("dephasing-biased", include_str!("../../presets/dephasing-biased.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| NvneError::config("preset", format!("unknown preset `{name}`")))?;
    ScenarioConfig::from_json(text)
}
